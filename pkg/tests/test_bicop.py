import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from spatialvine import bicop
from spatialvine._common import DomainError
from spatialvine.bicop import CopulaFamily, Kind, PairCopula

FAMILIES = [
    PairCopula(bicop.GAUSSIAN, 0.6),
    PairCopula(bicop.GAUSSIAN, -0.4),
    PairCopula(bicop.STUDENT_T, 0.5, 5.0),
    PairCopula(bicop.STUDENT_T, -0.3, 12.0),
    PairCopula(CopulaFamily(Kind.CLAYTON, 0), 2.0),
    PairCopula(CopulaFamily(Kind.CLAYTON, 90), 1.5),
    PairCopula(CopulaFamily(Kind.CLAYTON, 180), 0.8),
    PairCopula(CopulaFamily(Kind.CLAYTON, 270), 3.0),
    PairCopula(CopulaFamily(Kind.GUMBEL, 0), 1.8),
    PairCopula(CopulaFamily(Kind.GUMBEL, 90), 2.5),
    PairCopula(CopulaFamily(Kind.GUMBEL, 180), 1.3),
    PairCopula(CopulaFamily(Kind.GUMBEL, 270), 1.6),
    PairCopula(bicop.FRANK, 5.0),
    PairCopula(bicop.FRANK, -3.0),
]
GRID = np.linspace(0.1, 0.9, 9)


def test_gaussian_pdf_matches_mvn():
    rho = 0.6
    u, v = np.meshgrid(GRID, GRID)
    x, y = stats.norm.ppf(u), stats.norm.ppf(v)
    mvn = stats.multivariate_normal([0, 0], [[1, rho], [rho, 1]])
    ref = mvn.pdf(np.dstack([x, y])) / (stats.norm.pdf(x) * stats.norm.pdf(y))
    got = bicop.pdf(PairCopula(bicop.GAUSSIAN, rho), u, v)
    assert np.allclose(got, ref, rtol=1e-10)


def test_student_t_pdf_matches_bivariate_t():
    rho, nu = -0.3, 6.0
    u, v = np.meshgrid(GRID, GRID)
    x, y = stats.t.ppf(u, nu), stats.t.ppf(v, nu)
    mvt = stats.multivariate_t([0, 0], [[1, rho], [rho, 1]], df=nu)
    ref = mvt.pdf(np.dstack([x, y])) / (stats.t.pdf(x, nu) * stats.t.pdf(y, nu))
    got = bicop.pdf(PairCopula(bicop.STUDENT_T, rho, nu), u, v)
    assert np.allclose(got, ref, rtol=1e-8)


def test_clayton_pdf_closed_form():
    th = 2.0
    u, v = np.meshgrid(GRID, GRID)
    ref = (1 + th) * (u * v) ** (-1 - th) * (u ** -th + v ** -th - 1) ** (-1 / th - 2)
    got = bicop.pdf(PairCopula(CopulaFamily(Kind.CLAYTON), th), u, v)
    assert np.allclose(got, ref, rtol=1e-10)


def test_independence_is_uniform():
    pc = PairCopula(bicop.INDEPENDENCE)
    assert np.allclose(bicop.pdf(pc, GRID, GRID[::-1]), 1.0)
    assert np.allclose(bicop.hfunc(pc, GRID, 0.3), GRID)


@pytest.mark.parametrize("pc", FAMILIES, ids=str)
def test_hfunc_is_integral_of_density(pc):
    for v in (0.2, 0.55, 0.85):
        for u in (0.15, 0.5, 0.9):
            ref, _ = integrate.quad(lambda s: bicop.pdf(pc, s, v), 0, u, epsabs=1e-11)
            assert bicop.hfunc(pc, u, v) == pytest.approx(ref, abs=2e-6)


@pytest.mark.parametrize("pc", FAMILIES, ids=str)
def test_hfunc2_matches_swap(pc):
    u, v = np.meshgrid(GRID, GRID)
    assert np.allclose(bicop.hfunc2(pc, u, v), bicop.hfunc(bicop.swap(pc), v, u), atol=1e-12)
    assert np.allclose(bicop.pdf(pc, u, v), bicop.pdf(bicop.swap(pc), v, u), rtol=1e-10)


@pytest.mark.parametrize("pc", FAMILIES, ids=str)
def test_hinv_inverts_hfunc(pc):
    u, v = np.meshgrid(GRID, GRID)
    assert np.allclose(bicop.hinv(pc, bicop.hfunc(pc, u, v), v), u, atol=1e-8)
    assert np.allclose(bicop.hinv2(pc, bicop.hfunc2(pc, u, v), u), v, atol=1e-8)


def test_edge_terms_consistent():
    pc = FAMILIES[2]
    u, v = np.meshgrid(GRID, GRID)
    lp, h1, h2 = bicop.edge_terms(pc, u, v)
    assert np.allclose(lp, bicop.logpdf(pc, u, v))
    assert np.allclose(h1, bicop.hfunc(pc, u, v))
    assert np.allclose(h2, bicop.hfunc2(pc, u, v))


@given(p=st.floats(1e-6, 1 - 1e-6), nu=st.floats(2.1, 60.0))
@settings(max_examples=60, deadline=None)
def test_t_quantile_matches_scipy(p, nu):
    assert bicop.t_quantile(nu, p) == pytest.approx(stats.t.ppf(p, nu), rel=1e-8, abs=1e-9)


@given(tau=st.floats(-0.9, 0.9))
@settings(max_examples=50, deadline=None)
def test_tau_roundtrip_elliptical(tau):
    for fam in (bicop.GAUSSIAN, bicop.STUDENT_T):
        assert bicop.par_to_tau(fam, bicop.tau_to_par(fam, tau)) == pytest.approx(tau, abs=1e-6)


@given(tau=st.floats(0.01, 0.9), rot=st.sampled_from([0, 90, 180, 270]),
       kind=st.sampled_from([Kind.CLAYTON, Kind.GUMBEL]))
@settings(max_examples=60, deadline=None)
def test_tau_roundtrip_archimedean(tau, rot, kind):
    fam = CopulaFamily(kind, rot)
    t = -tau if fam.negative else tau
    assert bicop.par_to_tau(fam, bicop.tau_to_par(fam, t)) == pytest.approx(t, abs=1e-6)


@given(tau=st.floats(-0.85, 0.85).filter(lambda x: abs(x) > 1e-3))
@settings(max_examples=40, deadline=None)
def test_tau_roundtrip_frank(tau):
    th = bicop.tau_to_par(bicop.FRANK, tau)
    assert bicop.par_to_tau(bicop.FRANK, th) == pytest.approx(tau, abs=1e-4)


def test_frank_tau_reference_value():
    # tau(theta=5) = 1 - 4/theta (1 - D1(theta)) with D1 from direct quadrature
    th = 5.0
    d1 = integrate.quad(lambda t: t / np.expm1(t), 0, th)[0] / th
    assert bicop.par_to_tau(bicop.FRANK, th) == pytest.approx(1 - 4 / th * (1 - d1), abs=1e-12)


def test_tau_sign_mismatch_raises():
    with pytest.raises(DomainError):
        bicop.tau_to_par(CopulaFamily(Kind.CLAYTON, 0), -0.3)
    with pytest.raises(DomainError):
        bicop.tau_to_par(bicop.GAUSSIAN, 1.0)


def test_absorb_sign_rotates():
    fam = bicop.absorb_sign(CopulaFamily(Kind.GUMBEL, 0), -0.4)
    assert fam.rotation == 90
    assert bicop.absorb_sign(bicop.GAUSSIAN, -0.4) == bicop.GAUSSIAN


def test_invalid_parameters_rejected():
    with pytest.raises(DomainError):
        PairCopula(bicop.STUDENT_T, 0.3, 1.5)
    with pytest.raises(DomainError):
        PairCopula(CopulaFamily(Kind.GUMBEL), 0.5)
    with pytest.raises(DomainError):
        CopulaFamily(Kind.GAUSSIAN, 90)


def test_parse_family_roundtrip():
    for pc in FAMILIES:
        assert bicop.parse_family(str(pc.family)) == pc.family


def test_fit_pair_recovers_parameter():
    pc = PairCopula(CopulaFamily(Kind.GUMBEL, 180), 2.0)
    U = bicop.simulate_pair(pc, 3000, seed=4)
    est = bicop.fit_pair(pc.family, U[:, 0], U[:, 1])
    assert est.theta == pytest.approx(2.0, abs=0.1)


def test_select_family_prefers_truth_and_independence():
    pc = PairCopula(CopulaFamily(Kind.CLAYTON, 0), 3.0)
    U = bicop.simulate_pair(pc, 2000, seed=2)
    sel = bicop.select_family(U[:, 0], U[:, 1])
    assert sel.family == pc.family
    V = np.random.default_rng(0).uniform(size=(500, 2))
    assert bicop.independence_test(V[:, 0], V[:, 1]).independent
    assert bicop.select_family(V[:, 0], V[:, 1]).family == bicop.INDEPENDENCE


def test_independence_statistic_formula():
    n, tau = 100, 0.2
    assert bicop.independence_statistic(tau, n) == pytest.approx(
        0.2 * np.sqrt(9 * 100 * 99 / (2 * 205)))


def test_simulated_tau_matches():
    pc = PairCopula(bicop.STUDENT_T, 0.7, 5.0)
    U = bicop.simulate_pair(pc, 5000, seed=11)
    assert bicop.empirical_tau(U[:, 0], U[:, 1]) == pytest.approx(
        bicop.par_to_tau(pc.family, 0.7), abs=0.02)
