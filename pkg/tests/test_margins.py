import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from spatialvine import margins as m
from spatialvine._common import DomainError, ValidationError
from spatialvine.stations import Stations


def _stations(d, seed=0):
    rng = np.random.default_rng(seed)
    return Stations(tuple(range(d)), rng.uniform(6, 15, d), rng.uniform(47, 55, d),
                    rng.uniform(20, 1000, d))


def _params(beta=None, eta=None, st=None):
    st = st or _stations(14)
    return m.MarginalParams(np.zeros(57) if beta is None else beta,
                            np.zeros(33) if eta is None else eta,
                            m.StandardizationRecord.from_stations(st),
                            m.WeightPoly(np.zeros(1), np.array([1.0, 100.0])), n_days=100)


def _ar_beta(rng, scale=1e-4):
    beta = rng.normal(0, scale, 57)
    for name, val in [("beta0", 1.0), ("beta_s", -0.5), ("beta_c", -2.0),
                      ("gamma1", 0.7), ("gamma2", -0.1), ("gamma3", 0.05)]:
        beta[m.BETA_SLICES[name].start] = val
    return beta


def test_dimensions():
    assert m.N_BETA == 57 and m.N_ETA == 33
    assert [m.group_size(d) for _, d in m.BETA_DEGREES] == [3, 12, 10, 10, 10, 12]
    assert [m.group_size(d) for _, d in m.ETA_DEGREES] == [5, 11, 8, 9]
    with pytest.raises(DomainError):
        m.MarginalParams(np.zeros(56), np.zeros(33), None, None)
    with pytest.raises(DomainError):
        m.MarginalParams(np.zeros(57), np.zeros(34), None, None)


def test_design_has_57_columns():
    st = _stations(13)
    Z = m.StandardizationRecord.from_stations(st).apply(st)
    X, y = m.design_matrix(np.random.default_rng(0).normal(size=(80, 13)), Z)
    assert X.shape == (13 * 77, 57) and y.shape == (13 * 77,)


def test_weights_constant_variance():
    rng = np.random.default_rng(0)
    base = rng.normal(size=12)
    base = (base - base.mean()) / base.std(ddof=1) * np.sqrt(2.5)
    temps = np.tile(base, (300, 1)) + rng.normal(size=(300, 1))
    _, w = m.compute_weights(temps)
    assert np.allclose(w, 2.5, rtol=0.01)


def test_weights_seasonal_variance():
    N, d = 730, 400
    t = np.arange(1, N + 1)
    v = np.exp(np.sin(2 * np.pi * t / 365.25))
    rng = np.random.default_rng(1)
    temps = rng.normal(size=(N, d)) * np.sqrt(v)[:, None]
    _, w = m.compute_weights(temps)
    assert np.max(np.abs(w / v - 1)) <= 0.10


def test_weights_one_constant_station():
    temps = np.column_stack([np.full(50, 3.0), np.random.default_rng(2).normal(size=50)])
    _, w = m.compute_weights(temps)
    assert np.all(np.isfinite(w)) and np.all(w > 0)


def test_eval_aggregated_intercepts_and_single_terms():
    eta = np.zeros(33)
    eta[m.ETA_SLICES["omega"].start] = np.log(2.0)
    beta = np.zeros(57)
    beta[m.BETA_SLICES["beta0"].start + 1] = 1.0
    p = _params(beta, eta)
    a = m.eval_aggregated(p, np.array([[2.0, 0.3, -0.1]]), standardized=True)
    assert a["beta0"][0] == pytest.approx(2.0)
    assert a["omega"][0] == pytest.approx(2.0)
    assert a["nu"][0] == pytest.approx(1.0)


def test_eval_aggregated_cubic_omega():
    eta = np.zeros(33)
    s = m.ETA_SLICES["omega"].start
    eta[s:s + 4] = [0.1, 0.2, -0.3, 0.05]
    z = np.array([[1.7, 0.0, 0.0]])
    a = m.eval_aggregated(_params(eta=eta), z, standardized=True)
    ref = np.exp(0.1 + 0.2 * 1.7 - 0.3 * 1.7 ** 2 + 0.05 * 1.7 ** 3)
    assert a["omega"][0] == pytest.approx(ref, rel=1e-12)


def test_fit_mean_noiseless_recovery():
    rng = np.random.default_rng(0)
    st = _stations(14)
    std = m.StandardizationRecord.from_stations(st)
    beta = _ar_beta(rng)
    agg = m.eval_aggregated(_params(beta, st=st), st)
    N = 400
    y = np.zeros((N, 14))
    y[:3] = rng.normal(size=(3, 14))
    for t in range(3, N):
        y[t] = m.mean_step(agg, t + 1, y[t - 1], y[t - 2], y[t - 3])
    est, res = m.fit_mean(y, st, std)
    assert np.max(np.abs(est - beta)) < 1e-6
    assert np.max(np.abs(res)) < 1e-8


def test_fit_mean_rank_deficient_names_group():
    st = _stations(5)
    std = m.StandardizationRecord.from_stations(st)
    with pytest.raises(ValidationError, match="beta_s"):
        m.fit_mean(np.random.default_rng(0).normal(size=(100, 5)), st, std)


def test_skewt_symmetric_cases():
    assert m.skewt_pdf(1.5, 1.5, 2.0, 0.0, 6.0) == pytest.approx(stats.t.pdf(0, 6) / 2.0)
    assert m.skewt_cdf(0.7, 0.7, 1.3, 0.0, 4.0) == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(m.skewt_cdf(np.array([-1.0, 2.0]), 0, 1, 0, 7), stats.t.cdf([-1.0, 2.0], 7),
                       atol=1e-10)


def test_skewt_pdf_integrates_to_one():
    val, _ = integrate.quad(lambda x: m.skewt_pdf(x, 0, 1, 3, 5), -np.inf, np.inf, epsabs=1e-12)
    assert val == pytest.approx(1.0, abs=1e-6)


@given(q=st.floats(1e-6, 1 - 1e-6), alpha=st.sampled_from([-4.0, -1.0, 0.0, 0.5, 3.0]),
       nu=st.sampled_from([2.5, 5.0, 30.0]))
@settings(max_examples=60, deadline=None)
def test_skewt_quantile_roundtrip(q, alpha, nu):
    x = m.skewt_quantile(q, 0.3, 1.7, alpha, nu)
    assert m.skewt_cdf(x, 0.3, 1.7, alpha, nu) == pytest.approx(q, abs=1e-8)


def test_skewt_cdf_matches_quadrature():
    for x in (-3.0, -0.4, 0.0, 1.2, 6.0):
        ref = integrate.quad(lambda z: m.skewt_pdf(z, 0, 1, -2, 4), -np.inf, x, epsabs=1e-13)[0]
        assert m.skewt_cdf(x, 0, 1, -2, 4) == pytest.approx(ref, abs=1e-9)


def test_skewt_mean_offset():
    assert m.skewt_mean_offset(0.0, 5.0) == 0.0
    assert m.skewt_mean_offset(1e8, 1000.0) == pytest.approx(np.sqrt(2 / np.pi), abs=1e-3)
    x = m.skewt_rvs(400_000, 0, 1, 1.0, 5.0, seed=3)
    assert m.skewt_mean_offset(1.0, 5.0) == pytest.approx(x.mean(), abs=0.01)
    assert m.skewt_mean_offset(-1.0, 5.0) == -m.skewt_mean_offset(1.0, 5.0)
    with pytest.raises(DomainError):
        m.skewt_mean_offset(1.0, 1.0)


def test_skewt_rvs_matches_cdf():
    x = m.skewt_rvs(20000, 0.5, 2.0, -3.0, 5.0, seed=1)
    assert stats.kstest(x, lambda v: m.skewt_cdf(v, 0.5, 2.0, -3.0, 5.0)).pvalue > 0.01


@pytest.mark.slow
def test_fit_skewt_intercept_recovery():
    st = _stations(10)
    std = m.StandardizationRecord.from_stations(st)
    R = m.skewt_rvs((5000, 10), 0.2, 1.5, 2.0, 8.0, seed=5)
    fr = m.fit_skewt(R, st, std, freeze_higher=True)
    eta = fr.params
    assert eta.shape == (33,)
    got = [eta[m.ETA_SLICES[k].start] for k in ("xi", "omega", "alpha", "nu")]
    assert got[0] == pytest.approx(0.2, abs=0.05)
    assert np.exp(got[1]) == pytest.approx(1.5, abs=0.05)
    assert got[2] == pytest.approx(2.0, abs=0.25)
    assert np.exp(got[3]) == pytest.approx(8.0, abs=1.5)


def test_fit_skewt_symmetric_truth():
    st = _stations(4)
    std = m.StandardizationRecord.from_stations(st)
    R = stats.t.rvs(6, size=(5000, 4), random_state=2)
    fr = m.fit_skewt(R, st, std, freeze_higher=True)
    assert abs(fr.params[m.ETA_SLICES["alpha"].start]) <= 0.1


def test_to_copula_data_properties():
    eta = np.zeros(33)
    eta[m.ETA_SLICES["nu"].start] = np.log(6.0)
    eta[m.ETA_SLICES["alpha"].start] = -1.0
    st = _stations(14)
    p = _params(eta=eta, st=st)
    xi, om, al, nu = m.station_skewt(p, st)
    med = m.skewt_quantile(0.5, xi[0], om[0], al[0], nu[0])
    R = np.column_stack([np.full(3, med)] + [np.linspace(-1, 1, 3)] * 13)
    U = m.to_copula_data(R, p, st)
    assert U[0, 0] == pytest.approx(0.5, abs=1e-10)
    assert np.all(np.diff(U[:, 1]) > 0)
    sims = m.skewt_rvs(3000, xi[0], om[0], al[0], nu[0], seed=0)
    U = m.to_copula_data(sims[:, None].repeat(14, 1), p, st)
    assert stats.kstest(U[:, 0], "uniform").pvalue > 0.05


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(9)
    st = _stations(13, seed=9)
    beta = _ar_beta(rng, 1e-4)
    N = 200
    t = np.arange(1, N + 1)
    w = np.exp(1.5 + 0.3 * np.cos(2 * np.pi * t / 365.25))
    agg = m.eval_aggregated(_params(beta, st=st), st)
    y = np.zeros((N, 13))
    y[:3] = rng.normal(size=(3, 13))
    e = m.skewt_rvs((N, 13), 0, 0.8, -1.0, 7.0, seed=4)
    for k in range(3, N):
        y[k] = m.mean_step(agg, k + 1, y[k - 1], y[k - 2], y[k - 3]) + e[k]
    temps = y * np.sqrt(w)[:, None]
    return st, temps, m.fit_margins(temps, st, maxiter=300)


def test_round_trip_to_temperatures(fitted):
    st, temps, fit = fitted
    for k in (0, 5, 12):
        one = st.subset([k])
        out = m.back_transform(fit.copula_data[:, k], fit.params, one, start_temps=temps[:3, k],
                               zero_mean=False, w_hat=fit.w_hat)
        assert np.max(np.abs(out[3:] - temps[3:, k])) < 1e-6


def test_residuals_recomputed(fitted):
    st, temps, fit = fitted
    R = m.compute_residuals(temps, fit.params, st, w_hat=fit.w_hat)
    assert np.allclose(R, fit.residuals, atol=1e-10)
    se = R.std(axis=0) / np.sqrt(R.shape[0])
    assert np.all(np.abs(R.mean(axis=0)) <= 3 * se + 1e-12)


def test_back_transform_median_is_mean_path():
    st = _stations(14)
    beta = _ar_beta(np.random.default_rng(0), 0.0)
    eta = np.zeros(33)
    eta[m.ETA_SLICES["nu"].start] = 2.0
    p = _params(beta, eta, st=st)
    one = st.subset([0])
    out = m.back_transform(np.full(20, 0.5), p, one, start_temps=[1.0, 2.0, 3.0],
                           w_hat=np.ones(23))
    ref = m.reconstruct(np.zeros(20), p, one, [1.0, 2.0, 3.0], np.ones(23))
    assert np.allclose(out, ref, atol=1e-10)
    doubled = m.back_transform(np.full(20, 0.5), p, one, start_temps=[np.sqrt(2), 2 * np.sqrt(2),
                                                                      3 * np.sqrt(2)],
                               w_hat=np.full(23, 2.0))
    assert np.allclose(doubled, np.sqrt(2) * ref, atol=1e-10)


def test_save_load_margins(fitted, tmp_path):
    _, _, fit = fitted
    m.save_margins(tmp_path / "m.txt", fit.params)
    p = m.load_margins(tmp_path / "m.txt")
    assert np.array_equal(p.beta, fit.params.beta) and np.array_equal(p.eta, fit.params.eta)
    assert np.array_equal(p.std.center, fit.params.std.center)
    assert np.array_equal(p.weights.coef, fit.params.weights.coef)
    assert np.array_equal(p.start_coef, fit.params.start_coef)


def test_start_values_warn_on_extrapolation(fitted):
    st, temps, fit = fitted
    inside = st.subset([0])
    np.testing.assert_allclose(m.start_values(fit.params, inside),
                               fit.params.start_coef @ np.r_[1.0, fit.params.std.apply(inside)[0]])
    far = Stations(("far",), [st.lon.mean()], [st.lat.mean()], [st.elev.mean() + 10 * st.elev.std()])
    with pytest.warns(RuntimeWarning, match="extrapolate"):
        m.start_values(fit.params, far)
