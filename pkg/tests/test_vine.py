import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oracles import gaussian_copula_logdensity, gaussian_specs, random_correlation, random_structure
from spatialvine import bicop, vine
from spatialvine._common import DomainError
from spatialvine.bicop import PairCopula
from spatialvine.vine import RVineStructure, VineEdge, edge


def test_edge_normalizes_order():
    e = VineEdge((3, 1), (2,))
    assert e.conditioned == (1, 3) and e.level == 2
    with pytest.raises(DomainError):
        VineEdge((1, 1))
    with pytest.raises(DomainError):
        VineEdge((1, 2), (1,))


@pytest.mark.parametrize("d,k,n", [(54, 10, 485), (5, 4, 10), (8, 3, 18), (4, 10, 6)])
def test_num_edges(d, k, n):
    assert vine.num_edges(d, k) == n


def test_num_parameters_counts_student_t_twice():
    specs = [PairCopula(bicop.STUDENT_T, 0.2, 5.0), PairCopula(bicop.GAUSSIAN, 0.1),
             PairCopula(bicop.INDEPENDENCE)]
    assert vine.num_parameters(specs) == 3


def test_validate_rejects_proximity_violation():
    good = RVineStructure(3, ((edge(0, 1), edge(1, 2)), (edge(0, 2, 1),)))
    assert vine.validate(good).ok
    bad = RVineStructure(3, ((edge(0, 1), edge(1, 2)), (edge(1, 2, 0),)))
    assert not vine.validate(bad).ok
    cyc = RVineStructure(3, ((edge(0, 1), edge(1, 2), edge(0, 2)),))
    assert not vine.validate(cyc).ok


@given(seed=st.integers(0, 10_000), d=st.integers(3, 7))
@settings(max_examples=25, deadline=None)
def test_random_structures_validate(seed, d):
    s = random_structure(d, np.random.default_rng(seed))
    assert vine.validate(s).ok
    assert len(s.edges) == vine.num_edges(d, d - 1)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_gaussian_vine_matches_mvn_copula(d):
    rng = np.random.default_rng(d)
    R = random_correlation(d, rng)
    s = random_structure(d, rng)
    U = rng.uniform(0.02, 0.98, size=(50, d))
    ref = gaussian_copula_logdensity(R, U).sum()
    assert vine.loglik(s, gaussian_specs(s, R), U) == pytest.approx(ref, abs=1e-6)


def test_simulate_reproduces_gaussian_correlation():
    rng = np.random.default_rng(7)
    R = random_correlation(4, rng)
    s = random_structure(4, rng)
    U = vine.simulate(s, gaussian_specs(s, R), 20000, seed=1)
    C = np.corrcoef(stats.norm.ppf(U).T)
    assert np.max(np.abs(C - R)) < 0.03


def test_simulate_is_seeded():
    rng = np.random.default_rng(2)
    R = random_correlation(3, rng)
    s = random_structure(3, rng)
    sp = gaussian_specs(s, R)
    assert np.array_equal(vine.simulate(s, sp, 10, seed=5), vine.simulate(s, sp, 10, seed=5))


def test_pseudo_obs_tree2_is_conditional_normal():
    rng = np.random.default_rng(3)
    R = random_correlation(3, rng)
    s = RVineStructure(3, ((edge(0, 1), edge(1, 2)), (edge(0, 2, 1),)))
    U = rng.uniform(0.05, 0.95, size=(20, 3))
    po = vine.pseudo_obs(s, gaussian_specs(s, R), U)
    X = stats.norm.ppf(U)
    ref = stats.norm.cdf((X[:, 0] - R[0, 1] * X[:, 1]) / np.sqrt(1 - R[0, 1] ** 2))
    assert np.allclose(po[(0, frozenset({1}))], ref, atol=1e-10)


def test_sequential_fit_and_select_recover_structure():
    rng = np.random.default_rng(5)
    R = np.array([[1, .8, .5, .3], [.8, 1, .6, .4], [.5, .6, 1, .7], [.3, .4, .7, 1]])
    s = random_structure(4, rng)
    U = vine.simulate(s, gaussian_specs(s, R), 3000, seed=3)
    fitted = vine.sequential_fit(s, U, candidates=[bicop.GAUSSIAN])
    for e, pc in fitted.items():
        assert pc.theta == pytest.approx(gaussian_specs(s, R)[e].theta, abs=0.05)
    sel = vine.select_vine(U, 3, candidates=[bicop.GAUSSIAN])
    assert vine.validate(sel.structure).ok
    assert {e.conditioned for e in sel.structure.trees[0]} == {(0, 1), (1, 2), (2, 3)}


def test_select_vine_truncation():
    U = np.random.default_rng(0).uniform(size=(200, 6))
    sel = vine.select_vine(U, 2, candidates=[bicop.GAUSSIAN])
    assert len(sel.structure.edges) == vine.num_edges(6, 2)


def test_append_leaf_conditional_cdf_matches_normal():
    rng = np.random.default_rng(8)
    R = random_correlation(4, rng)
    base = RVineStructure(3, ((edge(0, 1), edge(1, 2)), (edge(0, 2, 1),)))
    specs = gaussian_specs(base, R)
    e1, e2 = edge(1, 3), edge(0, 3, 1)
    r1 = R[1, 3]
    ext = [(e1, PairCopula(bicop.GAUSSIAN, r1)),
           (e2, PairCopula(bicop.GAUSSIAN, gaussian_specs(
               RVineStructure(4, ((e1,), (e2,))), R)[e2].theta))]
    rv = vine.append_leaf(base, specs, ext)
    assert vine.validate(rv.structure).ok
    row = np.array([0.3, 0.6, 0.8])
    x = stats.norm.ppf(row)[[1, 0]]
    S = R[np.ix_([1, 0], [1, 0])]
    c = R[[1, 0], 3]
    w = np.linalg.solve(S, c)
    m, sd = w @ x, np.sqrt(1 - c @ w)
    for u in (0.1, 0.5, 0.93):
        ref = stats.norm.cdf((stats.norm.ppf(u) - m) / sd)
        assert vine.conditional_cdf(rv, u, row) == pytest.approx(ref, abs=1e-6)
        q = vine.conditional_quantile(rv, ref, row)
        assert q == pytest.approx(u, abs=1e-8)
        dens = stats.norm.pdf(stats.norm.ppf(u), m, sd) / stats.norm.pdf(stats.norm.ppf(u))
        assert vine.conditional_density(rv, u, row) == pytest.approx(dens, rel=1e-6)


def test_append_leaf_rejects_bad_nesting():
    base = RVineStructure(3, ((edge(0, 1), edge(1, 2)), (edge(0, 2, 1),)))
    g = PairCopula(bicop.GAUSSIAN, 0.3)
    with pytest.raises(vine.NestingError):
        vine.append_leaf(base, {}, [(edge(1, 3), g), (edge(0, 3, 2), g)])


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    R = random_correlation(4, rng)
    s = random_structure(4, rng)
    sp = gaussian_specs(s, R)
    sp[s.trees[0][0]] = PairCopula(bicop.STUDENT_T, 0.4, 7.5)
    vine.save_vine(tmp_path / "v.txt", s, sp)
    rv = vine.load_vine(tmp_path / "v.txt")
    assert rv.structure == s
    assert rv.specs == sp


def test_to_matrix_has_all_variables():
    s = random_structure(5, np.random.default_rng(4))
    M = vine.to_matrix(s)
    assert sorted(np.diag(M)) == list(range(5))
