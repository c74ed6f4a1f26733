import numpy as np
import pytest
from scipy import integrate, stats

from oracles import partial_correlation
from spatialvine import bicop, vine
from spatialvine import spatial_cvine as cv
from spatialvine._common import DomainError
from spatialvine.bicop import PairCopula
from spatialvine.stations import Stations

B1 = np.array([2.251, -0.299, -0.022])


def cluster_stations(seed=3):
    rng = np.random.default_rng(seed)
    centers = [(8, 46), (12, 49), (9, 52)]
    lon = np.concatenate([c[0] + rng.uniform(-0.4, 0.4, 4) for c in centers])
    lat = np.concatenate([c[1] + rng.uniform(-0.3, 0.3, 4) for c in centers])
    return Stations(tuple(range(12)), lon, lat, rng.uniform(100, 1200, 12)), rng


def cluster_t_data(st, rng, n, nu=6.0, beta=B1):
    """Multivariate t per cluster with tanh-linear Kendall's tau in log geometry."""
    D, E = cv.station_geometry(st)
    U = np.empty((n, len(st)))
    for c in range(len(st) // 4):
        idx = np.arange(4 * c, 4 * c + 4)
        R = np.eye(4)
        for a in range(4):
            for b in range(a + 1, 4):
                i, j = idx[a], idx[b]
                h = beta @ [1, np.log(D[i, j]), np.log(max(E[i, j], 1))]
                R[a, b] = R[b, a] = np.sin(np.pi / 2 * np.tanh(h))
        Z = rng.multivariate_normal(np.zeros(4), R, n)
        W = rng.chisquare(nu, n) / nu
        U[:, idx] = stats.t.cdf(Z / np.sqrt(W)[:, None], nu)
    return U


@pytest.fixture(scope="module")
def clusters():
    st, rng = cluster_stations()
    U = cluster_t_data(st, rng, 600)
    D, E = cv.station_geometry(st)
    triples, w = cv.build_components(D)
    comps = cv.fit_cvm(U, triples, candidates=[bicop.STUDENT_T])
    return st, U, D, E, triples, w, comps


def test_kind_counts():
    counts = {k.value: cv.kind_param_count(k) for k in cv.ReparamKind}
    assert counts == {"full": 24, "dist": 15, "d0": 9, "elev": 15, "e0": 9, "de": 12, "select": 16}
    p = cv.SCVMParams("select", np.zeros(13), np.zeros(3))
    assert p.size == 16 and list(map(len, (p.tree(1), p.tree(2), p.tree(3)))) == [3, 4, 6]
    with pytest.raises(DomainError):
        cv.SCVMParams("select", np.zeros(12), np.zeros(3))


def test_four_stations_complete_membership():
    st = Stations(tuple("abcd"), [10, 10.5, 11, 10.2], [50, 50.3, 49.8, 49.5], [1, 2, 3, 4])
    triples, w = cv.build_components(st)
    assert np.all(w.counts == 4) and np.allclose(w.weights, 0.25)
    for t in triples:
        assert set(t.members) == set(range(4))
    with pytest.raises(DomainError):
        cv.build_components(st.subset([0, 1, 2]))


def test_line_neighbors_tie_break():
    lon = 10 + 0.1 * np.arange(7)
    st = Stations(tuple(range(7)), lon, np.full(7, 50.0), np.zeros(7))
    triples, w = cv.build_components(st)
    assert triples[3] == cv.NeighborTriple(3, 2, 4, 1)
    assert np.sum(w.weights * w.counts) == pytest.approx(7)


def test_triples_ordered_by_distance():
    rng = np.random.default_rng(0)
    st = Stations(tuple(range(54)), rng.uniform(6, 15, 54), rng.uniform(47, 55, 54), np.zeros(54))
    D, _ = cv.station_geometry(st)
    triples, w = cv.build_components(D)
    assert len(triples) * len(cv.SLOTS) == 324
    for t in triples:
        ds = [D[t.s, x] for x in (t.p, t.q, t.r)]
        assert ds == sorted(ds) and len(set(t.members)) == 4
        assert min(np.delete(D[t.s], [t.s, t.p, t.q, t.r])) >= ds[-1]


def test_composite_loglik_matches_disjoint_vines(clusters):
    _, U, D, E, triples, w, comps = clusters
    disjoint = [comps[0], comps[4], comps[8]]
    assert len({m for c in disjoint for m in c.triple.members}) == 12
    ref = 0.0
    for c in disjoint:
        rv = cv.component_vine(c)
        ref += vine.loglik(rv.structure, rv.specs, U[:, list(c.triple.members)])
    assert cv.composite_loglik(disjoint, np.ones(12), U) == pytest.approx(ref, abs=1e-10)


def test_composite_loglik_linear_in_weights(clusters):
    _, U, _, _, _, w, comps = clusters
    one = cv.composite_loglik(comps, w, U)
    assert cv.composite_loglik(comps, 2 * w.weights, U) == pytest.approx(2 * one, rel=1e-12)
    ind = [cv.CVineComponent(c.triple, [PairCopula(bicop.INDEPENDENCE)] * 6) for c in comps]
    assert cv.composite_loglik(ind, w, U) == 0.0


def test_shared_tree1_edges_identical(clusters):
    _, _, _, _, _, _, comps = clusters
    seen = {}
    for c in comps:
        for k, (a, b) in enumerate(c.slot_pairs()[:3]):
            pc = c.copulas[k] if a < b else bicop.swap(c.copulas[k])
            key = (min(a, b), max(a, b))
            if key in seen:
                assert seen[key] == pc
            seen[key] = pc


@pytest.mark.slow
def test_cvm_theta_recovery():
    # 4-station clusters; component copulas are t with partial correlations and nu + |D| dof.
    # Pooled over replications, at least 95% of the estimates must land within 0.05.
    nu, errs = 6.0, []
    for seed in range(5, 13):
        st, rng = cluster_stations(seed)
        st = st.subset([0, 1, 2, 3])
        D, E = cv.station_geometry(st)
        R = np.eye(4)
        for a in range(4):
            for b in range(a + 1, 4):
                h = B1 @ [1, np.log(D[a, b]), np.log(max(E[a, b], 1))]
                R[a, b] = R[b, a] = np.sin(np.pi / 2 * np.tanh(h))
        Z = rng.multivariate_normal(np.zeros(4), R, 2000)
        U = stats.t.cdf(Z / np.sqrt(rng.chisquare(nu, 2000) / nu)[:, None], nu)
        triples, _ = cv.build_components(D)
        comps = cv.fit_cvm(U, triples, candidates=[bicop.STUDENT_T])
        for c in comps:
            s, p, q, r = c.triple.members
            truth = [R[s, p], R[s, q], R[s, r], partial_correlation(R, p, q, (s,)),
                     partial_correlation(R, p, r, (s,)), partial_correlation(R, q, r, (s, p))]
            errs.append(np.abs(np.array([pc.theta for pc in c.copulas]) - truth))
    errs = np.array(errs)
    assert np.all(errs[:, :3] <= 0.05)
    assert np.mean(errs <= 0.05) >= 0.95


def test_cvm_independence_data():
    U = np.random.default_rng(1).uniform(size=(400, 5))
    st = Stations(tuple(range(5)), [10, 10.5, 11, 10.2, 10.8], [50, 50.3, 49.8, 49.5, 50.9], np.zeros(5))
    triples, w = cv.build_components(st)
    comps = cv.fit_cvm(U, triples, alpha=0.001)
    assert all(pc.kind == bicop.Kind.INDEPENDENCE for c in comps for pc in c.copulas)
    assert cv.composite_loglik(comps, w, U) == 0.0
    assert cv.cvm_param_count(comps) == 0


def test_cvm_param_count_counts_shared_pairs_once(clusters):
    _, _, _, _, triples, _, comps = clusters
    pairs = {(min(t.s, j), max(t.s, j)) for t in triples for j in (t.p, t.q, t.r)}
    n_t = sum(1 for c in comps for pc in c.copulas[3:] if pc.kind == bicop.Kind.STUDENT_T)
    assert cv.cvm_param_count(comps) == 2 * len(pairs) + 2 * n_t


def test_model_h_select_examples():
    g = cv.SlotGeometry(100.0, 50.0)
    assert cv.model_h_select("select", 1, g, B1) == pytest.approx(
        2.251 - 0.299 * np.log(100) - 0.022 * np.log(50), abs=1e-12)
    assert cv.model_h_select("select", 1, g, B1) == pytest.approx(0.788, abs=5e-4)
    assert cv.model_h_select("select", 1, g, np.zeros(3)) == 0.0
    g1 = cv.SlotGeometry(80.0, 10.0, (30.0,), (60.0,), (5.0,), (7.0,))
    g2 = cv.SlotGeometry(80.0, 10.0, (300.0,), (9.0,), (50.0,), (70.0,))
    b = [0.3, -0.2]
    assert cv.model_h_select("d0", 2, g1, b) == cv.model_h_select("d0", 2, g2, b)
    assert cv.model_h_select("dist", 2, g1, [0.3, -0.2, 0.1, 0.1]) != cv.model_h_select(
        "dist", 2, g2, [0.3, -0.2, 0.1, 0.1])
    with pytest.raises(DomainError):
        cv.model_h_select("select", 3, g1, np.zeros(6))
    with pytest.raises(DomainError):
        cv.model_h_select("select", 2, g1, np.zeros(3))


def test_design_row_sizes():
    geoms = {1: cv.SlotGeometry(50.0, 10.0), 2: cv.SlotGeometry(50.0, 10.0, (20.0,), (30.0,), (1.0,), (2.0,)),
             3: cv.SlotGeometry(50.0, 10.0, (20.0, 25.0), (30.0, 35.0), (1.0, 0.0), (2.0, 3.0))}
    for kind in cv.ReparamKind:
        for l in (1, 2, 3):
            assert cv.design_row(kind, l, geoms[l]).size == cv.KIND_SIZES[kind][l - 1]


def test_model_nu_scvm():
    assert cv.model_nu_scvm(2, 3.7, [np.log(8), 0, 0]) == pytest.approx(8.0)
    v = cv.model_nu_scvm(1, 1.0, [0.404, 0.015, 0.271])
    assert 2.0 < v <= 2.0 + 1e-5
    nus = [cv.model_nu_scvm(2, d, [1.0, 0.1, 0.3]) for d in np.linspace(0, 5, 20)]
    assert np.all(np.diff(nus) >= 0)


def test_scvm_fit_improves(clusters):
    _, U, D, E, triples, w, comps = clusters
    geom = cv.build_geometry("select", triples, D, E)
    lay = cv.layout_from_components(comps)
    s0 = cv.start_values(comps, geom)
    assert s0.size == 16
    est, fr = cv.fit_scvm(U, geom, lay, w, s0, maxiter=15)
    assert fr.loglik >= fr.start_loglik
    assert fr.loglik == pytest.approx(cv.scvm_loglik(est, geom, lay, w, U), rel=1e-9)


@pytest.mark.parametrize("kind", [k.value for k in cv.ReparamKind])
def test_every_kind_evaluates(clusters, kind):
    _, U, D, E, triples, w, comps = clusters
    geom = cv.build_geometry(kind, triples, D, E)
    lay = cv.layout_from_components(comps)
    s0 = cv.start_values(comps, geom)
    assert s0.size == cv.kind_param_count(kind)
    assert np.isfinite(cv.scvm_loglik(s0, geom, lay, w, U))


def test_prediction_vine(clusters):
    st, U, *_ = clusters
    params = cv.SCVMParams("select", np.r_[B1, 0.5, -0.1, 0, 0, 0.2, -0.05, 0, 0, 0, 0], [np.log(6), 0, 0])
    pv = cv.prediction_vine((8.05, 46.1, 400.0), st, params)
    assert set(pv.neighbors) <= {0, 1, 2, 3}
    val, _ = integrate.quad(lambda u: pv.density(u, U[0]), 0, 1, limit=200)
    assert val == pytest.approx(1.0, abs=1e-3)
    x = pv.draws(U[0], 400, seed=1)
    assert np.array_equal(x, pv.draws(U[0], 400, seed=1))
    assert pv.draws(U[:3], 5, seed=0).shape == (3, 5)
    assert np.mean(pv.draws(np.full(12, 0.95), 1000, seed=2)) > 0.5
    zero = cv.SCVMParams("select", np.zeros(13), [np.log(6), 0, 0])
    ind = cv.prediction_vine((8.05, 46.1, 400.0), st, zero, family=bicop.GAUSSIAN)
    assert stats.kstest(ind.draws(U[0], 2000, seed=3), "uniform").pvalue > 0.01
    x0, _ = cv.predict_cvine((8.05, 46.1, 400.0), st, params, U[0], 50, seed=3)
    assert x0.shape == (50,)


def test_save_load_scvm(clusters, tmp_path):
    _, _, D, E, triples, _, comps = clusters
    lay = cv.layout_from_components(comps)
    params = cv.SCVMParams("select", np.arange(13) / 10, [1.0, 0.1, 0.2])
    cv.save_scvm(tmp_path / "s.txt", triples, lay, params, scale=50.0)
    t2, l2, p2, meta = cv.load_scvm(tmp_path / "s.txt")
    assert t2 == triples and l2 == lay
    assert np.array_equal(p2.to_vector(), params.to_vector()) and p2.kind == params.kind
    assert meta["nu_distance_scale"] == 50.0
