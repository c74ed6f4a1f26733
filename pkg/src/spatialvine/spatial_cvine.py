"""Composite vine model built from neighbor C-vines.

Every station ``s`` heads a 4-dim C-vine over ``(s, p, q, r)``, its three
nearest neighbors in increasing distance. The C-vine has roots ``s`` then
``p`` then ``q``, giving six pair copulas in the slot order

    sp, sq, sr, pq|s, pr|s, qr|sp.

The composite log-likelihood is ``sum_s w_s l_s`` with ``w_s = 1/n_s`` and
``n_s`` the number of C-vines containing ``s``. Tree-1 pairs shared by two
components share one copula.

The spatial version models Kendall's tau of each slot as ``tanh`` of a
linear form in log distances and/or log elevation differences. A slot on
tree ``l`` links a non-root variable ``j`` to the tree root ``o`` given the
earlier roots ``D``; the available predictors are ``ln d(j, o)`` plus, for
the ``dist``/``elev``/``full`` kinds, the logs of ``d(j, x)`` and
``d(o, x)`` for ``x`` in ``D``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize

from . import bicop, vine
from ._common import DomainError, FitResult, clamp_nu
from .bicop import CopulaFamily, Kind, PairCopula
from .stations import EARTH_RADIUS_KM, Stations, distance_matrix, haversine
from .vine import RVine, RVineStructure, VineEdge

SLOTS = ("sp", "sq", "sr", "pq|s", "pr|s", "qr|sp")
SLOT_LEVEL = (1, 1, 1, 2, 2, 3)
ELEV_GUARD_M = 1.0
DIST_FLOOR_KM = 1e-3
TAU_CLAMP = 0.98
NU_DIST_SCALE_KM = 100.0
TIE_DECIMALS = 9


class ReparamKind(str, Enum):
    FULL = "full"
    DIST = "dist"
    D0 = "d0"
    ELEV = "elev"
    E0 = "e0"
    DE = "de"
    SELECT = "select"


# per-tree coefficient counts (excluding the 3 ν coefficients)
KIND_SIZES = {
    ReparamKind.FULL: (3, 7, 11),
    ReparamKind.DIST: (2, 4, 6),
    ReparamKind.D0: (2, 2, 2),
    ReparamKind.ELEV: (2, 4, 6),
    ReparamKind.E0: (2, 2, 2),
    ReparamKind.DE: (3, 3, 3),
    ReparamKind.SELECT: (3, 4, 6),
}


def kind_param_count(kind) -> int:
    """Free parameters of a reparametrization including the ν model."""
    return sum(KIND_SIZES[ReparamKind(kind)]) + 3


@dataclass(frozen=True)
class NeighborTriple:
    s: int
    p: int
    q: int
    r: int

    @property
    def members(self) -> tuple:
        return (self.s, self.p, self.q, self.r)


@dataclass(frozen=True)
class CompositeWeights:
    counts: np.ndarray
    weights: np.ndarray


@dataclass
class CVineComponent:
    """One neighbor C-vine; tree-1 copulas are oriented as (u_s, u_j)."""

    triple: NeighborTriple
    copulas: list = field(default_factory=list)

    def slot_pairs(self):
        s, p, q, r = self.triple.members
        return [(s, p), (s, q), (s, r), (p, q), (p, r), (q, r)]


def nearest_triple(dist_row, exclude: int | None = None) -> tuple:
    """Indices of the three nearest stations; ties go to the smaller index.

    Distances equal to within 1e-9 km count as ties so that rounding in
    the great-circle formula does not decide the order.
    """
    d = np.round(np.asarray(dist_row, dtype=float), TIE_DECIMALS)
    idx = [i for i in range(d.size) if i != exclude]
    idx.sort(key=lambda i: (d[i], i))
    if len(idx) < 3:
        raise DomainError("need at least three neighbor candidates")
    return tuple(idx[:3])


def build_components(stations_or_dist):
    """Neighbor triples of every station plus composite weights.

    Accepts a :class:`Stations` table or a precomputed distance matrix.
    """
    D = (distance_matrix(stations_or_dist) if isinstance(stations_or_dist, Stations)
         else np.asarray(stations_or_dist, dtype=float))
    d = D.shape[0]
    if d < 4:
        raise DomainError("the composite model needs at least 4 stations")
    triples = [NeighborTriple(s, *nearest_triple(D[s], exclude=s)) for s in range(d)]
    counts = np.zeros(d, dtype=int)
    for t in triples:
        for m in t.members:
            counts[m] += 1
    return triples, CompositeWeights(counts, 1.0 / counts)


def _oriented(pc: PairCopula, a: int, b: int) -> PairCopula:
    """Copula stored for (min, max) viewed with arguments (u_a, u_b)."""
    return pc if a < b else bicop.swap(pc)


def _tree1_terms(comps, data, need_pdf=True):
    """Tree-1 terms per unordered pair: (logpdf, C(max|min), C(min|max))."""
    cache = {}
    for c in comps:
        s = c.triple.s
        for k, j in enumerate((c.triple.p, c.triple.q, c.triple.r)):
            key = (min(s, j), max(s, j))
            if key in cache:
                continue
            pc = _oriented(c.copulas[k], s, j)  # now oriented (min, max)
            cache[key] = bicop.edge_terms(pc, data[:, key[0]], data[:, key[1]], want_pdf=need_pdf)
    return cache


def _h_from_cache(cache, a, b):
    """C(b | a) from the tree-1 cache."""
    lp, h_lo_given_hi, h_hi_given_lo = cache[(min(a, b), max(a, b))]
    return h_hi_given_lo if a < b else h_lo_given_hi


def component_loglik(comp: CVineComponent, data, cache=None) -> np.ndarray:
    """Pointwise 4-dim C-vine log-density of one component."""
    data = np.asarray(data, dtype=float)
    cache = cache if cache is not None else _tree1_terms([comp], data)
    s, p, q, r = comp.triple.members
    ll = sum(cache[(min(s, j), max(s, j))][0] for j in (p, q, r))
    hp, hq, hr = (_h_from_cache(cache, s, j) for j in (p, q, r))
    lp_pq, _, h_q_ps = bicop.edge_terms(comp.copulas[3], hp, hq)
    lp_pr, _, h_r_ps = bicop.edge_terms(comp.copulas[4], hp, hr)
    lp_qr, _, _ = bicop.edge_terms(comp.copulas[5], h_q_ps, h_r_ps, want_h=False)
    return ll + lp_pq + lp_pr + lp_qr


def composite_loglik(components, weights, copula_data, per_component: bool = False):
    """Weighted composite log-likelihood ``sum_s w_s l_s``.

    ``weights`` is a :class:`CompositeWeights` or an array indexed by the
    heading station.
    """
    data = np.asarray(copula_data, dtype=float)
    w = weights.weights if isinstance(weights, CompositeWeights) else np.asarray(weights, dtype=float)
    cache = _tree1_terms(components, data)
    lls = np.array([np.sum(component_loglik(c, data, cache)) for c in components])
    total = float(sum(w[c.triple.s] * v for c, v in zip(components, lls)))
    return (total, lls) if per_component else total


def component_vine(comp: CVineComponent) -> RVine:
    """The component as a 4-dim R-vine on variables 0..3 = (s, p, q, r)."""
    E = VineEdge
    trees = ((E((0, 1)), E((0, 2)), E((0, 3))), (E((1, 2), (0,)), E((1, 3), (0,))), (E((2, 3), (0, 1)),))
    st = RVineStructure(4, trees)
    edges = [trees[0][0], trees[0][1], trees[0][2], trees[1][0], trees[1][1], trees[2][0]]
    return RVine(st, dict(zip(edges, comp.copulas)))


def fit_cvm(copula_data, triples, candidates=None, alpha: float = 0.05) -> list:
    """Sequential family selection and estimation per component.

    Tree-1 pairs are fitted once and shared between the components that
    contain them.
    """
    data = np.asarray(copula_data, dtype=float)
    shared = {}
    for t in triples:
        for j in (t.p, t.q, t.r):
            key = (min(t.s, j), max(t.s, j))
            if key not in shared:
                shared[key] = bicop.select_family(data[:, key[0]], data[:, key[1]], candidates, alpha)
    comps = []
    for t in triples:
        s, p, q, r = t.members
        c1 = [_oriented(shared[(min(s, j), max(s, j))], s, j) for j in (p, q, r)]
        hs = [bicop.hfunc2(pc, data[:, s], data[:, j]) for pc, j in zip(c1, (p, q, r))]
        pq = bicop.select_family(hs[0], hs[1], candidates, alpha)
        pr = bicop.select_family(hs[0], hs[2], candidates, alpha)
        h_q = bicop.hfunc2(pq, hs[0], hs[1])
        h_r = bicop.hfunc2(pr, hs[0], hs[2])
        qr = bicop.select_family(h_q, h_r, candidates, alpha)
        comps.append(CVineComponent(t, c1 + [pq, pr, qr]))
    return comps


def cvm_param_count(components) -> int:
    """Parameter count of a fitted CVM, counting each shared tree-1 pair once."""
    seen, n = set(), 0
    for c in components:
        for k, (a, b) in enumerate(c.slot_pairs()):
            if k < 3:
                key = (min(a, b), max(a, b))
                if key in seen:
                    continue
                seen.add(key)
            n += bicop.nparams(c.copulas[k])
    return n


# ---------------------------------------------------------------------------
# spatial reparametrization


@dataclass(frozen=True)
class SlotGeometry:
    """Distances (km) and elevation differences (m) of one slot.

    ``jD``/``oD`` list the distances from ``j``/``o`` to the earlier roots.
    """

    d_jo: float
    e_jo: float
    d_jD: tuple = ()
    d_oD: tuple = ()
    e_jD: tuple = ()
    e_oD: tuple = ()


def slot_geometry(j: int, o: int, D, dist, elevdiff) -> SlotGeometry:
    D = tuple(D)
    return SlotGeometry(dist[j, o], elevdiff[j, o], tuple(dist[j, x] for x in D),
                        tuple(dist[o, x] for x in D), tuple(elevdiff[j, x] for x in D),
                        tuple(elevdiff[o, x] for x in D))


def _ld(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("distances must be nonnegative")
    return np.log(np.maximum(x, DIST_FLOOR_KM))


def _le(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("elevation differences must be nonnegative")
    return np.log(np.maximum(x, ELEV_GUARD_M))


def design_row(kind, tree: int, g: SlotGeometry) -> np.ndarray:
    """Predictor row for one slot under ``kind`` (intercept first)."""
    kind = ReparamKind(kind)
    if tree not in (1, 2, 3):
        raise DomainError("tree must be 1, 2 or 3")
    if len(g.d_jD) != tree - 1:
        raise DomainError(f"tree {tree} geometry needs {tree - 1} conditioning distances")
    dist_form = [_ld(g.d_jo), *_ld(g.d_jD), *_ld(g.d_oD)]
    elev_form = [_le(g.e_jo), *_le(g.e_jD), *_le(g.e_oD)]
    if kind == ReparamKind.FULL:
        x = dist_form + elev_form
    elif kind == ReparamKind.DIST:
        x = dist_form
    elif kind == ReparamKind.ELEV:
        x = elev_form
    elif kind == ReparamKind.D0:
        x = [_ld(g.d_jo)]
    elif kind == ReparamKind.E0:
        x = [_le(g.e_jo)]
    elif kind == ReparamKind.DE:
        x = [_ld(g.d_jo), _le(g.e_jo)]
    else:  # select: tree 1 in de-form, trees 2-3 in dist-form
        x = [_ld(g.d_jo), _le(g.e_jo)] if tree == 1 else dist_form
    row = np.array([1.0, *x])
    assert row.size == KIND_SIZES[kind][tree - 1]
    return row


def model_h_select(kind, tree: int, geometry: SlotGeometry, beta_tree) -> float:
    """Linear predictor of one slot."""
    row = design_row(kind, tree, geometry)
    beta_tree = np.asarray(beta_tree, dtype=float)
    if beta_tree.size != row.size:
        raise DomainError(f"{ReparamKind(kind).value} tree {tree} needs {row.size} coefficients")
    return float(row @ beta_tree)


def model_nu_scvm(tree: int, d_scaled: float, beta_nu) -> float:
    """``exp(c0 + c1 l + c2 d)`` on scaled distance, clamped to (2, 100]."""
    if tree not in (1, 2, 3):
        raise DomainError("tree must be 1, 2 or 3")
    b = np.asarray(beta_nu, dtype=float)
    return clamp_nu(float(np.exp(b[0] + b[1] * tree + b[2] * d_scaled)))


@dataclass
class SCVMParams:
    """Coefficients grouped by tree plus the ν-model coefficients."""

    kind: ReparamKind
    beta: np.ndarray
    beta_nu: np.ndarray

    def __post_init__(self):
        self.kind = ReparamKind(self.kind)
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        self.beta_nu = np.asarray(self.beta_nu, dtype=float).ravel()
        if self.beta.size != sum(KIND_SIZES[self.kind]) or self.beta_nu.size != 3:
            raise DomainError(f"{self.kind.value} needs {sum(KIND_SIZES[self.kind])} + 3 coefficients")

    def tree(self, l: int) -> np.ndarray:
        sizes = KIND_SIZES[self.kind]
        a = sum(sizes[: l - 1])
        return self.beta[a:a + sizes[l - 1]]

    @property
    def size(self) -> int:
        return self.beta.size + 3

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.beta_nu])

    @classmethod
    def from_vector(cls, kind, x) -> "SCVMParams":
        x = np.asarray(x, dtype=float)
        return cls(kind, x[:-3], x[-3:])


def _slot_roles(t: NeighborTriple):
    """(j, o, D) per slot."""
    s, p, q, r = t.members
    return [(p, s, ()), (q, s, ()), (r, s, ()), (q, p, (s,)), (r, p, (s,)), (r, q, (s, p))]


@dataclass
class SCVMGeometry:
    """Design matrices of all slots for a fixed set of triples."""

    kind: ReparamKind
    triples: list
    X: list  # per tree: (n_slots_l, p_l)
    index: list  # per tree: list of (component, slot)
    d_jo: list  # per tree: (n_slots_l,) km
    dist: np.ndarray
    elevdiff: np.ndarray


def build_geometry(kind, triples, dist, elevdiff) -> SCVMGeometry:
    kind = ReparamKind(kind)
    X, index, djo = [[], [], []], [[], [], []], [[], [], []]
    for ci, t in enumerate(triples):
        for k, (j, o, D) in enumerate(_slot_roles(t)):
            l = SLOT_LEVEL[k]
            X[l - 1].append(design_row(kind, l, slot_geometry(j, o, D, dist, elevdiff)))
            index[l - 1].append((ci, k))
            djo[l - 1].append(dist[j, o])
    return SCVMGeometry(kind, list(triples), [np.array(x) for x in X], index,
                        [np.array(x) for x in djo], dist, elevdiff)


def station_geometry(stations: Stations, radius: float = EARTH_RADIUS_KM):
    D = distance_matrix(stations, radius)
    np.fill_diagonal(D, 0.0)
    E = np.abs(stations.elev[:, None] - stations.elev[None, :])
    return D, E


def modal_family(layout) -> CopulaFamily:
    fams = [f for comp in layout for f in comp if f.kind != Kind.INDEPENDENCE]
    if not fams:
        return bicop.GAUSSIAN
    counts = Counter(fams)
    order = {f: k for k, f in enumerate(bicop.DEFAULT_CANDIDATES)}
    return min(counts, key=lambda f: (-counts[f], order.get(f, 99), str(f)))


def layout_from_components(components) -> list:
    """Per-component family list with independence replaced by the modal family."""
    raw = [[pc.family for pc in c.copulas] for c in components]
    modal = modal_family(raw)
    return [[modal if f.kind == Kind.INDEPENDENCE else f for f in comp] for comp in raw]


def _copula(family: CopulaFamily, h: float, level: int, d_jo: float, beta_nu, scale: float) -> PairCopula:
    tau = float(np.clip(np.tanh(h), -TAU_CLAMP, TAU_CLAMP))
    if family.kind == Kind.INDEPENDENCE:
        return PairCopula(family)
    if family.kind == Kind.FRANK and tau == 0.0:
        tau = 1e-12
    fam = bicop.absorb_sign(family, tau)
    th = bicop.tau_to_par(fam, tau)
    if fam.kind == Kind.STUDENT_T:
        return PairCopula(fam, th, model_nu_scvm(level, d_jo / scale, beta_nu))
    return PairCopula(fam, th)


def scvm_components(params: SCVMParams, geom: SCVMGeometry, layout, scale: float = NU_DIST_SCALE_KM) -> list:
    """Components whose six copulas are produced by the reparametrization."""
    if params.kind != geom.kind:
        raise DomainError("parameter kind does not match the geometry")
    cops = [[None] * 6 for _ in geom.triples]
    for l in (1, 2, 3):
        h = geom.X[l - 1] @ params.tree(l)
        for (ci, k), hv, d in zip(geom.index[l - 1], h, geom.d_jo[l - 1]):
            cops[ci][k] = _copula(layout[ci][k], hv, l, d, params.beta_nu, scale)
    return [CVineComponent(t, c) for t, c in zip(geom.triples, cops)]


def start_values(components, geom: SCVMGeometry, scale: float = NU_DIST_SCALE_KM,
                 nu_fallback=None) -> SCVMParams:
    """Least-squares start values from a fitted CVM.

    Fisher z of each slot's Kendall's tau is regressed on the tree's design;
    ln ν of the StudentT slots on (1, l, d / scale).
    """
    blocks = []
    for l in (1, 2, 3):
        y = np.array([np.arctanh(np.clip(bicop.par_to_tau(components[ci].copulas[k].family, components[ci].copulas[k].theta), -TAU_CLAMP, TAU_CLAMP))
                      for ci, k in geom.index[l - 1]])
        coef, *_ = np.linalg.lstsq(geom.X[l - 1], y, rcond=None)
        blocks.append(coef)
    rows, lnu = [], []
    for l in (1, 2, 3):
        for (ci, k), d in zip(geom.index[l - 1], geom.d_jo[l - 1]):
            pc = components[ci].copulas[k]
            if pc.kind == Kind.STUDENT_T:
                rows.append([1.0, l, d / scale])
                lnu.append(np.log(pc.nu))
    if len(rows) < 4:
        if nu_fallback is None:
            raise DomainError(f"only {len(rows)} StudentT slots; need 4 for the ν regression")
        beta_nu = np.asarray(nu_fallback, dtype=float)
    else:
        beta_nu, *_ = np.linalg.lstsq(np.array(rows), np.array(lnu), rcond=None)
    return SCVMParams(geom.kind, np.concatenate(blocks), beta_nu)


def scvm_loglik(params: SCVMParams, geom: SCVMGeometry, layout, weights, copula_data,
                scale: float = NU_DIST_SCALE_KM) -> float:
    return composite_loglik(scvm_components(params, geom, layout, scale), weights, copula_data)


def fit_scvm(copula_data, geom: SCVMGeometry, layout, weights, start: SCVMParams,
             scale: float = NU_DIST_SCALE_KM, maxiter: int = 500,
             ftol: float = 1e-6) -> tuple[SCVMParams, FitResult]:
    """Maximize the reparametrized composite log-likelihood."""
    data = np.asarray(copula_data, dtype=float)
    n = data.shape[0]
    kind = geom.kind

    def nll(x):
        try:
            v = scvm_loglik(SCVMParams.from_vector(kind, x), geom, layout, weights, data, scale)
        except (DomainError, FloatingPointError):
            return 1e10
        return -v / n if np.isfinite(v) else 1e10

    x0 = start.to_vector()
    f0 = nll(x0)
    res = optimize.minimize(nll, x0, method="L-BFGS-B",
                            options={"maxiter": maxiter, "ftol": ftol, "gtol": 1e-7})
    x = res.x if res.fun <= f0 else x0
    return SCVMParams.from_vector(kind, x), FitResult(x, -min(res.fun, f0) * n, -f0 * n, bool(res.success),
                                                      str(res.message), int(res.nit))


# ---------------------------------------------------------------------------
# prediction


@dataclass
class CVinePrediction:
    """Prediction C-vine of a new station over its neighbors (p, q, r)."""

    neighbors: tuple
    vine: RVine

    def draws(self, day_rows, n: int = 1000, seed=None) -> np.ndarray:
        """Conditional draws given full training rows ((d,) or (N, d))."""
        rows = np.asarray(day_rows, dtype=float)
        sub = rows[..., list(self.neighbors)]
        rng = np.random.default_rng(seed)
        v = rng.uniform(size=(n,) if rows.ndim == 1 else (rows.shape[0], n))
        return vine.conditional_quantile(self.vine, v, sub)

    def density(self, u, day_row):
        sub = np.asarray(day_row, dtype=float)[..., list(self.neighbors)]
        return vine.conditional_density(self.vine, u, sub)

    def cdf(self, u, day_row):
        sub = np.asarray(day_row, dtype=float)[..., list(self.neighbors)]
        return vine.conditional_cdf(self.vine, u, sub)


def prediction_vine(target, stations: Stations, params: SCVMParams, family: CopulaFamily | None = None,
                    scale: float = NU_DIST_SCALE_KM, radius: float = EARTH_RADIUS_KM) -> CVinePrediction:
    """C-vine with roots ``p`` then ``q`` and the new station ``s`` as leaf.

    Edges: pq, pr, ps; qr|p, qs|p; rs|pq. All slots use ``family``
    (StudentT by default) with parameters from the fitted reparametrization.
    """
    lon, lat, elev = (float(x) for x in target)
    fam = family or bicop.STUDENT_T
    d = len(stations)
    lons, lats = np.append(stations.lon, lon), np.append(stations.lat, lat)
    els = np.append(stations.elev, elev)
    D = haversine(lons[:, None], lats[:, None], lons[None, :], lats[None, :], radius)
    np.fill_diagonal(D, 0.0)
    E = np.abs(els[:, None] - els[None, :])
    s = d
    p, q, r = nearest_triple(D[s, :d])
    kind = params.kind

    def pc(j, o, cond, level):
        h = model_h_select(kind, level, slot_geometry(j, o, cond, D, E), params.tree(level))
        return _copula(fam, h, level, D[j, o], params.beta_nu, scale)

    # local indices 0, 1, 2, 3 = p, q, r, s
    E_ = VineEdge
    base_specs = {E_((0, 1)): pc(q, p, (), 1), E_((0, 2)): pc(r, p, (), 1),
                  E_((1, 2), (0,)): pc(r, q, (p,), 2)}
    base = RVineStructure(3, ((E_((0, 1)), E_((0, 2))), (E_((1, 2), (0,)),)))
    new = [(E_((0, 3)), pc(s, p, (), 1)), (E_((1, 3), (0,)), pc(s, q, (p,), 2)),
           (E_((2, 3), (0, 1)), pc(s, r, (p, q), 3))]
    return CVinePrediction((p, q, r), vine.append_leaf(base, base_specs, new))


def predict_cvine(target, stations: Stations, params: SCVMParams, day_rows, n: int = 1000, seed=None,
                  scale: float = NU_DIST_SCALE_KM):
    """Draws of the new station's copula value and the prediction object."""
    pv = prediction_vine(target, stations, params, scale=scale)
    return pv.draws(day_rows, n, seed), pv


# ---------------------------------------------------------------------------
# persistence


def save_scvm(path, triples, layout, params: SCVMParams, scale: float = NU_DIST_SCALE_KM,
              radius: float = EARTH_RADIUS_KM) -> None:
    """Plain-text SCVM model file (triples, families per slot, coefficients)."""
    lines = ["# spatial composite vine model", f"kind {params.kind.value}", f"nu_distance_scale {float(scale)!r}",
             f"earth_radius {float(radius)!r}", f"slots {' '.join(SLOTS)}"]
    for t, fams in zip(triples, layout):
        lines.append(f"component {t.s} {t.p} {t.q} {t.r} " + " ".join(str(f) for f in fams))
    lines.append("beta " + " ".join(repr(float(x)) for x in params.beta))
    lines.append("beta_nu " + " ".join(repr(float(x)) for x in params.beta_nu))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_scvm(path):
    """Returns (triples, layout, params, info)."""
    triples, layout, info = [], [], {}
    with open(path) as fh:
        for ln in fh:
            if not ln.strip() or ln.startswith("#"):
                continue
            r = ln.split()
            if r[0] == "component":
                triples.append(NeighborTriple(*(int(x) for x in r[1:5])))
                layout.append([bicop.parse_family(f) for f in r[5:11]])
            else:
                info[r[0]] = r[1:]
    params = SCVMParams(info["kind"][0], [float(x) for x in info["beta"]], [float(x) for x in info["beta_nu"]])
    meta = {"nu_distance_scale": float(info["nu_distance_scale"][0]),
            "earth_radius": float(info["earth_radius"][0])}
    return triples, layout, params, meta
