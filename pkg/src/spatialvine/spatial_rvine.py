"""Spatial R-vine: pair-copula parameters as functions of station geometry.

Kendall's tau of every edge is modelled as ``tanh(h_l)`` where ``h_l`` is
linear in log distances:

* tree 1: ``h = b0 + b1 ln d_ij``
* tree l >= 2: ``h = b0 + b1 ln d_ij + b2 ln dbar_a + b3 ln dbar_b``

``dbar`` is the mean distance from a conditioned station to the members of
the conditioning set; the two means enter in increasing order
(``dbar_a <= dbar_b``) so the model does not depend on station labels.
StudentT degrees of freedom follow ``exp(c0 + c1 l + c2 l^2)``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import bicop, vine
from ._common import DomainError, FitResult, clamp_nu
from .bicop import CopulaFamily, Kind, PairCopula
from .stations import EARTH_RADIUS_KM, Stations, distance_matrix, haversine
from .vine import RVine, RVineStructure, VineEdge

ELEV_GUARD_M = 1.0
DIST_FLOOR_KM = 1e-3
TAU_CLAMP = 0.98


class InsufficientStudentTError(DomainError):
    """Too few StudentT edges to regress the degrees of freedom."""


@dataclass(frozen=True)
class SpatialPredictors:
    """Pairwise distances (km) and absolute elevation differences (m)."""

    dist: np.ndarray
    elevdiff: np.ndarray
    elev_guard: float = ELEV_GUARD_M
    radius: float = EARTH_RADIUS_KM

    @property
    def dim(self) -> int:
        return self.dist.shape[0]

    def dbar(self, v: int, D) -> float:
        """Mean distance from ``v`` to the conditioning set ``D``."""
        D = list(D)
        return float(np.mean(self.dist[v, D]))

    def ebar(self, v: int, D) -> float:
        D = list(D)
        return float(np.mean(self.elevdiff[v, D]))

    def log_elev(self, i: int, j: int) -> float:
        return float(np.log(max(self.elevdiff[i, j], self.elev_guard)))


def build_predictors(stations: Stations, radius: float = EARTH_RADIUS_KM,
                     elev_guard: float = ELEV_GUARD_M, allow_duplicates: bool = False) -> SpatialPredictors:
    """Great-circle distances and elevation differences between stations."""
    D = distance_matrix(stations, radius)
    np.fill_diagonal(D, 0.0)
    off = ~np.eye(len(stations), dtype=bool)
    if not allow_duplicates and np.any(D[off] <= 0):
        i, j = np.argwhere((D <= 0) & off)[0]
        raise DomainError(f"stations {stations.ids[i]} and {stations.ids[j]} share coordinates")
    E = np.abs(stations.elev[:, None] - stations.elev[None, :])
    return SpatialPredictors(D, E, elev_guard, radius)


def sv_param_count(trunc: int) -> int:
    """Free parameters of the spatial R-vine with ``trunc`` trees."""
    return 2 + 4 * (trunc - 1) + 3


@dataclass
class SVParams:
    """Tree-wise model coefficients and the ν-model coefficients."""

    beta_dist: np.ndarray
    beta_nu: np.ndarray

    def __post_init__(self):
        self.beta_dist = np.asarray(self.beta_dist, dtype=float).ravel()
        self.beta_nu = np.asarray(self.beta_nu, dtype=float).ravel()
        if self.beta_nu.size != 3:
            raise DomainError("beta_nu needs 3 entries")
        if self.beta_dist.size < 2 or (self.beta_dist.size - 2) % 4:
            raise DomainError("beta_dist must have 2 + 4(k - 1) entries")

    @property
    def trunc(self) -> int:
        return 1 + (self.beta_dist.size - 2) // 4

    def block(self, level: int) -> np.ndarray:
        if level == 1:
            return self.beta_dist[:2]
        k = 2 + 4 * (level - 2)
        return self.beta_dist[k:k + 4]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.beta_dist, self.beta_nu])

    @classmethod
    def from_vector(cls, x) -> "SVParams":
        x = np.asarray(x, dtype=float)
        return cls(x[:-3], x[-3:])

    @property
    def size(self) -> int:
        return self.beta_dist.size + 3


def edge_geometry(e: VineEdge, pred: SpatialPredictors):
    """(d_ij, dbar_a, dbar_b) with the conditioning means sorted."""
    i, j = e.conditioned
    d = max(pred.dist[i, j], DIST_FLOOR_KM)
    if e.level == 1:
        return d, None, None
    a = max(pred.dbar(i, e.conditioning), DIST_FLOOR_KM)
    b = max(pred.dbar(j, e.conditioning), DIST_FLOOR_KM)
    return d, min(a, b), max(a, b)


def model_h_raw(beta, d, dbar_a=None, dbar_b=None) -> float:
    """Linear predictor from raw geometry."""
    beta = np.asarray(beta, dtype=float)
    if d <= 0 or (dbar_a is not None and (dbar_a <= 0 or dbar_b <= 0)):
        raise DomainError("distances must be positive")
    if dbar_a is None:
        return float(beta[0] + beta[1] * np.log(d))
    return float(beta[0] + beta[1] * np.log(d) + beta[2] * np.log(dbar_a) + beta[3] * np.log(dbar_b))


def model_h1(e: VineEdge, beta1, pred: SpatialPredictors) -> float:
    """Tree-1 model function ``b0 + b1 ln d_ij``."""
    return model_h_raw(beta1, edge_geometry(e, pred)[0])


def model_hl(e: VineEdge, betal, pred: SpatialPredictors) -> float:
    """Model function for trees l >= 2."""
    return model_h_raw(betal, *edge_geometry(e, pred))


def model_h(e: VineEdge, params: SVParams, pred: SpatialPredictors) -> float:
    if e.level == 1:
        return model_h1(e, params.block(1), pred)
    return model_hl(e, params.block(e.level), pred)


def model_nu(level: int, beta_nu) -> float:
    """Unclamped ν-model ``exp(c0 + c1 l + c2 l^2)``."""
    b = np.asarray(beta_nu, dtype=float)
    return float(np.exp(b[0] + b[1] * level + b[2] * level * level))


def theta_from_model(h: float, family: CopulaFamily) -> tuple[CopulaFamily, float]:
    """First copula parameter from a linear predictor.

    ``tau = tanh(h)`` (clamped to +-0.98); Clayton and Gumbel rotate to
    absorb the sign of tau.
    """
    tau = float(np.clip(np.tanh(h), -TAU_CLAMP, TAU_CLAMP))
    if family.kind == Kind.INDEPENDENCE:
        return family, 0.0
    if family.kind == Kind.FRANK and tau == 0.0:
        tau = 1e-12
    fam = bicop.absorb_sign(family, tau)
    return fam, bicop.tau_to_par(fam, tau)


def modal_family(layout) -> CopulaFamily:
    """Most frequent non-independence family (Gaussian if there is none)."""
    fams = [f for f in (layout.values() if isinstance(layout, dict) else layout)
            if f.kind != Kind.INDEPENDENCE]
    if not fams:
        return bicop.GAUSSIAN
    counts = Counter(fams)
    order = {f: k for k, f in enumerate(bicop.DEFAULT_CANDIDATES)}
    return min(counts, key=lambda f: (-counts[f], order.get(f, 99), str(f)))


def layout_from_specs(specs) -> dict:
    """Family layout (edge -> family) of a fitted vine."""
    return {e: pc.family for e, pc in specs.items()}


def prepare_layout(layout: dict) -> dict:
    """Replace independence entries by the modal family for reparametrized fits."""
    modal = modal_family(layout)
    return {e: (modal if f.kind == Kind.INDEPENDENCE else f) for e, f in layout.items()}


def copula_from_h(h: float, family: CopulaFamily, level: int, beta_nu) -> PairCopula:
    fam, th = theta_from_model(h, family)
    if fam.kind == Kind.STUDENT_T:
        return PairCopula(fam, th, clamp_nu(model_nu(level, beta_nu)))
    if fam.kind == Kind.INDEPENDENCE:
        return PairCopula(fam)
    return PairCopula(fam, th)


def edge_copula(e: VineEdge, params: SVParams, family: CopulaFamily, pred: SpatialPredictors) -> PairCopula:
    """Pair copula of one edge implied by the model."""
    return copula_from_h(model_h(e, params, pred), family, e.level, params.beta_nu)


def model_specs(structure: RVineStructure, layout: dict, params: SVParams,
                pred: SpatialPredictors) -> dict:
    """Pair copulas of all edges up to the truncation level."""
    return {e: edge_copula(e, params, layout[e], pred) for e in structure.edges}


def sv_loglik(params: SVParams, structure: RVineStructure, layout: dict, copula_data,
              pred: SpatialPredictors) -> float:
    """Vine log-likelihood with every edge parameter produced by the model."""
    return vine.loglik(structure, model_specs(structure, layout, params, pred), copula_data)


def _design_row(e: VineEdge, pred: SpatialPredictors) -> np.ndarray:
    d, a, b = edge_geometry(e, pred)
    if e.level == 1:
        return np.array([1.0, np.log(d)])
    return np.array([1.0, np.log(d), np.log(a), np.log(b)])


def start_values(copula_data, structure: RVineStructure, specs: dict, pred: SpatialPredictors,
                 nu_fallback=None) -> SVParams:
    """Least-squares start values.

    Per tree, Fisher z of the empirical Kendall's tau of each edge's
    pseudo-observations is regressed on the tree's log predictors; ln ν of
    the StudentT edges is regressed on (1, l, l^2). Underdetermined trees
    use the minimum-norm solution.

    Raises
    ------
    InsufficientStudentTError
        Fewer than 4 StudentT edges and no ``nu_fallback`` given.
    """
    args = vine.edge_pseudo_obs(structure, specs, copula_data)
    blocks = []
    for l in range(1, structure.trunc + 1):
        edges = structure.trees[l - 1]
        X = np.array([_design_row(e, pred) for e in edges])
        taus = np.array([bicop.empirical_tau(*args[e]) for e in edges])
        y = np.arctanh(np.clip(taus, -TAU_CLAMP, TAU_CLAMP))
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        blocks.append(coef)
    t_edges = [(e.level, specs[e].nu) for e in structure.edges if specs[e].kind == Kind.STUDENT_T]
    if len(t_edges) < 4:
        if nu_fallback is None:
            raise InsufficientStudentTError(
                f"only {len(t_edges)} StudentT edges; need 4 for the ν regression")
        beta_nu = np.asarray(nu_fallback, dtype=float)
    else:
        lv = np.array([t[0] for t in t_edges], dtype=float)
        X = np.column_stack([np.ones_like(lv), lv, lv * lv])
        beta_nu, *_ = np.linalg.lstsq(X, np.log([t[1] for t in t_edges]), rcond=None)
    return SVParams(np.concatenate(blocks), beta_nu)


def fit_sv(copula_data, structure: RVineStructure, layout: dict, pred: SpatialPredictors,
           start: SVParams, maxiter: int = 500, ftol: float = 1e-6) -> tuple[SVParams, FitResult]:
    """Maximize the reparametrized vine likelihood from ``start``.

    Quasi-Newton with numerical gradients; the best iterate is returned and
    flagged when the optimizer does not report convergence.
    """
    data = np.asarray(copula_data, dtype=float)
    n = data.shape[0]
    lay = prepare_layout(layout)

    def nll(x):
        try:
            v = sv_loglik(SVParams.from_vector(x), structure, lay, data, pred)
        except (DomainError, FloatingPointError):
            return 1e10
        return -v / n if np.isfinite(v) else 1e10

    x0 = start.to_vector()
    f0 = nll(x0)
    res = optimize.minimize(nll, x0, method="L-BFGS-B",
                            options={"maxiter": maxiter, "ftol": ftol, "gtol": 1e-7})
    x = res.x if res.fun <= f0 else x0
    fbest = min(res.fun, f0)
    return SVParams.from_vector(x), FitResult(x, -fbest * n, -f0 * n, bool(res.success),
                                              str(res.message), int(res.nit))


def geometric_structure(pred: SpatialPredictors, params: SVParams, trunc: int | None = None) -> RVineStructure:
    """Tree-wise maximum spanning trees under model-implied |tau| (no data)."""
    k = params.trunc if trunc is None else trunc
    return vine.structure_from_weights(pred.dim, k, lambda e: abs(np.tanh(model_h(e, params, pred))))


# ---------------------------------------------------------------------------
# prediction


@dataclass
class ExtensionPath:
    """Edges attaching a new station ``s = d`` and the extended vine."""

    edges: list
    copulas: list
    taus: list
    vine: RVine

    @property
    def length(self) -> int:
        return len(self.edges)


def _joint_predictors(stations: Stations, lon: float, lat: float, elev: float,
                      radius: float, elev_guard: float) -> SpatialPredictors:
    lons = np.append(stations.lon, lon)
    lats = np.append(stations.lat, lat)
    els = np.append(stations.elev, elev)
    D = haversine(lons[:, None], lats[:, None], lons[None, :], lats[None, :], radius)
    np.fill_diagonal(D, 0.0)
    E = np.abs(els[:, None] - els[None, :])
    return SpatialPredictors(D, E, elev_guard, radius)


def extend_for_prediction(target, stations: Stations, structure: RVineStructure, layout: dict,
                          params: SVParams, family: CopulaFamily | None = None,
                          radius: float = EARTH_RADIUS_KM, elev_guard: float = ELEV_GUARD_M) -> ExtensionPath:
    """Attach an unobserved station to a fitted vine as a leaf.

    Tree 1 links the target to the station with the largest predicted
    tau; on tree l the candidates are the stations that extend the nested
    conditioning set through a proximity-admissible edge, again choosing
    the largest predicted tau. Stations at the target's exact coordinates
    are skipped when another candidate exists.

    Parameters
    ----------
    target : tuple (lon, lat, elev)
    family : CopulaFamily, optional
        Family of the new edges; the modal family of ``layout`` by default.
    """
    lon, lat, elev = (float(x) for x in target)
    d = len(stations)
    pred = _joint_predictors(stations, lon, lat, elev, radius, elev_guard)
    s = d
    k = min(structure.trunc, params.trunc, d)
    fam = family or modal_family(layout)
    lay = prepare_layout(layout)
    base_specs = {e: edge_copula(e, params, lay[e], pred) for e in structure.edges if e.level <= k}
    coincident = pred.dist[s, :d] <= 0.0

    def best(cands):
        cands = sorted(cands, key=lambda c: c[0])
        keep = [c for c in cands if not coincident[c[0]]] or cands
        taus = [np.tanh(model_h(c[1], params, pred)) for c in keep]
        m = int(np.argmax(taus))
        return keep[m], float(taus[m])

    edges, copulas, taus = [], [], []
    D: tuple = ()
    prev_a = None
    for l in range(1, k + 1):
        if l == 1:
            cands = [(r, VineEdge((r, s))) for r in range(d)]
        else:
            D = tuple(sorted(D + (prev_a,)))
            Dset = frozenset(D)
            cands = []
            for p in structure.trees[l - 2]:
                extra = p.full - Dset
                if len(extra) == 1 and Dset <= p.full:
                    a = next(iter(extra))
                    if a in p.conditioned:
                        cands.append((a, VineEdge((a, s), D)))
            if not cands:
                raise AssertionError(f"no admissible extension candidate at tree {l}")
        (a, e), tau = best(cands)
        pc = copula_from_h(model_h(e, params, pred), fam, l, params.beta_nu)
        edges.append(e)
        copulas.append(pc)
        taus.append(tau)
        prev_a = a
    ext = vine.append_leaf(structure.truncated(k), base_specs, list(zip(edges, copulas)))
    return ExtensionPath(edges, copulas, taus, ext)


def predict_samples(path: ExtensionPath, day_rows, n: int = 1000, seed=None) -> np.ndarray:
    """Conditional draws of the new station's copula value.

    ``day_rows`` is a d-vector (returns (n,)) or an (N, d) matrix
    (returns (N, n)).
    """
    rows = np.asarray(day_rows, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.uniform(size=(n,) if rows.ndim == 1 else (rows.shape[0], n))
    return vine.conditional_quantile(path.vine, v, rows)


def predict_density(path: ExtensionPath, u, day_row):
    """Predictive copula density of the new station."""
    return vine.conditional_density(path.vine, u, day_row)


# ---------------------------------------------------------------------------
# persistence


def save_sv(path, structure: RVineStructure, layout: dict, params: SVParams,
            pred: SpatialPredictors | None = None, meta: dict | None = None) -> None:
    """Plain-text SV model file.

    Lines: ``dimension``, ``truncation``, ``trees``, ``edge <level> <i> <j>
    <D> <family>``, ``beta_dist ...``, ``beta_nu ...``, ``earth_radius``,
    ``elev_guard`` and optional ``meta <key> <value>`` entries.
    """
    radius = pred.radius if pred else EARTH_RADIUS_KM
    guard = pred.elev_guard if pred else ELEV_GUARD_M
    lines = ["# spatial R-vine model", f"dimension {structure.dim}", f"truncation {structure.trunc}",
             f"trees {len(structure.trees)}"]
    for tree in structure.trees:
        for e in tree:
            D = ",".join(map(str, e.conditioning)) or "-"
            fam = layout.get(e)
            lines.append(f"edge {e.level} {e.conditioned[0]} {e.conditioned[1]} {D} "
                         f"{fam if fam is not None else '-'}")
    lines.append("beta_dist " + " ".join(repr(float(x)) for x in params.beta_dist))
    lines.append("beta_nu " + " ".join(repr(float(x)) for x in params.beta_nu))
    lines.append(f"earth_radius {float(radius)!r}")
    lines.append(f"elev_guard {float(guard)!r}")
    for k, v in (meta or {}).items():
        lines.append(f"meta {k} {v}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_sv(path):
    """Returns (structure, layout, params, info dict)."""
    rows = []
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    info: dict = {"meta": {}}
    trees: dict = {}
    layout = {}
    for r in rows:
        if r[0] == "edge":
            lvl, i, j = int(r[1]), int(r[2]), int(r[3])
            D = () if r[4] == "-" else tuple(int(x) for x in r[4].split(","))
            e = VineEdge((i, j), D, lvl)
            trees.setdefault(lvl, []).append(e)
            if r[5] != "-":
                layout[e] = bicop.parse_family(r[5])
        elif r[0] == "meta":
            info["meta"][r[1]] = " ".join(r[2:])
        else:
            info[r[0]] = r[1:]
    m = int(info["trees"][0])
    st = RVineStructure(int(info["dimension"][0]), tuple(tuple(trees.get(l, ())) for l in range(1, m + 1)),
                        int(info["truncation"][0]))
    params = SVParams([float(x) for x in info["beta_dist"]], [float(x) for x in info["beta_nu"]])
    info["earth_radius"] = float(info["earth_radius"][0])
    info["elev_guard"] = float(info["elev_guard"][0])
    return st, layout, params, info
