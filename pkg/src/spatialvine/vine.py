"""Regular vine structures, fitting, likelihood and simulation.

A structure is stored as explicit edge lists per tree. An edge is written
``(i, j; D)`` with ``i < j`` and a sorted conditioning tuple ``D``; its pair
copula couples ``C(i | D)`` (first argument) with ``C(j | D)``.

Pseudo-observations are keyed by ``(variable, frozenset(conditioning))``
so an edge ``(i, j; D)`` reads ``(i, D)`` and ``(j, D)`` and produces
``(i, D + j)`` and ``(j, D + i)``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import bicop
from ._common import DomainError, SpatialVineError, clip_unit
from .bicop import INDEPENDENCE, CopulaFamily, Kind, PairCopula

__all__ = [
    "VineEdge",
    "RVineStructure",
    "RVine",
    "ValidationReport",
    "ProximityError",
    "NestingError",
    "validate",
    "join_edges",
    "select_structure",
    "select_vine",
    "pseudo_obs",
    "edge_pseudo_obs",
    "sequential_fit",
    "loglik",
    "simulate",
    "append_leaf",
    "conditional_cdf",
    "conditional_quantile",
    "conditional_density",
    "num_edges",
    "num_parameters",
    "save_vine",
    "load_vine",
    "to_matrix",
]


class ProximityError(SpatialVineError, ValueError):
    """An edge joins two edges of the previous tree without a shared vertex."""


class NestingError(SpatialVineError, ValueError):
    """Conditioning sets along a leaf extension are not nested."""


@dataclass(frozen=True, order=True)
class VineEdge:
    """Edge ``(i, j; D)`` of tree ``level``."""

    conditioned: tuple[int, int]
    conditioning: tuple[int, ...] = ()
    level: int = 0

    def __post_init__(self):
        i, j = (int(x) for x in self.conditioned)
        if i == j:
            raise DomainError("conditioned variables must differ")
        if i > j:
            i, j = j, i
        D = tuple(sorted(int(x) for x in self.conditioning))
        if len(set(D)) != len(D) or i in D or j in D:
            raise DomainError(f"invalid conditioning set {D} for ({i}, {j})")
        lvl = self.level or len(D) + 1
        if lvl != len(D) + 1:
            raise DomainError(f"tree level {lvl} needs |D| = {lvl - 1}")
        object.__setattr__(self, "conditioned", (i, j))
        object.__setattr__(self, "conditioning", D)
        object.__setattr__(self, "level", lvl)

    @property
    def full(self) -> frozenset:
        return frozenset(self.conditioned) | frozenset(self.conditioning)

    def __str__(self) -> str:
        i, j = self.conditioned
        if self.conditioning:
            return f"{i},{j}|{','.join(map(str, self.conditioning))}"
        return f"{i},{j}"


def edge(i: int, j: int, *D: int) -> VineEdge:
    """Shorthand constructor: ``edge(0, 2, 1)`` is ``(0, 2; 1)``."""
    return VineEdge((i, j), tuple(D))


@dataclass(frozen=True)
class RVineStructure:
    """Tree sequence of a (possibly truncated) R-vine.

    ``trees[l - 1]`` holds the edges of tree ``l``. Only the first
    ``len(trees)`` trees are stored; ``trunc`` (defaults to the number of
    stored trees) is the level above which pair copulas are independence.
    """

    dim: int
    trees: tuple[tuple[VineEdge, ...], ...]
    trunc: int = -1

    def __post_init__(self):
        trees = tuple(tuple(sorted(t)) for t in self.trees)
        object.__setattr__(self, "trees", trees)
        t = len(trees) if self.trunc < 0 else int(self.trunc)
        if t > len(trees) or t < 0:
            raise DomainError(f"truncation {t} exceeds the {len(trees)} stored trees")
        object.__setattr__(self, "trunc", t)

    @property
    def edges(self) -> list[VineEdge]:
        """Edges with level at most ``trunc``."""
        return [e for t in self.trees[: self.trunc] for e in t]

    def truncated(self, k: int) -> "RVineStructure":
        k = min(k, len(self.trees))
        return RVineStructure(self.dim, self.trees[:k], k)


def num_edges(d: int, k: int) -> int:
    """Number of pair copulas of a ``k``-truncated ``d``-dimensional vine."""
    k = min(k, d - 1)
    return sum(d - l for l in range(1, k + 1))


def num_parameters(specs: Mapping[VineEdge, PairCopula] | Iterable[PairCopula]) -> int:
    """Free parameters of a family layout (StudentT counts two)."""
    vals = specs.values() if isinstance(specs, Mapping) else specs
    return sum(bicop.nparams(pc) for pc in vals)


@dataclass
class RVine:
    """A structure together with its pair copulas."""

    structure: RVineStructure
    specs: dict

    @property
    def dim(self) -> int:
        return self.structure.dim


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    message: str = ""
    edge: VineEdge | None = None

    def __bool__(self) -> bool:
        return self.ok


class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, x):
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.p[max(ra, rb)] = min(ra, rb)
        return True


def _parents(e: VineEdge, by_full: Mapping[frozenset, VineEdge]):
    """The two previous-tree edges joined by ``e`` (None if missing)."""
    i, j = e.conditioned
    D = frozenset(e.conditioning)
    return by_full.get(D | {i}), by_full.get(D | {j})


def _parent_fulls(e: VineEdge) -> set[frozenset]:
    i, j = e.conditioned
    return {e.full - {i}, e.full - {j}}


def validate(structure: RVineStructure) -> ValidationReport:
    """Check the R-vine tree conditions.

    Tree 1 must span all variables, each tree must be a spanning tree on
    the edges of the previous one, and every edge must join two edges that
    share a vertex (proximity). The report names the first violating edge.
    """
    d = structure.dim
    if d < 1:
        return ValidationReport(False, "dimension must be positive")
    if len(structure.trees) > max(d - 1, 0):
        return ValidationReport(False, f"{len(structure.trees)} trees for dimension {d}")
    prev_nodes: list = [frozenset([v]) for v in range(d)]
    prev_edges: list[VineEdge] | None = None
    for l, tree in enumerate(structure.trees, start=1):
        if len(tree) != d - l:
            bad = tree[d - l] if len(tree) > d - l else None
            return ValidationReport(
                False, f"tree {l} has {len(tree)} edges, expected {d - l}", bad)
        if len(set(tree)) != len(tree):
            return ValidationReport(False, f"tree {l} repeats an edge")
        index = {n: k for k, n in enumerate(prev_nodes)}
        uf = _UnionFind(len(prev_nodes))
        for e in tree:
            if e.level != l:
                return ValidationReport(False, f"edge {e} is not a tree-{l} edge", e)
            if max(e.full) >= d:
                return ValidationReport(False, f"edge {e} refers to a node >= {d}", e)
            if l == 1:
                a, b = frozenset([e.conditioned[0]]), frozenset([e.conditioned[1]])
            else:
                by_full = {x.full: x for x in prev_edges}
                pa, pb = _parents(e, by_full)
                if pa is None or pb is None:
                    return ValidationReport(
                        False, f"edge {e} does not join two tree-{l - 1} edges", e)
                if not (_parent_fulls(pa) & _parent_fulls(pb)) and l > 2:
                    return ValidationReport(False, f"proximity violated at edge {e}", e)
                a, b = pa.full, pb.full
            if not uf.union(index[a], index[b]):
                return ValidationReport(False, f"edge {e} closes a cycle in tree {l}", e)
        prev_nodes = [e.full for e in tree]
        prev_edges = list(tree)
    return ValidationReport(True)


def join_edges(a: VineEdge, b: VineEdge) -> VineEdge:
    """Edge of the next tree joining ``a`` and ``b``.

    Raises
    ------
    ProximityError
        If ``a`` and ``b`` do not share a vertex.
    """
    if a.level != b.level:
        raise ProximityError(f"edges {a} and {b} lie in different trees")
    inter = a.full & b.full
    cond = a.full ^ b.full
    if len(cond) != 2 or len(inter) != a.level:
        raise ProximityError(f"edges {a} and {b} share no vertex")
    if a.level > 1 and not (_parent_fulls(a) & _parent_fulls(b)):
        raise ProximityError(f"edges {a} and {b} share no vertex")
    return VineEdge(tuple(sorted(cond)), tuple(sorted(inter)))


# ---------------------------------------------------------------------------
# pseudo-observations and likelihood


def _spec(specs, e: VineEdge) -> PairCopula:
    try:
        return specs[e]
    except KeyError:
        raise DomainError(f"no pair copula for edge {e}") from None


def _as_data(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    if u.ndim != 2:
        raise DomainError("copula data must be an N x d matrix")
    return clip_unit(u)


def _propagate(structure: RVineStructure, specs, data: np.ndarray,
               levels: int | None = None, want_loglik: bool = False):
    """Walk the trees; returns (store, loglik) with the pseudo-obs store."""
    store: dict = {(v, frozenset()): data[:, v] for v in range(structure.dim)}
    ll = 0.0
    top = structure.trunc if levels is None else min(levels, structure.trunc)
    for tree in structure.trees[:top]:
        for e in tree:
            i, j = e.conditioned
            D = frozenset(e.conditioning)
            ui, uj = store[(i, D)], store[(j, D)]
            pc = _spec(specs, e)
            lp, hij, hji = bicop.edge_terms(pc, ui, uj, want_pdf=want_loglik)
            if want_loglik:
                ll += float(np.sum(lp))
            store[(i, D | {j})] = hij
            store[(j, D | {i})] = hji
    return store, ll


def pseudo_obs(structure: RVineStructure, specs, copula_data) -> dict:
    """Pseudo-observations keyed by ``(variable, frozenset(conditioning))``.

    Values ``C(i | D)`` for every conditional distribution produced by the
    h-function recursion up to the truncation level; tree-1 entries are the
    raw copula data.
    """
    store, _ = _propagate(structure, specs, _as_data(copula_data))
    return store


def edge_pseudo_obs(structure: RVineStructure, specs, copula_data, level: int | None = None):
    """Per-edge arguments ``(C(i|D), C(j|D))`` of each pair copula."""
    data = _as_data(copula_data)
    top = structure.trunc if level is None else level
    store, _ = _propagate(structure, specs, data, levels=top - 1)
    out = {}
    for tree in structure.trees[:top]:
        for e in tree:
            D = frozenset(e.conditioning)
            out[e] = (store[(e.conditioned[0], D)], store[(e.conditioned[1], D)])
    return out


def loglik(structure: RVineStructure, specs, copula_data) -> float:
    """Vine log-likelihood summed over observations."""
    _, ll = _propagate(structure, specs, _as_data(copula_data), want_loglik=True)
    return ll


def sequential_fit(structure: RVineStructure, copula_data, candidates=None,
                   alpha: float = 0.05) -> dict:
    """Tree-by-tree family selection and estimation for a fixed structure."""
    data = _as_data(copula_data)
    specs: dict = {}
    store: dict = {(v, frozenset()): data[:, v] for v in range(structure.dim)}
    for tree in structure.trees[: structure.trunc]:
        for e in tree:
            i, j = e.conditioned
            D = frozenset(e.conditioning)
            ui, uj = store[(i, D)], store[(j, D)]
            pc = bicop.select_family(ui, uj, candidates, alpha)
            specs[e] = pc
            _, hij, hji = bicop.edge_terms(pc, ui, uj, want_pdf=False)
            store[(i, D | {j})] = hij
            store[(j, D | {i})] = hji
    return specs


# ---------------------------------------------------------------------------
# structure selection


def _mst(nodes: Sequence, candidates: list[tuple[float, VineEdge, object, object]]):
    """Maximum spanning tree by Kruskal; ties go to the smaller edge label."""
    index = {n: k for k, n in enumerate(nodes)}
    uf = _UnionFind(len(nodes))
    chosen = []
    for w, e, a, b in sorted(candidates, key=lambda c: (-c[0], c[1].conditioned, c[1].conditioning)):
        if uf.union(index[a], index[b]):
            chosen.append(e)
            if len(chosen) == len(nodes) - 1:
                break
    return chosen


def _next_candidates(prev: Sequence[VineEdge]):
    """All proximity-admissible edges joining edges of the previous tree."""
    out = []
    for x in range(len(prev)):
        for y in range(x + 1, len(prev)):
            a, b = prev[x], prev[y]
            if len(a.full & b.full) != a.level:
                continue
            if a.level > 1 and not (_parent_fulls(a) & _parent_fulls(b)):
                continue
            inter = a.full & b.full
            cond = tuple(sorted(a.full ^ b.full))
            out.append((VineEdge(cond, tuple(sorted(inter))), a, b))
    return out


def select_vine(copula_data, trunc: int, candidates=None, alpha: float = 0.05,
                weight=None) -> RVine:
    """Dissmann-type selection of structure and pair copulas.

    Each tree is the maximum spanning tree under absolute empirical
    Kendall's tau of the current pseudo-observations; pair copulas are
    selected per edge before moving to the next tree.

    Parameters
    ----------
    weight : callable, optional
        ``weight(edge, ui, uj)`` replacing ``|tau|`` as edge weight.
    """
    data = _as_data(copula_data)
    n, d = data.shape
    if d < 2:
        raise DomainError("need at least two variables")
    for v in range(d):
        if np.ptp(data[:, v]) == 0:
            raise DomainError(f"column {v} is constant")
    k = min(int(trunc), d - 1)
    if k < 1:
        raise DomainError("truncation level must be at least 1")
    wfun = weight or (lambda e, a, b: abs(bicop.empirical_tau(a, b)))
    store: dict = {(v, frozenset()): data[:, v] for v in range(d)}
    specs: dict = {}
    trees = []
    nodes: list = list(range(d))
    prev: list[VineEdge] = []
    for l in range(1, k + 1):
        if l == 1:
            cands = [(VineEdge((a, b)), a, b) for a in range(d) for b in range(a + 1, d)]
        else:
            cands = _next_candidates(prev)
        weighted = []
        for e, a, b in cands:
            D = frozenset(e.conditioning)
            i, j = e.conditioned
            weighted.append((wfun(e, store[(i, D)], store[(j, D)]), e, a, b))
        tree = _mst(nodes, weighted)
        for e in tree:
            i, j = e.conditioned
            D = frozenset(e.conditioning)
            ui, uj = store[(i, D)], store[(j, D)]
            pc = bicop.select_family(ui, uj, candidates, alpha)
            specs[e] = pc
            _, hij, hji = bicop.edge_terms(pc, ui, uj, want_pdf=False)
            store[(i, D | {j})] = hij
            store[(j, D | {i})] = hji
        trees.append(tuple(tree))
        prev = tree
        nodes = list(tree)
    return RVine(RVineStructure(d, tuple(trees), k), specs)


def select_structure(copula_data, trunc: int, candidates=None, alpha: float = 0.05) -> RVineStructure:
    """Structure part of :func:`select_vine`."""
    return select_vine(copula_data, trunc, candidates, alpha).structure


def structure_from_weights(d: int, trunc: int, weight) -> RVineStructure:
    """Maximum-spanning-tree structure from a data-free edge weight.

    ``weight(edge)`` scores each proximity-admissible candidate edge.
    """
    k = min(int(trunc), d - 1)
    trees = []
    nodes: list = list(range(d))
    prev: list[VineEdge] = []
    for l in range(1, k + 1):
        if l == 1:
            cands = [(VineEdge((a, b)), a, b) for a in range(d) for b in range(a + 1, d)]
        else:
            cands = _next_candidates(prev)
        tree = _mst(nodes, [(float(weight(e)), e, a, b) for e, a, b in cands])
        trees.append(tuple(tree))
        prev = tree
        nodes = list(tree)
    return RVineStructure(d, tuple(trees), k)


def _complete(structure: RVineStructure) -> RVineStructure:
    """Fill trees above the stored ones with arbitrary admissible trees."""
    d = structure.dim
    trees = list(structure.trees)
    if not trees and d > 1:
        trees.append(tuple(VineEdge((v, v + 1)) for v in range(d - 1)))
    while len(trees) < d - 1:
        prev = list(trees[-1])
        cands = _next_candidates(prev)
        tree = _mst(prev, [(0.0, e, a, b) for e, a, b in cands])
        trees.append(tuple(tree))
    return RVineStructure(d, tuple(trees), structure.trunc)


# ---------------------------------------------------------------------------
# simulation


def _leaf_order(structure: RVineStructure):
    """Peel leaf variables off a full vine.

    Returns a list of ``(variable, [edges by level])`` in peeling order; the
    last entry is sampled first.
    """
    full = _complete(structure)
    remaining = set(range(full.dim))
    trees = [list(t) for t in full.trees]
    order = []
    while len(remaining) > 1:
        m = len(remaining)
        top = trees[m - 2]
        cands = list(top[0].conditioned) if len(top) == 1 else []
        cands += sorted(remaining - set(cands))
        for x in cands:
            chain = []
            ok = True
            for l in range(m - 1):
                hits = [e for e in trees[l] if x in e.full]
                if len(hits) != 1 or x not in hits[0].conditioned:
                    ok = False
                    break
                chain.append(hits[0])
            if ok:
                break
        else:
            raise SpatialVineError("structure has no leaf variable; not a valid vine")
        order.append((x, chain))
        remaining.discard(x)
        for l in range(m - 1):
            trees[l] = [e for e in trees[l] if e is not chain[l]]
    order.append((remaining.pop(), []))
    return order


def simulate(structure: RVineStructure, specs, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` rows of copula data from a vine by inverse Rosenblatt.

    Deterministic given ``seed``.
    """
    d = structure.dim
    rng = np.random.default_rng(seed)
    w = rng.uniform(size=(n, d))
    order = _leaf_order(structure)[::-1]
    trunc = structure.trunc

    def pc_of(e):
        return specs[e] if e.level <= trunc else bicop.PairCopula(INDEPENDENCE)

    store: dict = {}
    out = np.empty((n, d))
    for x, chain in order:
        z = w[:, x]
        # chain[l] = (x, m_l; D_l) with D_{l+1} = D_l + m_l
        for e in reversed(chain):
            pc = pc_of(e)
            i, j = e.conditioned
            m = j if i == x else i
            D = frozenset(e.conditioning)
            v = store[(m, D)]
            z = bicop.hinv(pc, z, v) if x == i else bicop.hinv2(pc, z, v)
        out[:, x] = z
        store[(x, frozenset())] = z
        for e in chain:
            pc = pc_of(e)
            i, j = e.conditioned
            D = frozenset(e.conditioning)
            _, hij, hji = bicop.edge_terms(pc, store[(i, D)], store[(j, D)], want_pdf=False)
            store[(i, D | {j})] = hij
            store[(j, D | {i})] = hji
    return out


# ---------------------------------------------------------------------------
# leaf extension and conditional distributions


def append_leaf(structure: RVineStructure, specs, new_edges: Sequence[tuple[VineEdge, PairCopula]]) -> RVine:
    """Attach a new variable ``d`` as a leaf with one edge per tree.

    ``new_edges[l - 1]`` must be a tree-``l`` edge ``(a_l, d; D_l)`` with
    ``D_1`` empty and ``D_l = D_{l-1} + a_{l-1}``. The result is truncated
    at ``len(new_edges)``.

    Raises
    ------
    NestingError
        Conditioning sets are not nested as required.
    ProximityError
        The extended structure violates the proximity condition.
    """
    d = structure.dim
    k = len(new_edges)
    if k < 1 or k > d:
        raise DomainError(f"need between 1 and {d} extension edges")
    if k > len(structure.trees) and d > 1 and k > min(len(structure.trees) + 1, d):
        raise DomainError("more extension edges than stored trees allow")
    D: tuple = ()
    prev_a = None
    for l, (e, _) in enumerate(new_edges, start=1):
        if e.level != l or e.conditioned[1] != d:
            raise NestingError(f"level {l}: edge {e} must be a tree-{l} edge ending in node {d}")
        if l > 1:
            D = tuple(sorted(D + (prev_a,)))
        if e.conditioning != D:
            raise NestingError(f"level {l}: conditioning {e.conditioning} != expected {D}")
        prev_a = e.conditioned[0]
    trees = []
    for l in range(1, k + 1):
        old = structure.trees[l - 1] if l - 1 < len(structure.trees) else ()
        trees.append(tuple(old) + (new_edges[l - 1][0],))
    ext = RVineStructure(d + 1, tuple(trees), k)
    rep = validate(ext)
    if not rep.ok:
        lvl = rep.edge.level if rep.edge is not None else "?"
        raise ProximityError(f"level {lvl}: {rep.message}")
    new_specs = {e: pc for e, pc in specs.items() if e.level <= k}
    for e, pc in new_edges:
        new_specs[e] = pc
    return RVine(ext, new_specs)


def _extension(vine: RVine):
    """Extension chain of the last variable: list of (pc, edge), base vine."""
    s = vine.dim - 1
    st = vine.structure
    chain = sorted((e for e in st.edges if e.conditioned[1] == s), key=lambda e: e.level)
    if not chain or chain[0].level != 1:
        raise DomainError("vine has no leaf extension for its last variable")
    base_trees = tuple(tuple(e for e in t if s not in e.full) for t in st.trees[: len(chain)])
    base = RVineStructure(s, base_trees[: max(len(chain) - 1, 0)], max(len(chain) - 1, 0))
    return chain, base


def _chain_inputs(vine: RVine, data_row):
    """Conditioning values ``w_l = C(a_l | D_l)`` for each extension edge."""
    chain, base = _extension(vine)
    data = _as_data(data_row)
    if data.shape[1] != vine.dim - 1:
        raise DomainError(f"data rows need {vine.dim - 1} entries")
    store, _ = _propagate(base, vine.specs, data)
    ws = [store[(e.conditioned[0], frozenset(e.conditioning))] for e in chain]
    pcs = [vine.specs.get(e, bicop.PairCopula(INDEPENDENCE)) for e in chain]
    return pcs, ws, np.asarray(data_row).ndim == 1


def _shape(x, squeeze):
    x = np.asarray(x)
    if squeeze and x.ndim >= 1 and x.shape[0] == 1:
        x = x[0]
    return x if x.ndim else float(x)


def _col(w, u):
    # broadcast (N,) conditioning values against draws of shape (N, n)
    u = np.asarray(u, dtype=float)
    if u.ndim > w.ndim:
        return w.reshape(w.shape + (1,) * (u.ndim - w.ndim))
    return w


def conditional_cdf(vine: RVine, u_new, data_row):
    """``C(s | 1..d)`` of the appended variable given the others.

    ``data_row`` is a d-vector or an (N, d) matrix; ``u_new`` broadcasts
    against it (shape (N,) or (N, n) for a matrix).
    """
    pcs, ws, squeeze = _chain_inputs(vine, data_row)
    z = np.asarray(u_new, dtype=float)
    if not squeeze and z.ndim == 0:
        z = np.full(ws[0].shape, float(z))
    if squeeze and z.ndim >= 1:
        z = z[None, ...] if z.ndim == 1 else z
    for pc, w in zip(pcs, ws):
        z = bicop.hfunc2(pc, _col(w, z), z)
    return _shape(z, squeeze)


def conditional_quantile(vine: RVine, p, data_row):
    """Inverse of :func:`conditional_cdf` in ``u_new``."""
    pcs, ws, squeeze = _chain_inputs(vine, data_row)
    z = np.asarray(p, dtype=float)
    if not squeeze and z.ndim == 0:
        z = np.full(ws[0].shape, float(z))
    if squeeze and z.ndim >= 1:
        z = z[None, ...] if z.ndim == 1 else z
    for pc, w in zip(reversed(pcs), reversed(ws)):
        z = bicop.hinv2(pc, z, _col(w, z))
    return _shape(z, squeeze)


def conditional_density(vine: RVine, u_new, data_row):
    """Density of the appended variable given the others.

    Product over extension edges of ``c(C(a_l | D_l), C(s | D_l))``.
    """
    pcs, ws, squeeze = _chain_inputs(vine, data_row)
    z = np.asarray(u_new, dtype=float)
    if not squeeze and z.ndim == 0:
        z = np.full(ws[0].shape, float(z))
    if squeeze and z.ndim >= 1:
        z = z[None, ...] if z.ndim == 1 else z
    logd = np.zeros(np.broadcast(_col(ws[0], z), z).shape)
    for pc, w in zip(pcs, ws):
        wc = _col(w, z)
        lp, _, hvu = bicop.edge_terms(pc, wc, z)
        logd = logd + lp
        z = hvu
    return _shape(np.exp(logd), squeeze)


# ---------------------------------------------------------------------------
# persistence


def save_vine(path, structure: RVineStructure, specs) -> None:
    """Write a vine to a plain-text model file.

    Format: ``dimension <d>``, ``truncation <k>``, ``trees <m>`` then one
    line per edge ``edge <level> <i> <j> <D comma-separated or -> <family>
    <theta> <nu or ->`` with floats in round-trip ``repr`` form.
    """
    lines = [f"dimension {structure.dim}", f"truncation {structure.trunc}",
             f"trees {len(structure.trees)}"]
    for tree in structure.trees:
        for e in tree:
            pc = specs.get(e)
            D = ",".join(map(str, e.conditioning)) or "-"
            if pc is None:
                fam, th, nu = "-", "-", "-"
            else:
                fam, th = str(pc.family), repr(pc.theta)
                nu = repr(pc.nu) if pc.nu is not None else "-"
            lines.append(f"edge {e.level} {e.conditioned[0]} {e.conditioned[1]} {D} {fam} {th} {nu}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_vine(path) -> RVine:
    """Read a file written by :func:`save_vine`."""
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    head = {r[0]: r[1] for r in rows if r[0] != "edge"}
    d, k, m = int(head["dimension"]), int(head["truncation"]), int(head["trees"])
    trees: list[list[VineEdge]] = [[] for _ in range(m)]
    specs = {}
    for r in rows:
        if r[0] != "edge":
            continue
        lvl, i, j = int(r[1]), int(r[2]), int(r[3])
        D = () if r[4] == "-" else tuple(int(x) for x in r[4].split(","))
        e = VineEdge((i, j), D, lvl)
        trees[lvl - 1].append(e)
        if r[5] != "-":
            nu = None if r[7] == "-" else float(r[7])
            specs[e] = PairCopula(bicop.parse_family(r[5]), float(r[6]), nu)
    return RVine(RVineStructure(d, tuple(tuple(t) for t in trees), k), specs)


def to_matrix(structure: RVineStructure) -> np.ndarray:
    """R-vine matrix (lower-triangular, 0-based labels, -1 for unused).

    Column ``c`` holds variable ``M[c, c]`` on the diagonal and, below it,
    its partners from the top tree down to tree 1 (row ``d - 1``).
    """
    d = structure.dim
    order = _leaf_order(structure)
    M = -np.ones((d, d), dtype=int)
    for c, (x, chain) in enumerate(order):
        M[c, c] = x
        for l, e in enumerate(chain, start=1):
            i, j = e.conditioned
            M[d - l, c] = j if i == x else i
    return M
