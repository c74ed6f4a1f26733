"""Bivariate copula families used as vine building blocks.

Supported kinds are Independence, Gaussian, StudentT, Clayton, Gumbel and
Frank. Clayton and Gumbel may be rotated by 90, 180 or 270 degrees; the
rotation is applied by reflecting arguments:

* 90:  c(1 - u, v)
* 180: c(1 - u, 1 - v)
* 270: c(u, 1 - v)

The h-function ``hfunc(pc, u, v)`` is the conditional distribution
C(u | v) = dC(u, v)/dv. ``hfunc2`` conditions on the first argument.
All evaluation routines are vectorized over ``u`` and ``v`` and the
parameters are scalars.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np
from scipy import integrate, optimize, special, stats

from ._common import (
    NU_MAX,
    NU_MIN,
    ConvergenceError,
    DomainError,
    clip_unit,
)

__all__ = [
    "Kind",
    "CopulaFamily",
    "PairCopula",
    "IndependenceResult",
    "INDEPENDENCE",
    "GAUSSIAN",
    "STUDENT_T",
    "FRANK",
    "DEFAULT_CANDIDATES",
    "pdf",
    "logpdf",
    "hfunc",
    "hfunc2",
    "hinv",
    "hinv2",
    "edge_terms",
    "pair_loglik",
    "swap",
    "tau_to_par",
    "par_to_tau",
    "empirical_tau",
    "fisher_z",
    "fisher_z_inv",
    "independence_test",
    "fit_pair",
    "select_family",
    "nparams",
    "absorb_sign",
    "simulate_pair",
]


class Kind(str, Enum):
    INDEPENDENCE = "Independence"
    GAUSSIAN = "Gaussian"
    STUDENT_T = "StudentT"
    CLAYTON = "Clayton"
    GUMBEL = "Gumbel"
    FRANK = "Frank"


_ROTATABLE = (Kind.CLAYTON, Kind.GUMBEL)
_ELLIPTICAL = (Kind.GAUSSIAN, Kind.STUDENT_T)

TAU_MAX = 0.9999
# Frank parameter search interval; wide enough for |tau| = 0.9 (theta ~ 38.3)
FRANK_MAX = 100.0
# positive floor for Clayton at tau -> 0
CLAYTON_MIN = 1e-8
RHO_MAX = 0.9999


@dataclass(frozen=True)
class CopulaFamily:
    """Copula kind plus rotation in degrees."""

    kind: Kind
    rotation: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.rotation not in (0, 90, 180, 270):
            raise DomainError(f"invalid rotation {self.rotation}")
        if self.rotation != 0 and self.kind not in _ROTATABLE:
            raise DomainError(f"{self.kind.value} only supports rotation 0")

    @property
    def negative(self) -> bool:
        """True when the family models negative dependence (90/270)."""
        return self.rotation in (90, 270)

    def __str__(self) -> str:
        if self.kind in _ROTATABLE:
            return f"{self.kind.value}{self.rotation}"
        return self.kind.value


INDEPENDENCE = CopulaFamily(Kind.INDEPENDENCE)
GAUSSIAN = CopulaFamily(Kind.GAUSSIAN)
STUDENT_T = CopulaFamily(Kind.STUDENT_T)
FRANK = CopulaFamily(Kind.FRANK)

DEFAULT_CANDIDATES = (
    GAUSSIAN,
    STUDENT_T,
    CopulaFamily(Kind.CLAYTON, 0),
    CopulaFamily(Kind.CLAYTON, 180),
    CopulaFamily(Kind.GUMBEL, 0),
    CopulaFamily(Kind.GUMBEL, 180),
    FRANK,
)


def parse_family(text: str) -> CopulaFamily:
    """Inverse of ``str(CopulaFamily)``, e.g. ``"Clayton90"``."""
    text = text.strip()
    for kind in Kind:
        if text == kind.value:
            return CopulaFamily(kind)
        if text.startswith(kind.value) and kind in _ROTATABLE:
            return CopulaFamily(kind, int(text[len(kind.value):]))
    raise DomainError(f"unknown copula family {text!r}")


@dataclass(frozen=True)
class PairCopula:
    """A parametrized bivariate copula.

    ``theta`` is the parameter of the unrotated base copula, so it stays
    positive for every Clayton rotation and at least one for Gumbel.
    ``nu`` is only set for StudentT.
    """

    family: CopulaFamily
    theta: float = 0.0
    nu: float | None = None

    def __post_init__(self):
        fam, th = self.family, float(self.theta)
        object.__setattr__(self, "theta", th)
        if not np.isfinite(th):
            raise DomainError("theta must be finite")
        k = fam.kind
        if k in _ELLIPTICAL and not -1.0 < th < 1.0:
            raise DomainError(f"{k.value} theta must lie in (-1, 1), got {th}")
        if k == Kind.CLAYTON and th <= 0.0:
            raise DomainError(f"Clayton theta must be > 0, got {th}")
        if k == Kind.GUMBEL and th < 1.0:
            raise DomainError(f"Gumbel theta must be >= 1, got {th}")
        if k == Kind.FRANK and th == 0.0:
            raise DomainError("Frank theta must be nonzero")
        if k == Kind.STUDENT_T:
            if self.nu is None or not self.nu > 2.0:
                raise DomainError(f"StudentT needs nu > 2, got {self.nu}")
            object.__setattr__(self, "nu", float(self.nu))
        elif self.nu is not None:
            raise DomainError(f"nu only applies to StudentT, not {k.value}")

    @property
    def kind(self) -> Kind:
        return self.family.kind


def nparams(pc: PairCopula | CopulaFamily) -> int:
    """Number of free parameters of a pair copula."""
    kind = pc.kind if isinstance(pc, CopulaFamily) else pc.family.kind
    if kind == Kind.INDEPENDENCE:
        return 0
    return 2 if kind == Kind.STUDENT_T else 1


_SWAP_ROT = {0: 0, 90: 270, 180: 180, 270: 90}


def swap(pc: PairCopula) -> PairCopula:
    """Copula of (V, U) when ``pc`` is the copula of (U, V)."""
    if pc.family.rotation in (90, 270):
        fam = CopulaFamily(pc.family.kind, _SWAP_ROT[pc.family.rotation])
        return PairCopula(fam, pc.theta, pc.nu)
    return pc


# ---------------------------------------------------------------------------
# base (unrotated) families: each returns (logpdf, h(a|b), h(b|a)) on demand


def t_quantile(nu, p):
    """Student t quantile via the inverse incomplete beta (faster than stdtrit)."""
    p = np.asarray(p, dtype=float)
    q = np.minimum(p, 1 - p)
    with np.errstate(divide="ignore"):
        x = np.sqrt(nu * (1 / special.betaincinv(nu / 2, 0.5, 2 * q) - 1))
    return np.sign(p - 0.5) * x


def _base_gauss(rho, a, b, want_pdf, want_h):
    x, y = special.ndtri(a), special.ndtri(b)
    s2 = 1.0 - rho * rho
    lp = hab = hba = None
    if want_pdf:
        lp = -0.5 * np.log(s2) - (rho * rho * (x * x + y * y) - 2 * rho * x * y) / (2 * s2)
    if want_h:
        s = np.sqrt(s2)
        hab = special.ndtr((x - rho * y) / s)
        hba = special.ndtr((y - rho * x) / s)
    return lp, hab, hba


def _base_t(rho, nu, a, b, want_pdf, want_h):
    x, y = t_quantile(nu, a), t_quantile(nu, b)
    s2 = 1.0 - rho * rho
    lp = hab = hba = None
    if want_pdf:
        q = (x * x + y * y - 2 * rho * x * y) / (nu * s2)
        lp = (special.gammaln((nu + 2) / 2) + special.gammaln(nu / 2)
              - 2 * special.gammaln((nu + 1) / 2) - 0.5 * np.log(s2)
              - (nu + 2) / 2 * np.log1p(q)
              + (nu + 1) / 2 * (np.log1p(x * x / nu) + np.log1p(y * y / nu)))
    if want_h:
        hab = special.stdtr(nu + 1, (x - rho * y) / np.sqrt((nu + y * y) * s2 / (nu + 1)))
        hba = special.stdtr(nu + 1, (y - rho * x) / np.sqrt((nu + x * x) * s2 / (nu + 1)))
    return lp, hab, hba


def _base_clayton(th, a, b, want_pdf, want_h):
    la, lb = np.log(a), np.log(b)
    # log(a^-th + b^-th - 1) without cancellation for small th
    lA = np.log1p(np.expm1(-th * la) + np.expm1(-th * lb))
    lp = hab = hba = None
    if want_pdf:
        lp = np.log1p(th) - (1 + th) * (la + lb) - (2 + 1 / th) * lA
    if want_h:
        hab = np.exp(-(th + 1) * lb - (1 + 1 / th) * lA)
        hba = np.exp(-(th + 1) * la - (1 + 1 / th) * lA)
    return lp, hab, hba


def _base_gumbel(th, a, b, want_pdf, want_h):
    la, lb = np.log(a), np.log(b)
    lx, ly = np.log(-la), np.log(-lb)
    lS = np.logaddexp(th * lx, th * ly)
    A = np.exp(lS / th)
    lp = hab = hba = None
    if want_pdf:
        lp = (-A - la - lb + (th - 1) * (lx + ly) + (1 / th - 2) * lS
              + np.log(A + th - 1))
    if want_h:
        hab = np.exp(-A - lb + (th - 1) * ly + (1 / th - 1) * lS)
        hba = np.exp(-A - la + (th - 1) * lx + (1 / th - 1) * lS)
    return lp, hab, hba


def _frank_D(th, a, b):
    # (1 - e^-th) - (1 - e^-th a)(1 - e^-th b), written as a sum of positives
    return (-np.exp(-th * a) * np.expm1(-th * b)
            - np.exp(-th * b) * np.expm1(-th * (1 - b)))


def _base_frank(th, a, b, want_pdf, want_h):
    # th > 0 here; negative Frank is handled by reflection
    lp = hab = hba = None
    D = _frank_D(th, a, b)
    if want_pdf:
        lp = np.log(th) + np.log(-np.expm1(-th)) - th * (a + b) - 2 * np.log(D)
    if want_h:
        hab = np.exp(-th * b) * (-np.expm1(-th * a)) / D
        hba = np.exp(-th * a) * (-np.expm1(-th * b)) / D
    return lp, hab, hba


def _effective(pc: PairCopula):
    """Map negative Frank to a 90-degree reflection of positive Frank."""
    kind, rot, th = pc.family.kind, pc.family.rotation, pc.theta
    if kind == Kind.FRANK and th < 0:
        return kind, 90, -th
    return kind, rot, th


def _frank_small(th) -> bool:
    return abs(th) < 1e-10


def _reflect(rot, u, v):
    if rot == 0:
        return u, v
    if rot == 90:
        return 1 - u, v
    if rot == 180:
        return 1 - u, 1 - v
    return u, 1 - v


def edge_terms(pc: PairCopula, u, v, want_pdf=True, want_h=True):
    """Evaluate log-density and both h-functions in one pass.

    Returns
    -------
    logpdf : ndarray or None
        ln c(u, v).
    h_uv : ndarray or None
        C(u | v).
    h_vu : ndarray or None
        C(v | u).
    """
    u = clip_unit(u)
    v = clip_unit(v)
    kind, rot, th = _effective(pc)
    if kind == Kind.INDEPENDENCE or (kind == Kind.FRANK and _frank_small(th)):
        lp = np.zeros(np.broadcast(u, v).shape) if want_pdf else None
        if want_h:
            u2, v2 = np.broadcast_arrays(u, v)
            return lp, u2.copy(), v2.copy()
        return lp, None, None
    a, b = _reflect(rot, u, v)
    if kind == Kind.GAUSSIAN:
        lp, hab, hba = _base_gauss(th, a, b, want_pdf, want_h)
    elif kind == Kind.STUDENT_T:
        lp, hab, hba = _base_t(th, pc.nu, a, b, want_pdf, want_h)
    elif kind == Kind.CLAYTON:
        lp, hab, hba = _base_clayton(th, a, b, want_pdf, want_h)
    elif kind == Kind.GUMBEL:
        lp, hab, hba = _base_gumbel(th, a, b, want_pdf, want_h)
    else:
        lp, hab, hba = _base_frank(th, a, b, want_pdf, want_h)
    if not want_h:
        return lp, None, None
    if rot in (90, 180):
        hab = 1 - hab
    if rot in (180, 270):
        hba = 1 - hba
    return lp, np.clip(hab, 0.0, 1.0), np.clip(hba, 0.0, 1.0)


def logpdf(pc: PairCopula, u, v):
    """Log copula density ln c(u, v)."""
    return edge_terms(pc, u, v, want_pdf=True, want_h=False)[0]


def pdf(pc: PairCopula, u, v):
    """Copula density c(u, v)."""
    return np.exp(logpdf(pc, u, v))


def pair_loglik(pc: PairCopula, u, v) -> float:
    """Sum of log-densities over observations."""
    return float(np.sum(logpdf(pc, u, v)))


def hfunc(pc: PairCopula, u, v):
    """Conditional distribution C(u | v)."""
    return edge_terms(pc, u, v, want_pdf=False, want_h=True)[1]


def hfunc2(pc: PairCopula, u, v):
    """Conditional distribution C(v | u)."""
    return edge_terms(pc, u, v, want_pdf=False, want_h=True)[2]


# ---------------------------------------------------------------------------
# inverse h-functions


def _hinv_gumbel(th, p, b):
    # h(a|b) = exp(-z) z^(1-th) y^(th-1) / b with z = (x^th + y^th)^(1/th) >= y.
    # Solve g(z) = -z + (1-th) ln z = c, g convex decreasing, Newton from z = y
    # increases monotonically to the root.
    y = -np.log(b)
    c = np.log(p) - y + (1 - th) * np.log(y)
    z = y.copy()
    for _ in range(200):
        g = -z + (1 - th) * np.log(z) - c
        step = g / (-1 + (1 - th) / z)
        z = z - step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(z, 1.0)):
            break
    else:
        raise ConvergenceError("Gumbel h-inverse did not converge")
    z = np.maximum(z, y)
    # x = (z^th - y^th)^(1/th) = y * ((z/y)^th - 1)^(1/th)
    lx = np.log(y) + np.log(np.expm1(th * np.log(z / y))) / th
    return np.exp(-np.exp(lx))


def _base_hinv(kind, th, nu, p, b):
    if kind == Kind.GAUSSIAN:
        return special.ndtr(special.ndtri(p) * np.sqrt(1 - th * th) + th * special.ndtri(b))
    if kind == Kind.STUDENT_T:
        y = t_quantile(nu, b)
        x = (t_quantile(nu + 1, p) * np.sqrt((nu + y * y) * (1 - th * th) / (nu + 1))
             + th * y)
        return special.stdtr(nu, x)
    if kind == Kind.CLAYTON:
        lb, lp = np.log(b), np.log(p)
        s = np.log1p(np.exp(-th * lb) * np.expm1(-th / (1 + th) * lp))
        return np.exp(-s / th)
    if kind == Kind.GUMBEL:
        return _hinv_gumbel(th, p, b)
    # Frank, th > 0
    r = np.log1p(-p) - np.log(p) - th * b
    return (np.logaddexp(r, 0.0) - np.logaddexp(r, -th)) / th


def hinv(pc: PairCopula, p, v):
    """Inverse of ``hfunc`` in its first argument: solves C(u | v) = p."""
    p = clip_unit(p)
    v = clip_unit(v)
    p, v = np.broadcast_arrays(p, v)
    kind, rot, th = _effective(pc)
    if kind == Kind.INDEPENDENCE or (kind == Kind.FRANK and _frank_small(th)):
        return p.copy()
    b = v if rot in (0, 90) else 1 - v
    q = p if rot in (0, 270) else 1 - p
    a = _base_hinv(kind, th, pc.nu, q, b)
    u = a if rot in (0, 270) else 1 - a
    return np.clip(u, 0.0, 1.0)


def hinv2(pc: PairCopula, p, u):
    """Inverse of ``hfunc2``: solves C(v | u) = p for v."""
    return hinv(swap(pc), p, u)


# ---------------------------------------------------------------------------
# Kendall's tau


def _debye1(x):
    if x == 0:
        return 1.0
    val, _ = integrate.quad(lambda t: t / np.expm1(t) if t != 0 else 1.0, 0.0, x,
                            epsabs=1e-14, epsrel=1e-13)
    return val / x


def _frank_tau(th):
    if abs(th) < 1e-5:
        return th / 9.0
    return 1.0 - 4.0 / th * (1.0 - _debye1(th))


def par_to_tau(family: CopulaFamily, theta: float) -> float:
    """Kendall's tau implied by a family and its first parameter."""
    k = family.kind
    if k == Kind.INDEPENDENCE:
        return 0.0
    if k in _ELLIPTICAL:
        if not -1 < theta < 1:
            raise DomainError("theta must lie in (-1, 1)")
        return float(2 / np.pi * np.arcsin(theta))
    if k == Kind.FRANK:
        return float(_frank_tau(theta))
    if k == Kind.CLAYTON:
        if theta <= 0:
            raise DomainError("Clayton theta must be > 0")
        tau = theta / (theta + 2)
    else:
        if theta < 1:
            raise DomainError("Gumbel theta must be >= 1")
        tau = 1 - 1 / theta
    return float(-tau if family.negative else tau)


def tau_to_par(family: CopulaFamily, tau: float) -> float:
    """First copula parameter matching Kendall's tau.

    Raises
    ------
    DomainError
        If ``|tau|`` exceeds 0.9999 or the sign of ``tau`` does not fit the
        rotation of a Clayton or Gumbel family.
    """
    tau = float(tau)
    if not abs(tau) <= TAU_MAX:
        raise DomainError(f"|tau| too close to 1: {tau}")
    k = family.kind
    if k == Kind.INDEPENDENCE:
        return 0.0
    if k in _ELLIPTICAL:
        return float(np.sin(np.pi * tau / 2))
    if k == Kind.FRANK:
        if tau == 0:
            raise DomainError("Frank cannot represent tau = 0")
        if abs(tau) < 1e-6:
            return 9.0 * tau
        sgn = np.sign(tau)
        lo, hi = 1e-8, FRANK_MAX
        if abs(tau) >= _frank_tau(hi):
            return float(sgn * hi)
        th = optimize.brentq(lambda t: _frank_tau(t) - abs(tau), lo, hi, xtol=1e-10, rtol=1e-14)
        return float(sgn * th)
    if (tau < 0 and not family.negative) or (tau > 0 and family.negative):
        raise DomainError(f"tau = {tau} incompatible with {family}")
    a = abs(tau)
    if k == Kind.CLAYTON:
        return float(max(2 * a / (1 - a), CLAYTON_MIN))
    return float(1 / (1 - a))


def absorb_sign(family: CopulaFamily, tau: float) -> CopulaFamily:
    """Rotate a Clayton/Gumbel family so it can carry the sign of ``tau``."""
    if family.kind not in _ROTATABLE:
        return family
    if tau < 0 and not family.negative:
        return CopulaFamily(family.kind, family.rotation + 90)
    if tau > 0 and family.negative:
        return CopulaFamily(family.kind, family.rotation - 90)
    return family


def empirical_tau(x, y) -> float:
    """Kendall's tau-b of two samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y must be 1-d and of equal length")
    if x.size < 2:
        raise DomainError("need at least two observations")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DomainError("Kendall's tau undefined for a constant vector")
    return float(stats.kendalltau(x, y).statistic)


def fisher_z(r):
    """Fisher z-transform 0.5 ln((1 + r)/(1 - r))."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) >= 1):
        raise DomainError("Fisher z needs |r| < 1")
    out = np.arctanh(r)
    return float(out) if out.ndim == 0 else out


def fisher_z_inv(z):
    """Inverse Fisher z-transform (tanh)."""
    out = np.tanh(np.asarray(z, dtype=float))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IndependenceResult:
    independent: bool
    statistic: float


def independence_statistic(tau: float, n: int) -> float:
    return abs(tau) * np.sqrt(9 * n * (n - 1) / (2 * (2 * n + 5)))


def independence_test(u, v, alpha: float = 0.05) -> IndependenceResult:
    """Asymptotic test of independence based on Kendall's tau.

    The statistic is ``|tau| sqrt(9n(n-1) / (2(2n+5)))``; independence is
    accepted when it does not exceed the normal ``1 - alpha/2`` quantile.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    if n < 10:
        raise DomainError("independence test needs at least 10 observations")
    T = float(independence_statistic(empirical_tau(u, v), n))
    return IndependenceResult(T <= special.ndtri(1 - alpha / 2), T)


# ---------------------------------------------------------------------------
# estimation


def _start_theta(family: CopulaFamily, tau: float) -> float:
    k = family.kind
    tau = float(np.clip(tau, -0.95, 0.95))
    if k in _ROTATABLE:
        if (tau < 0) != family.negative or abs(tau) < 0.02:
            tau = -0.05 if family.negative else 0.05
    if k == Kind.FRANK and abs(tau) < 0.02:
        tau = 0.02 if tau >= 0 else -0.02
    return tau_to_par(family, tau)


def _bounds(family: CopulaFamily):
    k = family.kind
    if k in _ELLIPTICAL:
        return (-RHO_MAX, RHO_MAX)
    if k == Kind.CLAYTON:
        return (1e-6, 100.0)
    if k == Kind.GUMBEL:
        return (1.0, 50.0)
    return (-FRANK_MAX, FRANK_MAX)


def _make(family, theta, nu=None):
    if family.kind == Kind.FRANK and theta == 0:
        theta = 1e-12
    return PairCopula(family, theta, nu)


def fit_pair(family: CopulaFamily, u, v) -> PairCopula:
    """Maximum-likelihood fit of one family to copula data.

    The first parameter starts from the inversion of the empirical
    Kendall's tau; StudentT degrees of freedom start at 10 and are bounded
    to (2, 100].
    """
    u = clip_unit(u)
    v = clip_unit(v)
    if family.kind == Kind.INDEPENDENCE:
        return PairCopula(INDEPENDENCE)
    n = u.size
    th0 = _start_theta(family, empirical_tau(u, v))
    lo, hi = _bounds(family)
    th0 = float(np.clip(th0, lo, hi))

    if family.kind == Kind.STUDENT_T:
        # search on (atanh rho, ln nu); strong dependence is badly scaled in rho
        def nll(x):
            lp = logpdf(PairCopula(family, np.tanh(x[0]), np.exp(x[1])), u, v)
            s = np.sum(lp)
            return -s / n if np.isfinite(s) else 1e10
        x0 = np.array([np.arctanh(th0), np.log(10.0)])
        res = optimize.minimize(nll, x0, method="L-BFGS-B",
                                bounds=[(np.arctanh(lo), np.arctanh(hi)),
                                        (np.log(NU_MIN), np.log(NU_MAX))])
        x = res.x if res.fun <= nll(x0) else x0
        if not np.all(np.isfinite(x)):
            raise ConvergenceError(f"StudentT fit failed: {res.message}")
        return PairCopula(family, float(np.tanh(x[0])), float(np.clip(np.exp(x[1]), NU_MIN, NU_MAX)))

    def nll1(x):
        try:
            pc = _make(family, x[0])
        except DomainError:
            return 1e10
        s = np.sum(logpdf(pc, u, v))
        return -s / n if np.isfinite(s) else 1e10
    x0 = np.array([th0])
    res = optimize.minimize(nll1, x0, method="L-BFGS-B", bounds=[(lo, hi)])
    x = res.x if res.fun <= nll1(x0) else x0
    if not np.isfinite(x[0]):
        raise ConvergenceError(f"{family} fit failed: {res.message}")
    return _make(family, float(x[0]))


def _orient(family: CopulaFamily, tau: float) -> CopulaFamily:
    return absorb_sign(family, tau if tau != 0 else 1.0)


def select_family(u, v, candidates: Iterable[CopulaFamily] | None = None,
                  alpha: float = 0.05) -> PairCopula:
    """Pick a pair copula by an independence pre-test and AIC.

    Clayton and Gumbel candidates are rotated to match the sign of the
    empirical tau. Ties in AIC keep the earlier candidate.
    """
    cands = list(DEFAULT_CANDIDATES if candidates is None else candidates)
    if not cands:
        raise DomainError("empty candidate set")
    if independence_test(u, v, alpha).independent:
        return PairCopula(INDEPENDENCE)
    tau = empirical_tau(u, v)
    seen: list[CopulaFamily] = []
    for fam in cands:
        fam = _orient(fam, tau)
        if fam not in seen:
            seen.append(fam)
    best, best_aic = None, np.inf
    for fam in seen:
        pc = fit_pair(fam, u, v)
        aic = -2 * pair_loglik(pc, u, v) + 2 * nparams(pc)
        if aic < best_aic:
            best, best_aic = pc, aic
    return best


def simulate_pair(pc: PairCopula, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` pairs (u, v) from a pair copula; returns an (n, 2) array."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(size=(n, 2))
    u = w[:, 0]
    v = hinv2(pc, w[:, 1], u)
    return np.column_stack([u, v])
