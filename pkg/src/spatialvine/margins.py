"""Joint marginal model for daily station temperatures.

Temperatures are divided by the square root of a smoothed cross-station
variance ``w_t``. The weighted series follows a seasonal AR(3) model whose
coefficients are polynomials in standardized (elevation, longitude,
latitude); errors are skew-t with spatially varying parameters. Residuals
are mapped to copula data by the skew-t distribution function, and the back
transformation rolls the recursion forward from simulated copula values.

Time runs over ``t = 1..N``; residuals and copula data exist for ``t >= 4``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize, special

from ._common import ConvergenceError, DomainError, FitResult, ValidationError
from .stations import Stations

# (group, (elev degree, lon degree, lat degree)); each group has an intercept
BETA_DEGREES = (
    ("beta0", (1, 0, 1)),
    ("beta_s", (4, 1, 6)),
    ("beta_c", (6, 2, 1)),
    ("gamma1", (1, 2, 6)),
    ("gamma2", (1, 2, 6)),
    ("gamma3", (0, 4, 7)),
)
ETA_DEGREES = (
    ("xi", (1, 2, 1)),
    ("omega", (3, 1, 6)),
    ("alpha", (4, 2, 1)),
    ("nu", (2, 2, 4)),
)
N_BETA = 57
N_ETA = 33
WEIGHT_DEGREE = 9
VAR_FLOOR = 1e-8
YEAR = 365.25
AR_ORDER = 3
# |z| beyond which start-value predictions count as extrapolation
EXTRAPOLATION_Z = 3.0


def group_size(deg) -> int:
    return 1 + sum(deg)


def _sizes(table):
    return [group_size(d) for _, d in table]


assert sum(_sizes(BETA_DEGREES)) == N_BETA
assert sum(_sizes(ETA_DEGREES)) == N_ETA


def _slices(table):
    out, k = {}, 0
    for name, deg in table:
        out[name] = slice(k, k + group_size(deg))
        k += group_size(deg)
    return out


BETA_SLICES = _slices(BETA_DEGREES)
ETA_SLICES = _slices(ETA_DEGREES)


@dataclass(frozen=True)
class StandardizationRecord:
    """Center and scale of (elev, lon, lat) used before polynomial expansion."""

    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def from_stations(cls, st: Stations) -> "StandardizationRecord":
        X = st.covariates()
        sd = X.std(axis=0, ddof=1) if len(st) > 1 else np.ones(3)
        sd = np.where(sd > 0, sd, 1.0)
        return cls(X.mean(axis=0), sd)

    def apply(self, st: Stations | np.ndarray) -> np.ndarray:
        X = st.covariates() if isinstance(st, Stations) else np.atleast_2d(st)
        return (X - self.center) / self.scale


def poly_features(Z: np.ndarray, deg) -> np.ndarray:
    """Intercept plus separate powers of each standardized covariate.

    Column order: 1, elev^1..elev^a, lon^1..lon^b, lat^1..lat^c.
    """
    Z = np.atleast_2d(Z)
    cols = [np.ones(Z.shape[0])]
    for c, p in enumerate(deg):
        for k in range(1, p + 1):
            cols.append(Z[:, c] ** k)
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightPoly:
    """Degree-9 polynomial for ln(w_t), stored in numpy's scaled domain."""

    coef: np.ndarray
    domain: np.ndarray

    def log_weight(self, t) -> np.ndarray:
        return Polynomial(self.coef, domain=self.domain)(np.asarray(t, dtype=float))

    def __call__(self, t) -> np.ndarray:
        return np.exp(self.log_weight(t))


def compute_weights(temps: np.ndarray) -> tuple[WeightPoly, np.ndarray]:
    """Smoothed cross-station variance weights.

    The raw weight is the sample variance across stations at each day,
    floored at 1e-8; a degree-9 least-squares polynomial is fitted to its
    logarithm.

    Returns
    -------
    poly : WeightPoly
    w_hat : ndarray, shape (N,)
        ``exp(q(t))`` for ``t = 1..N``.
    """
    temps = np.asarray(temps, dtype=float)
    if temps.ndim != 2 or temps.shape[1] < 2:
        raise DomainError("need an N x d matrix with d >= 2")
    raw = np.maximum(temps.var(axis=1, ddof=1), VAR_FLOOR)
    t = np.arange(1, temps.shape[0] + 1, dtype=float)
    deg = min(WEIGHT_DEGREE, temps.shape[0] - 1)
    p = Polynomial.fit(t, np.log(raw), deg)
    poly = WeightPoly(np.asarray(p.coef), np.asarray(p.domain))
    return poly, poly(t)


# ---------------------------------------------------------------------------
# parameters


@dataclass
class MarginalParams:
    """Fitted marginal model.

    Attributes
    ----------
    beta : ndarray (57,)
        Mean coefficients grouped per ``BETA_DEGREES``.
    eta : ndarray (33,)
        Skew-t coefficients grouped per ``ETA_DEGREES``; omega and nu use
        an exp link.
    std : StandardizationRecord
    weights : WeightPoly
    start_coef : ndarray (3, 4)
        Linear models of the first three days' temperatures on
        (1, elev, lon, lat), standardized covariates.
    n_days : int
    """

    beta: np.ndarray
    eta: np.ndarray
    std: StandardizationRecord
    weights: WeightPoly
    start_coef: np.ndarray = field(default_factory=lambda: np.zeros((3, 4)))
    n_days: int = 0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        if self.beta.shape != (N_BETA,):
            raise DomainError(f"beta must have {N_BETA} entries, got {self.beta.shape}")
        if self.eta.shape != (N_ETA,):
            raise DomainError(f"eta must have {N_ETA} entries, got {self.eta.shape}")
        self.start_coef = np.asarray(self.start_coef, dtype=float).reshape(3, 4)

    def w_hat(self, n_days: int | None = None) -> np.ndarray:
        n = n_days or self.n_days
        return self.weights(np.arange(1, n + 1))


def _agg(table, slices, coef, Z):
    return {name: poly_features(Z, deg) @ coef[slices[name]] for name, deg in table}


def eval_aggregated(params: MarginalParams, stations: Stations | np.ndarray,
                    standardized: bool = False) -> dict:
    """Per-station coefficient values.

    Returns a dict of arrays keyed ``beta0, beta_s, beta_c, gamma1, gamma2,
    gamma3, xi, omega, alpha, nu``; omega and nu are on the natural scale.
    """
    Z = np.atleast_2d(stations) if standardized else params.std.apply(stations)
    out = _agg(BETA_DEGREES, BETA_SLICES, params.beta, Z)
    sk = _agg(ETA_DEGREES, ETA_SLICES, params.eta, Z)
    sk["omega"] = np.exp(sk["omega"])
    sk["nu"] = np.exp(sk["nu"])
    out.update(sk)
    return out


# ---------------------------------------------------------------------------
# mean model


def seasonal(t) -> tuple[np.ndarray, np.ndarray]:
    a = 2 * np.pi * np.asarray(t, dtype=float) / YEAR
    return np.sin(a), np.cos(a)


def design_matrix(ytilde: np.ndarray, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stacked OLS design for t >= 4.

    Rows are ordered time-major within station blocks: station 0 for
    t = 4..N, then station 1, and so on.
    """
    N, d = ytilde.shape
    if N <= AR_ORDER:
        raise DomainError("series too short for the AR(3) mean")
    t = np.arange(AR_ORDER + 1, N + 1)
    s, c = seasonal(t)
    blocks, ys = [], []
    feats = {name: poly_features(Z, deg) for name, deg in BETA_DEGREES}
    for k in range(d):
        y = ytilde[:, k]
        parts = [
            np.broadcast_to(feats["beta0"][k], (t.size, feats["beta0"].shape[1])),
            s[:, None] * feats["beta_s"][k],
            c[:, None] * feats["beta_c"][k],
            y[2:N - 1, None] * feats["gamma1"][k],
            y[1:N - 2, None] * feats["gamma2"][k],
            y[0:N - 3, None] * feats["gamma3"][k],
        ]
        blocks.append(np.hstack(parts))
        ys.append(y[AR_ORDER:])
    X = np.vstack(blocks)
    assert X.shape[1] == N_BETA
    return X, np.concatenate(ys)


def _check_rank(X):
    k = 0
    prev = 0
    for name, deg in BETA_DEGREES:
        k += group_size(deg)
        r = np.linalg.matrix_rank(X[:, :k])
        if r < k:
            raise ValidationError(f"design is rank deficient in column group {name!r} "
                                  f"(rank {r} of {k} columns)")
        prev = r
    return prev


def fit_mean(ytilde: np.ndarray, stations: Stations, std: StandardizationRecord):
    """OLS estimate of the 57 mean coefficients.

    Parameters
    ----------
    ytilde : ndarray (N, d)
        Weighted temperatures ``y / sqrt(w_hat)``.

    Returns
    -------
    beta : ndarray (57,)
    residuals : ndarray (N - 3, d)
        Residuals for t = 4..N.
    """
    ytilde = np.asarray(ytilde, dtype=float)
    N, d = ytilde.shape
    if N < 60:
        raise DomainError("fit_mean needs at least 60 days")
    Z = std.apply(stations)
    X, y = design_matrix(ytilde, Z)
    _check_rank(X)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = (y - X @ beta).reshape(d, N - AR_ORDER).T
    return beta, res


def mean_step(agg: dict, t, y1, y2, y3):
    """One step of the conditional mean given the three previous values."""
    s, c = seasonal(t)
    return (agg["beta0"] + agg["beta_s"] * s + agg["beta_c"] * c
            + agg["gamma1"] * y1 + agg["gamma2"] * y2 + agg["gamma3"] * y3)


# ---------------------------------------------------------------------------
# skew-t distribution


def _t_logpdf(z, nu):
    return (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
            - 0.5 * np.log(nu * np.pi) - (nu + 1) / 2 * np.log1p(z * z / nu))


def _std_logpdf(z, alpha, nu):
    arg = alpha * z * np.sqrt((nu + 1) / (nu + z * z))
    return np.log(2.0) + _t_logpdf(z, nu) + np.log(special.stdtr(nu + 1, arg))


def skewt_logpdf(x, xi, omega, alpha, nu):
    """Log-density of the skew-t distribution (broadcasting)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or np.any(np.asarray(nu) <= 0):
        raise DomainError("omega and nu must be positive")
    z = (np.asarray(x, dtype=float) - xi) / omega
    return _std_logpdf(z, alpha, nu) - np.log(omega)


def skewt_pdf(x, xi=0.0, omega=1.0, alpha=0.0, nu=10.0):
    """Skew-t density ``(2/omega) t_nu(z) T_{nu+1}(alpha z sqrt((nu+1)/(nu+z^2)))``."""
    return np.exp(skewt_logpdf(x, xi, omega, alpha, nu))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GRID = 1024


def _g(phi, alpha, nu):
    # skew-t density in phi = arctan(z), including the Jacobian sec^2
    z = np.tan(phi)
    return np.exp(_std_logpdf(z, alpha, nu)) / np.cos(phi) ** 2


def _gl(a, b, alpha, nu):
    """Gauss-Legendre integral of _g from a to b (elementwise)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = (b - a) / 2
    mid = (b + a) / 2
    pts = mid[..., None] + half[..., None] * _GL_X
    return half * np.sum(_GL_W * _g(pts, alpha, nu), axis=-1)


class _SkewTTable:
    """Cumulative skew-t probabilities on a grid of phi = arctan(z)."""

    def __init__(self, alpha: float, nu: float):
        self.alpha, self.nu = alpha, nu
        h = np.pi / _GRID
        self.h = h
        self.phi = -np.pi / 2 + h * np.arange(_GRID + 1)
        f = lambda z: np.exp(_std_logpdf(z, alpha, nu))
        lo_tail, _ = integrate.quad(f, -np.inf, np.tan(self.phi[1]), epsabs=1e-15, epsrel=1e-12, limit=200)
        hi_tail, _ = integrate.quad(f, np.tan(self.phi[-2]), np.inf, epsabs=1e-15, epsrel=1e-12, limit=200)
        inner = _gl(self.phi[1:-2], self.phi[2:-1], alpha, nu)
        cum = np.empty(_GRID + 1)
        cum[0] = 0.0
        cum[1] = lo_tail
        cum[2:-1] = lo_tail + np.cumsum(inner)
        cum[-1] = cum[-2] + hi_tail
        self.cum = cum
        self.total = cum[-1]
        if abs(self.total - 1.0) > 1e-7:
            raise ConvergenceError(f"skew-t quadrature lost mass: total {self.total}")
        self._f = f

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        phi = np.arctan(z)
        k = np.clip(((phi - self.phi[0]) / self.h).astype(int), 0, _GRID - 1)
        out = np.empty_like(phi)
        inner = (k >= 1) & (k <= _GRID - 2)
        out[inner] = self.cum[k[inner]] + _gl(self.phi[k[inner]], phi[inner], self.alpha, self.nu)
        for idx in np.flatnonzero(~inner & np.isfinite(z)):
            zz = z.flat[idx]
            if zz < 0:
                out.flat[idx] = integrate.quad(self._f, -np.inf, zz, epsabs=1e-15, epsrel=1e-12)[0]
            else:
                out.flat[idx] = self.total - integrate.quad(self._f, zz, np.inf, epsabs=1e-15, epsrel=1e-12)[0]
        out[np.isneginf(z)] = 0.0
        out[np.isposinf(z)] = self.total
        return np.clip(out, 0.0, 1.0)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        k = np.clip(np.searchsorted(self.cum, p, side="right") - 1, 0, _GRID - 1)
        z = np.empty_like(p)
        inner = (k >= 1) & (k <= _GRID - 2)
        if np.any(inner):
            kk = k[inner]
            pp = p[inner]
            lo = self.phi[kk].copy()
            hi = self.phi[kk + 1].copy()
            base = self.cum[kk]
            frac = (pp - base) / (self.cum[kk + 1] - base)
            phi = lo + np.clip(frac, 0.0, 1.0) * (hi - lo)
            node = self.phi[kk]
            act = np.arange(pp.size)
            for _ in range(60):
                G = base[act] + _gl(node[act], phi[act], self.alpha, self.nu) - pp[act]
                lo[act] = np.where(G < 0, phi[act], lo[act])
                hi[act] = np.where(G > 0, phi[act], hi[act])
                new = phi[act] - G / _g(phi[act], self.alpha, self.nu)
                bad = ~((new > lo[act]) & (new < hi[act]))
                new = np.where(bad, (lo[act] + hi[act]) / 2, new)
                done = (np.abs(G) <= 1e-14) | (np.abs(new - phi[act]) <= 1e-15)
                phi[act] = np.where(np.abs(G) <= 1e-14, phi[act], new)
                act = act[~done]
                if act.size == 0:
                    break
            else:
                raise ConvergenceError("skew-t quantile did not converge")
            z[inner] = np.tan(phi)
        for idx in np.flatnonzero(~inner):
            pp = p.flat[idx]
            if k.flat[idx] == 0:
                b = np.tan(self.phi[1])
                a = 2 * b
                while self.cdf(a) > pp:
                    a *= 2
            else:
                a = np.tan(self.phi[-2])
                b = 2 * a
                while self.cdf(b) < pp:
                    b *= 2
            z.flat[idx] = optimize.brentq(lambda x: float(self.cdf(np.array([x]))[0]) - pp,
                                          a, b, xtol=1e-14, rtol=1e-15)
        return z


@lru_cache(maxsize=256)
def _table(alpha: float, nu: float) -> _SkewTTable:
    return _SkewTTable(alpha, nu)


def _check(omega, nu):
    if omega <= 0 or nu <= 0:
        raise DomainError("omega and nu must be positive")


def skewt_cdf(x, xi=0.0, omega=1.0, alpha=0.0, nu=10.0):
    """Skew-t distribution function by cached quadrature (scalar parameters)."""
    _check(omega, nu)
    z = (np.asarray(x, dtype=float) - xi) / omega
    out = _table(float(alpha), float(nu)).cdf(np.atleast_1d(z)).reshape(z.shape)
    return float(out) if out.ndim == 0 else out


def skewt_quantile(q, xi=0.0, omega=1.0, alpha=0.0, nu=10.0):
    """Inverse of :func:`skewt_cdf`."""
    _check(omega, nu)
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)):
        raise DomainError("quantile levels must lie in (0, 1)")
    z = _table(float(alpha), float(nu)).quantile(np.atleast_1d(q)).reshape(q.shape)
    out = xi + omega * z
    return float(out) if np.ndim(out) == 0 else out


def skewt_rvs(size, xi=0.0, omega=1.0, alpha=0.0, nu=10.0, seed=None):
    """Random draws via the skew-normal over chi-square representation."""
    rng = np.random.default_rng(seed)
    delta = alpha / np.sqrt(1 + alpha * alpha)
    u0 = np.abs(rng.standard_normal(size))
    u1 = rng.standard_normal(size)
    zsn = delta * u0 + np.sqrt(1 - delta * delta) * u1
    w = rng.chisquare(nu, size) / nu
    return xi + omega * zsn / np.sqrt(w)


def skewt_mean_offset(alpha, nu):
    """Mean of the standardized skew-t: delta sqrt(nu/pi) G((nu-1)/2)/G(nu/2).

    ``delta = alpha / sqrt(1 + alpha^2)`` keeps the sign of ``alpha``.
    """
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 1):
        raise DomainError("the skew-t mean needs nu > 1")
    alpha = np.asarray(alpha, dtype=float)
    delta = alpha / np.sqrt(1 + alpha * alpha)
    out = delta * np.sqrt(nu / np.pi) * np.exp(special.gammaln((nu - 1) / 2) - special.gammaln(nu / 2))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# skew-t pseudo-likelihood


def _pooled_skewt(x: np.ndarray):
    x = x.ravel()
    sd = x.std()

    def nll(p):
        v = _std_logpdf((x - p[0]) / np.exp(p[1]), p[2], np.exp(p[3])) - p[1]
        s = -np.mean(v)
        return s if np.isfinite(s) else 1e10
    best = None
    for a0 in (0.0, 1.0, -1.0):
        r = optimize.minimize(nll, [np.median(x), np.log(sd), a0, np.log(10.0)],
                              method="L-BFGS-B",
                              bounds=[(None, None), (None, None), (-20, 20), (np.log(0.5), np.log(500))])
        if best is None or r.fun < best.fun:
            best = r
    return best.x


def fit_skewt(residuals: np.ndarray, stations: Stations, std: StandardizationRecord,
              maxiter: int = 2000, freeze_higher: bool = False) -> FitResult:
    """Pseudo-likelihood fit of the 33 skew-t coefficients.

    Starts from a pooled fit of (xi, ln omega, alpha, ln nu) placed in the
    group intercepts with all other coefficients zero. With
    ``freeze_higher`` only the intercepts are estimated.

    Returns
    -------
    FitResult
        ``params`` is eta (33,).
    """
    R = np.asarray(residuals, dtype=float)
    Z = std.apply(stations)
    feats = [poly_features(Z, deg) for _, deg in ETA_DEGREES]
    sl = [ETA_SLICES[n] for n, _ in ETA_DEGREES]
    count = R.size
    pooled = _pooled_skewt(R)
    eta0 = np.zeros(N_ETA)
    for g in range(4):
        eta0[sl[g].start] = pooled[g]
    free = np.array([s.start for s in sl]) if freeze_higher else np.arange(N_ETA)

    def unpack(x):
        eta = eta0.copy()
        eta[free] = x
        return eta

    def per_station(eta):
        return [F @ eta[s] for F, s in zip(feats, sl)]

    def terms(a):
        xi, lo, al, ln = a
        return _std_logpdf((R - xi) / np.exp(lo), al, np.exp(ln)) - lo

    def fun(x):
        eta = unpack(x)
        a = per_station(eta)
        v = terms(a)
        f = -np.sum(v) / count
        if not np.isfinite(f):
            return 1e10, np.zeros_like(x)
        grad = np.zeros(N_ETA)
        hstep = 1e-6
        for g in range(4):
            ap = list(a)
            am = list(a)
            ap[g] = a[g] + hstep
            am[g] = a[g] - hstep
            dg = (terms(ap).sum(axis=0) - terms(am).sum(axis=0)) / (2 * hstep)
            grad[sl[g]] = -(feats[g].T @ dg) / count
        return f, grad[free]

    x0 = eta0[free]
    f0 = fun(x0)[0]
    res = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "ftol": 1e-7, "gtol": 1e-8})
    x = res.x if res.fun <= f0 else x0
    return FitResult(unpack(x), -min(res.fun, f0) * count, -f0 * count, bool(res.success),
                     str(res.message), int(res.nit))


# ---------------------------------------------------------------------------
# copula data and back transformation


def station_skewt(params: MarginalParams, stations, standardized=False, zero_mean=False):
    """(xi, omega, alpha, nu) arrays per station."""
    a = eval_aggregated(params, stations, standardized)
    xi = a["xi"]
    if zero_mean:
        xi = -a["omega"] * skewt_mean_offset(a["alpha"], a["nu"])
    return np.atleast_1d(xi), np.atleast_1d(a["omega"]), np.atleast_1d(a["alpha"]), np.atleast_1d(a["nu"])


def to_copula_data(residuals: np.ndarray, params: MarginalParams, stations: Stations) -> np.ndarray:
    """Probability integral transform of residuals with station skew-t laws."""
    R = np.asarray(residuals, dtype=float)
    xi, om, al, nu = station_skewt(params, stations)
    U = np.empty_like(R)
    for k in range(R.shape[1]):
        U[:, k] = skewt_cdf(R[:, k], xi[k], om[k], al[k], nu[k])
    return U


def start_value_models(temps: np.ndarray, stations: Stations, std: StandardizationRecord) -> np.ndarray:
    """Per-day linear models of the first three days' temperatures.

    Returns a (3, 4) coefficient array on (1, elev, lon, lat) standardized.
    """
    X = np.column_stack([np.ones(len(stations)), std.apply(stations)])
    coef, *_ = np.linalg.lstsq(X, np.asarray(temps, dtype=float)[:AR_ORDER].T, rcond=None)
    return coef.T


def start_values(params: MarginalParams, station: Stations) -> np.ndarray:
    """Predicted temperatures for t = 1, 2, 3 at a station (shape (3,)).

    Warns when a standardized covariate exceeds ``EXTRAPOLATION_Z`` in
    absolute value: the linear models then extrapolate.
    """
    z = params.std.apply(station)[0]
    if np.any(np.abs(z) > EXTRAPOLATION_Z):
        warnings.warn(f"start values extrapolate: standardized covariates {np.round(z, 2).tolist()}",
                      RuntimeWarning, stacklevel=2)
    x = np.concatenate([[1.0], z])
    return params.start_coef @ x


def residuals_from_copula(u: np.ndarray, params: MarginalParams, station: Stations,
                          zero_mean: bool = True) -> np.ndarray:
    """Skew-t quantiles of copula draws at one station.

    With ``zero_mean`` the location is set to ``-omega * mu(alpha, nu)`` so
    the residuals have mean zero.
    """
    xi, om, al, nu = (v[0] for v in station_skewt(params, station, zero_mean=zero_mean))
    u = np.asarray(u, dtype=float)
    return skewt_quantile(np.clip(u, 1e-15, 1 - 1e-15), xi, om, al, nu)


def reconstruct(eps: np.ndarray, params: MarginalParams, station: Stations,
                start_temps=None, w_hat=None) -> np.ndarray:
    """Roll the AR recursion forward from residual paths.

    Parameters
    ----------
    eps : ndarray (N - 3,) or (N - 3, n)
        Residuals for t = 4..N (columns are independent draws).
    start_temps : array-like (3,), optional
        Temperatures for t = 1..3; the start-value linear models are used
        when omitted.
    w_hat : ndarray (N,), optional
        Smoothed weights; evaluated from the weight polynomial by default.

    Returns
    -------
    ndarray (N,) or (N, n)
        Temperatures on the original scale for t = 1..N.
    """
    eps = np.asarray(eps, dtype=float)
    squeeze = eps.ndim == 1
    E = eps[:, None] if squeeze else eps
    N = E.shape[0] + AR_ORDER
    w = params.w_hat(N) if w_hat is None else np.asarray(w_hat, dtype=float)
    sw = np.sqrt(w)
    agg = eval_aggregated(params, station)
    agg = {k: float(np.atleast_1d(v)[0]) for k, v in agg.items()}
    y0 = start_values(params, station) if start_temps is None else np.asarray(start_temps, float)
    yt = np.empty((N, E.shape[1]))
    yt[:AR_ORDER] = (y0 / sw[:AR_ORDER])[:, None]
    for t in range(AR_ORDER, N):
        yt[t] = mean_step(agg, t + 1, yt[t - 1], yt[t - 2], yt[t - 3]) + E[t - AR_ORDER]
    out = yt * sw[:, None]
    return out[:, 0] if squeeze else out


def back_transform(copula_sims: np.ndarray, params: MarginalParams, station: Stations,
                   start_temps=None, zero_mean: bool = True, w_hat=None) -> np.ndarray:
    """Map copula draws at a station back to temperatures.

    ``copula_sims`` has shape (N - 3,) or (N - 3, n) for t = 4..N.
    """
    eps = residuals_from_copula(copula_sims, params, station, zero_mean)
    return reconstruct(eps, params, station, start_temps, w_hat)


def compute_residuals(temps: np.ndarray, params: MarginalParams, stations: Stations,
                      w_hat=None) -> np.ndarray:
    """Mean-model residuals for t = 4..N under fitted parameters."""
    temps = np.asarray(temps, dtype=float)
    N = temps.shape[0]
    w = params.w_hat(N) if w_hat is None else np.asarray(w_hat, dtype=float)
    yt = temps / np.sqrt(w)[:, None]
    agg = eval_aggregated(params, stations)
    t = np.arange(AR_ORDER + 1, N + 1)[:, None]
    mean = mean_step(agg, t, yt[2:N - 1], yt[1:N - 2], yt[0:N - 3])
    return yt[AR_ORDER:] - mean


# ---------------------------------------------------------------------------
# full two-step fit


@dataclass
class MarginFit:
    params: MarginalParams
    residuals: np.ndarray
    copula_data: np.ndarray
    skewt_fit: FitResult
    w_hat: np.ndarray


def fit_margins(temps: np.ndarray, stations: Stations, maxiter: int = 2000) -> MarginFit:
    """Weights, mean OLS, skew-t pseudo-likelihood and copula data."""
    temps = np.asarray(temps, dtype=float)
    std = StandardizationRecord.from_stations(stations)
    poly, w = compute_weights(temps)
    yt = temps / np.sqrt(w)[:, None]
    beta, res = fit_mean(yt, stations, std)
    sk = fit_skewt(res, stations, std, maxiter=maxiter)
    params = MarginalParams(beta, sk.params, std, poly,
                            start_value_models(temps, stations, std), temps.shape[0])
    U = to_copula_data(res, params, stations)
    return MarginFit(params, res, U, sk, w)


# ---------------------------------------------------------------------------
# persistence


def _fmt(a) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(a))


def save_margins(path, params: MarginalParams) -> None:
    """Plain-text model file; one ``key values...`` line per field."""
    lines = ["# marginal model", f"n_days {params.n_days}",
             "beta_degrees " + " ".join(f"{n}:{a},{b},{c}" for n, (a, b, c) in BETA_DEGREES),
             "eta_degrees " + " ".join(f"{n}:{a},{b},{c}" for n, (a, b, c) in ETA_DEGREES),
             "beta " + _fmt(params.beta), "eta " + _fmt(params.eta),
             "std_center " + _fmt(params.std.center), "std_scale " + _fmt(params.std.scale),
             "weight_coef " + _fmt(params.weights.coef),
             "weight_domain " + _fmt(params.weights.domain),
             "start_coef " + _fmt(params.start_coef)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_margins(path) -> MarginalParams:
    rec = {}
    with open(path) as fh:
        for ln in fh:
            if ln.startswith("#") or not ln.strip():
                continue
            k, *v = ln.split()
            rec[k] = v
    arr = lambda k: np.array([float(x) for x in rec[k]])
    return MarginalParams(arr("beta"), arr("eta"),
                          StandardizationRecord(arr("std_center"), arr("std_scale")),
                          WeightPoly(arr("weight_coef"), arr("weight_domain")),
                          arr("start_coef").reshape(3, 4), int(rec["n_days"][0]))
