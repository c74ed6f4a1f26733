"""Spatial Gaussian baseline with a Gaussian variogram.

The variogram is ``gamma(h) = s (1 - exp(-h^2 / rho^2)) + eta 1(h > 0)`` and
the covariance ``Sigma_ij = sigma^2 - gamma(d_ij)`` with
``sigma^2 = eta + s``. Residual vectors are modelled as i.i.d. over time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from ._common import DomainError, FitResult

LOG2PI = np.log(2 * np.pi)
PENALTY = -1e12


@dataclass(frozen=True)
class VariogramParams:
    """Nugget ``eta``, partial sill ``sill`` and range ``rho`` (km)."""

    eta: float
    sill: float
    rho: float

    def __post_init__(self):
        if self.eta < 0 or self.sill <= 0 or self.rho <= 0:
            raise DomainError("need eta >= 0, sill > 0 and rho > 0")

    @property
    def sigma2(self) -> float:
        return self.eta + self.sill


def variogram(h, p: VariogramParams):
    """Gaussian variogram with nugget."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise DomainError("lag must be nonnegative")
    out = p.sill * -np.expm1(-(h / p.rho) ** 2) + p.eta * (h > 0)
    return float(out) if out.ndim == 0 else out


def covariance(distances, p: VariogramParams, check: bool = True) -> np.ndarray:
    """Covariance matrix ``sigma^2 - gamma(d)``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``check`` and the matrix is not positive definite.
    """
    D = np.atleast_2d(np.asarray(distances, dtype=float))
    S = p.sigma2 - variogram(D, p)
    if check:
        np.linalg.cholesky(S)
    return S


def sg_loglik(p: VariogramParams, residuals, distances) -> float:
    """Gaussian log-likelihood of residual rows, one Cholesky per call.

    Returns a large negative value if the covariance is not positive
    definite.
    """
    R = np.atleast_2d(np.asarray(residuals, dtype=float))
    S = covariance(distances, p, check=False)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return PENALTY
    N, d = R.shape
    Y = linalg.solve_triangular(L, R.T, lower=True)
    logdet = 2 * np.sum(np.log(np.diag(L)))
    return float(-0.5 * (N * (d * LOG2PI + logdet) + np.sum(Y * Y)))


def start_params(residuals, distances) -> VariogramParams:
    """Heuristic start: 10% nugget, 90% sill, median pairwise distance range."""
    R = np.asarray(residuals, dtype=float)
    v = float(np.var(R))
    D = np.asarray(distances, dtype=float)
    off = D[np.triu_indices_from(D, 1)]
    rho = float(np.median(off)) if off.size else 1.0
    return VariogramParams(0.1 * v, 0.9 * v, max(rho, 1e-3))


def fit_sg(residuals, distances, start: VariogramParams | None = None) -> tuple[VariogramParams, FitResult]:
    """Maximum likelihood over (ln eta, ln sill, ln rho)."""
    R = np.atleast_2d(np.asarray(residuals, dtype=float))
    start = start or start_params(R, distances)
    n = R.size

    def unpack(x):
        return VariogramParams(*np.exp(x))

    def nll(x):
        return -sg_loglik(unpack(x), R, distances) / n

    x0 = np.log([max(start.eta, 1e-10), start.sill, start.rho])
    f0 = nll(x0)
    res = optimize.minimize(nll, x0, method="L-BFGS-B",
                            bounds=[(np.log(1e-10), None), (None, None), (None, None)],
                            options={"maxiter": 1000, "ftol": 1e-12, "gtol": 1e-8})
    x = res.x if res.fun <= f0 else x0
    p = unpack(x)
    fr = FitResult(np.exp(x), -min(res.fun, f0) * n, -f0 * n, bool(res.success),
                   str(res.message), int(res.nit))
    return p, fr


def predict_conditional(target_dist, distances, p: VariogramParams, residual_row,
                        n: int = 0, seed=None):
    """Kriging mean and variance at a target site.

    Parameters
    ----------
    target_dist : array (d,)
        Distances from the target to the stations.
    residual_row : array (d,) or (N, d)
        Observed residuals; several rows share one factorization.
    n : int
        Number of draws from N(mean, var) per row.

    Returns
    -------
    mean, var, draws
        ``draws`` has shape (n,) or (N, n); ``None`` when ``n == 0``.
    """
    S = covariance(distances, p)
    c = p.sigma2 - variogram(np.asarray(target_dist, dtype=float), p)
    cf = linalg.cho_factor(S, lower=True)
    wts = linalg.cho_solve(cf, c)
    E = np.asarray(residual_row, dtype=float)
    mean = E @ wts
    var = float(np.clip(p.sigma2 - c @ wts, 0.0, p.sigma2))
    draws = None
    if n:
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(np.shape(mean) + (n,))
        draws = np.asarray(mean)[..., None] + np.sqrt(var) * z
    return mean, var, draws


def save_sg(path, p: VariogramParams, fit: FitResult | None = None) -> None:
    lines = ["# spatial Gaussian baseline", f"eta {float(p.eta)!r}", f"sill {float(p.sill)!r}",
             f"rho {float(p.rho)!r}", "distance km", "mean_model margins.txt"]
    if fit is not None:
        lines += [f"loglik {float(fit.loglik)!r}", f"converged {int(fit.converged)}"]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_sg(path) -> VariogramParams:
    rec = {}
    with open(path) as fh:
        for ln in fh:
            if ln.strip() and not ln.startswith("#"):
                k, v = ln.split(maxsplit=1)
                rec[k] = v.strip()
    return VariogramParams(float(rec["eta"]), float(rec["sill"]), float(rec["rho"]))
