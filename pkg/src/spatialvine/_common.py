"""Shared exceptions, small numeric helpers and optimizer result records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# copula arguments are pushed away from the boundary before evaluation
UNIT_EPS = 1e-10
NU_MIN = 2.0 + 1e-6
NU_MAX = 100.0


class SpatialVineError(Exception):
    """Base class for package errors."""


class DomainError(SpatialVineError, ValueError):
    """Argument outside the admissible domain."""


class ValidationError(SpatialVineError, ValueError):
    """Input data or configuration failed validation."""


class ConvergenceError(SpatialVineError, RuntimeError):
    """An iterative routine did not reach its tolerance."""


@dataclass
class FitResult:
    """Outcome of a numerical maximization.

    Attributes
    ----------
    params : ndarray
        Best parameter vector found.
    loglik : float
        Objective (log-likelihood) at ``params``.
    start_loglik : float
        Objective at the start vector.
    converged : bool
        Optimizer convergence flag.
    message : str
        Optimizer message.
    nit : int
        Iterations used.
    """

    params: np.ndarray
    loglik: float
    start_loglik: float
    converged: bool
    message: str = ""
    nit: int = 0
    extra: dict = field(default_factory=dict)


def clip_unit(u, eps: float = UNIT_EPS) -> np.ndarray:
    """Validate copula-scale input and clamp it into [eps, 1 - eps].

    Values exactly on the boundary are accepted (they arise from
    rounding in h-function chains); anything outside [0, 1] or NaN
    raises :class:`DomainError`.
    """
    u = np.asarray(u, dtype=float)
    if not np.all((u >= 0.0) & (u <= 1.0)):
        raise DomainError("copula arguments must lie in (0, 1)")
    return np.clip(u, eps, 1.0 - eps)


def clamp_nu(nu: float) -> float:
    """Clamp a degrees-of-freedom value into the StudentT range."""
    return float(min(max(nu, NU_MIN), NU_MAX))
