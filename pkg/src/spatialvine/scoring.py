"""Scores for sample-based probabilistic forecasts."""

from __future__ import annotations

import numpy as np

from ._common import DomainError


def crps_empirical(draws, obs):
    """CRPS of an ensemble: mean|X - y| - 0.5 mean|X - X'|.

    Uses the sorted form ``sum_{i,j}|x_i - x_j| = 2 sum_i (2i - n - 1) x_(i)``.
    ``draws`` may be (n,) with scalar ``obs`` or (T, n) with ``obs`` (T,).
    """
    X = np.asarray(draws, dtype=float)
    y = np.asarray(obs, dtype=float)
    if X.shape[-1] == 0:
        raise DomainError("empty draw set")
    n = X.shape[-1]
    Xs = np.sort(X, axis=-1)
    k = np.arange(1, n + 1)
    spread = 2 * np.sum((2 * k - n - 1) * Xs, axis=-1) / (n * n)
    err = np.mean(np.abs(X - y[..., None]), axis=-1)
    out = err - 0.5 * spread
    return float(out) if np.ndim(out) == 0 else out


def interval_score(lower, upper, obs, alpha: float):
    """Interval score of a central (1 - alpha) interval."""
    l = np.asarray(lower, dtype=float)
    u = np.asarray(upper, dtype=float)
    y = np.asarray(obs, dtype=float)
    if np.any(l > u):
        raise DomainError("interval lower bound exceeds upper bound")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    out = (u - l) + 2 / alpha * (l - y) * (y < l) + 2 / alpha * (y - u) * (y > u)
    return float(out) if np.ndim(out) == 0 else out


def mse(point_preds, obs) -> float:
    p = np.asarray(point_preds, dtype=float)
    y = np.asarray(obs, dtype=float)
    if p.shape != y.shape:
        raise DomainError("predictions and observations differ in shape")
    return float(np.mean((p - y) ** 2))


def outperformance_share(scores_a, scores_b) -> float:
    """Share of time points where ``a`` scores lower; ties count one half."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape:
        raise DomainError("score series are misaligned")
    if a.size == 0:
        raise DomainError("empty score series")
    return float(np.mean((a < b) + 0.5 * (a == b)))


def log_score_difference(scores_a, scores_b) -> np.ndarray:
    """Pointwise ``ln a - ln b`` of positive scores."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape:
        raise DomainError("score series are misaligned")
    if np.any(a <= 0) or np.any(b <= 0):
        raise DomainError("log-score difference needs positive scores")
    return np.log(a) - np.log(b)


def central_interval(draws, alpha: float = 0.05):
    """Empirical ``alpha/2`` and ``1 - alpha/2`` quantiles along the last axis."""
    X = np.asarray(draws, dtype=float)
    return (np.quantile(X, alpha / 2, axis=-1), np.quantile(X, 1 - alpha / 2, axis=-1))
