"""
Trace ratio and confidence intervals for linear functionals of the forest.
"""

from typing import Dict, Optional

import numpy as np
from loguru import logger
from scipy.stats import norm

from src.core.config import settings
from src.core.exceptions import ConfigurationError, SingularMatrixError
from src.core.models import (
    ConfidenceInterval,
    FunctionalSpec,
    HajekEstimate,
    IntervalMode,
    JointEstimate,
    TraceReport,
)

# Pairs of query points closer than this in L1 are treated as the same point.
COINCIDENT_TOL = 1e-12


def trace_report(var_t: np.ndarray, var_t_ring: np.ndarray, s: int, n: int) -> TraceReport:
    """
    Compute (s/n) tr(var_t_ring^{-1} var_t) with the condition number of var_t_ring.

    Raises:
        SingularMatrixError: if var_t_ring is singular or its condition number
            exceeds ``settings.condition_limit``
    """
    a = np.atleast_2d(np.asarray(var_t_ring, dtype=float))
    b = np.atleast_2d(np.asarray(var_t, dtype=float))
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"matrix shapes differ: {a.shape} vs {b.shape}")
    if s < 1 or n < 1:
        raise ConfigurationError("s and n must be positive")

    condition = float(np.linalg.cond(a))
    logger.debug(f"Trace ratio: condition number {condition:.3e}")
    if not np.isfinite(condition) or condition > settings.condition_limit:
        raise SingularMatrixError("projected-kernel variance is not invertible", condition)

    value = (s / n) * float(np.trace(np.linalg.solve(a, b)))
    return TraceReport(value=value, condition=condition, s=s, n=n)


def trace_ratio(var_t: np.ndarray, var_t_ring: np.ndarray, s: int, n: int) -> float:
    """(s/n) tr(var_t_ring^{-1} var_t)."""
    return trace_report(var_t, var_t_ring, s, n).value


def linear_heuristic(distance, s: int, p: int, eps: float = 0.0):
    """Correlation bound max(1 - (s^eps / p) d, 0) at L1 distance d."""
    bound = np.maximum(1.0 - (s ** eps / p) * np.asarray(distance, dtype=float), 0.0)
    return float(bound) if bound.ndim == 0 else bound


def l1_distances(points: np.ndarray) -> np.ndarray:
    """Pairwise L1 distances between the rows of ``points``."""
    return np.abs(points[:, None, :] - points[None, :, :]).sum(axis=2)


def approximate_covariance(
    v: np.ndarray,
    points: np.ndarray,
    weights: np.ndarray,
    mode: IntervalMode,
    s: int,
    eps: float = 0.0,
) -> np.ndarray:
    """
    The covariance used for an interval.

    Diagonal mode keeps the diagonal of ``v``. Heuristic mode fills each
    off-diagonal entry with the linear correlation bound times the geometric
    mean of the diagonals, signed so that the entry widens the interval for
    ``weights``. Coincident points are perfectly correlated in both modes.
    """
    diag = np.maximum(np.diag(v), 0.0)
    scale = np.sqrt(np.outer(diag, diag))
    distance = l1_distances(points)
    coincident = distance <= COINCIDENT_TOL

    if mode == IntervalMode.DIAGONAL:
        rho = coincident.astype(float)
    else:
        bound = linear_heuristic(distance, s, points.shape[1], eps)
        sign = np.sign(np.outer(weights, weights))
        rho = np.where(coincident, 1.0, bound * sign)

    cov = rho * scale
    np.fill_diagonal(cov, diag)
    return cov


def confidence_interval(
    est: JointEstimate,
    v: HajekEstimate,
    func: FunctionalSpec,
    level: float = 0.95,
    mode: IntervalMode = IntervalMode.DIAGONAL,
    eps: float = 0.0,
    include_mc: bool = False,
) -> ConfidenceInterval:
    """
    Normal interval w'est +/- z sqrt(w' V w) for one covariance mode.

    Args:
        est: Joint forest estimate
        v: Hajek variance at the same points
        func: Functional weights
        level: Coverage in (0, 1)
        mode: Covariance approximation
        eps: Exponent of the linear heuristic
        include_mc: Add the Monte Carlo term cov / B to V
    """
    if not 0.0 < level < 1.0:
        raise ConfigurationError(f"level must lie in (0, 1), got {level}")
    w = func.weights
    if w.shape[0] != est.q:
        raise ConfigurationError(f"functional has {w.shape[0]} weights, estimate has {est.q} points")
    if v.points.shape != est.points.shape or not np.allclose(v.points, est.points):
        raise ConfigurationError("variance and estimate refer to different query points")

    cov = approximate_covariance(v.v_hat, est.points, w, mode, v.s, eps)
    if include_mc:
        cov = cov + est.cov / est.trees_used

    center = float(w @ est.estimates)
    variance = max(float(w @ cov @ w), 0.0)
    half_width = float(norm.ppf(0.5 + level / 2.0)) * np.sqrt(variance)
    return ConfidenceInterval(
        kind=func.kind,
        mode=mode,
        level=level,
        center=center,
        half_width=half_width,
        lower=center - half_width,
        upper=center + half_width,
    )


def confidence_intervals(
    est: JointEstimate,
    v: HajekEstimate,
    func: FunctionalSpec,
    level: float = 0.95,
    eps: float = 0.0,
    include_mc: bool = False,
    modes: Optional[tuple] = None,
) -> Dict[IntervalMode, ConfidenceInterval]:
    """Intervals for ``func`` under every covariance mode (diagonal and heuristic by default)."""
    modes = modes or tuple(IntervalMode)
    return {
        mode: confidence_interval(est, v, func, level, mode, eps, include_mc)
        for mode in modes
    }
