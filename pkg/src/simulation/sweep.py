"""
Correlation of tree predictions against L1 distance.
"""

import math
from typing import Any, Optional, Sequence

import numpy as np
from loguru import logger
from scipy import stats

from src.core.config import settings
from src.core.exceptions import ConfigurationError, InsufficientDataError
from src.core.models import (
    CorrelationCurve,
    CurveRow,
    CurveScale,
    ForestConfig,
    HeuristicComparison,
    HeuristicRow,
    LogLinearity,
    SimDesign,
)
from src.forest.dataset import Dataset
from src.forest.grid import SplitGrid, build_split_grid
from src.inference.ensemble import grow_ensemble_tree
from src.inference.intervals import linear_heuristic
from src.orchestration.task_dispatcher import task_dispatcher
from src.simulation.design import sample_design

# Variances at or below this count as constant predictions.
VARIANCE_FLOOR = 1e-14

# Distances at or below this count as the same point.
SAME_POINT = 1e-12


def cell_centers(g: int) -> np.ndarray:
    """Centers ((i + 0.5)/g, (j + 0.5)/g) of the g x g cells, row-major in (i, j)."""
    ticks = (np.arange(g) + 0.5) / g
    a, b = np.meshgrid(ticks, ticks, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def default_references(design: SimDesign) -> np.ndarray:
    """The mixture means and the center of the square."""
    return np.vstack([np.asarray(design.means, dtype=float), np.full((1, len(design.means[0])), 0.5)])


def _moment_chunk(
    items: range,
    data: Dataset,
    cfg: ForestConfig,
    grid: SplitGrid,
    references: np.ndarray,
    cells: np.ndarray,
    pivot: float,
) -> dict:
    """Shifted first and second moments of reference and cell predictions over a chunk of trees."""
    r, c = references.shape[0], cells.shape[0]
    sums = {
        "ref": np.zeros(r), "cell": np.zeros(c),
        "ref_sq": np.zeros(r), "cell_sq": np.zeros(c),
        "cross": np.zeros((r, c)),
    }
    for b in items:
        tree = grow_ensemble_tree(data, cfg, b, grid)
        t_ref = tree.predict_many(references) - pivot
        t_cell = tree.predict_many(cells) - pivot
        sums["ref"] += t_ref
        sums["cell"] += t_cell
        sums["ref_sq"] += t_ref ** 2
        sums["cell_sq"] += t_cell ** 2
        sums["cross"] += np.outer(t_ref, t_cell)
    return sums


def pairwise_correlations(
    data: Dataset,
    cfg: ForestConfig,
    references: np.ndarray,
    cells: np.ndarray,
) -> np.ndarray:
    """
    Across-tree correlation between every reference and every cell.

    Trees are grown once and their moments accumulated chunk by chunk, in
    chunk order. Pairs with a constant-prediction member are NaN.
    """
    if cfg.trees < 2:
        raise ConfigurationError("a correlation sweep needs at least 2 trees")
    grid = build_split_grid(data.p, cfg.grid_g, cfg.alpha)
    pivot = float(np.mean(data.y))

    chunks = task_dispatcher.run_chunks(
        _moment_chunk, cfg.trees,
        data=data, cfg=cfg, grid=grid, references=references, cells=cells, pivot=pivot,
    )
    total = {key: sum(chunk[key] for chunk in chunks) for key in chunks[0]}

    b = cfg.trees
    mean_ref, mean_cell = total["ref"] / b, total["cell"] / b
    var_ref = (total["ref_sq"] - b * mean_ref ** 2) / (b - 1)
    var_cell = (total["cell_sq"] - b * mean_cell ** 2) / (b - 1)
    cov = (total["cross"] - b * np.outer(mean_ref, mean_cell)) / (b - 1)

    constant = (var_ref[:, None] <= VARIANCE_FLOOR) | (var_cell[None, :] <= VARIANCE_FLOOR)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.sqrt(np.outer(np.maximum(var_ref, 0.0), np.maximum(var_cell, 0.0)))
    corr = np.clip(corr, -1.0, 1.0)
    corr[constant] = np.nan
    return corr


def bucket_curve(
    distances: np.ndarray,
    correlations: np.ndarray,
    width: float,
    n: int,
    s: int,
    trees: int,
) -> CorrelationCurve:
    """
    Average correlations within L1 distance buckets.

    Bucket 0 holds coincident pairs; bucket i >= 1 holds distances in
    (width (i-1), width i] and is reported at its mean distance.
    """
    distances = np.asarray(distances, dtype=float).ravel()
    correlations = np.asarray(correlations, dtype=float).ravel()
    same = distances <= SAME_POINT
    correlations = np.where(same, 1.0, correlations)

    usable = np.isfinite(correlations)
    excluded = int((~usable).sum())
    if excluded:
        logger.warning(f"Excluded {excluded} pairs with constant predictions")
    distances, correlations, same = distances[usable], correlations[usable], same[usable]

    index = np.where(same, 0, np.maximum(np.ceil(distances / width - 1e-9), 1)).astype(np.intp)
    rows = []
    for bucket in np.unique(index):
        members = index == bucket
        values = correlations[members]
        count = int(members.sum())
        stderr = float(np.std(values, ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        rows.append(CurveRow(
            distance=0.0 if bucket == 0 else float(distances[members].mean()),
            correlation=float(np.clip(values.mean(), -1.0, 1.0)),
            count=count,
            stderr=stderr,
        ))
    return CorrelationCurve(rows=rows, scale=CurveScale.LINEAR, excluded=excluded, n=n, s=s, trees=trees)


def correlation_sweep(
    design: SimDesign,
    references: Optional[Any] = None,
    data: Optional[Dataset] = None,
    bucket_width: Optional[float] = None,
) -> CorrelationCurve:
    """
    Correlation curve of the design's forest.

    Grows design.trees trees once on one dataset; for each reference point x
    and every grid cell center x_bar, the across-tree correlation of
    (T_b(x), T_b(x_bar)) is bucketed by ||x - x_bar||_1. Each reference also
    contributes its self-pair to bucket 0.

    Args:
        design: Simulation design
        references: Reference points (mixture means and center by default)
        data: Dataset to use instead of a fresh draw
        bucket_width: Distance bucket width (settings.bucket_width by default)
    """
    refs = default_references(design) if references is None else np.atleast_2d(np.asarray(references, dtype=float))
    data = sample_design(design) if data is None else data
    cfg = design.forest_config().with_updates(n=data.n)
    cells = cell_centers(design.grid_g)
    width = bucket_width or settings.bucket_width

    logger.info(f"Correlation sweep: {refs.shape[0]} references x {cells.shape[0]} cells, B={cfg.trees}")
    corr = pairwise_correlations(data, cfg, refs, cells)
    distances = np.abs(refs[:, None, :] - cells[None, :, :]).sum(axis=2)

    # Self-pairs: one per reference, correlation 1 by definition.
    all_distances = np.concatenate([np.zeros(refs.shape[0]), distances.ravel()])
    all_correlations = np.concatenate([np.ones(refs.shape[0]), corr.ravel()])
    return bucket_curve(all_distances, all_correlations, width, cfg.n, cfg.s, cfg.trees)


def to_log_scale(curve: CorrelationCurve, floor: Optional[float] = None) -> CorrelationCurve:
    """Keep the buckets with correlation above ``floor``, marked for a log axis."""
    floor = settings.log_floor if floor is None else floor
    rows = [row for row in curve.rows if row.correlation > floor]
    return curve.model_copy(update={"rows": rows, "scale": CurveScale.LOG})


def fit_decay_rate(curve: CorrelationCurve, floor: Optional[float] = None) -> float:
    """lambda of exp(-lambda d), by least squares through the origin on the log curve."""
    rows = to_log_scale(curve, floor).rows
    d = np.array([row.distance for row in rows])
    log_corr = np.log(np.array([row.correlation for row in rows]))
    denominator = float(np.sum(d ** 2))
    if denominator == 0.0:
        return 0.0
    return float(-np.sum(d * log_corr) / denominator)


def heuristic_compare(
    curve: CorrelationCurve,
    s: int,
    p: int,
    eps: float = 0.0,
    floor: Optional[float] = None,
) -> HeuristicComparison:
    """
    Compare the observed curve with the linear bound and the exponential fit.

    Each bucket gets max(1 - (s^eps / p) d, 0), exp(-lambda d) and the flag
    observed <= linear bound.
    """
    if not curve.rows:
        raise ConfigurationError("correlation curve is empty")
    lam = fit_decay_rate(curve, floor)
    rows = []
    for row in curve.rows:
        bound = linear_heuristic(row.distance, s, p, eps)
        rows.append(HeuristicRow(
            distance=row.distance,
            observed=row.correlation,
            linear_bound=bound,
            exponential_fit=math.exp(-lam * row.distance),
            conservative=row.correlation <= bound + 1e-12,
        ))
    return HeuristicComparison(rows=rows, lam=lam, s=s, p=p, eps=eps)


def log_linearity(
    curve: CorrelationCurve,
    max_distance: float = 0.4,
    floor: Optional[float] = None,
) -> LogLinearity:
    """Regression of log correlation on distance over buckets up to ``max_distance``."""
    rows = [row for row in to_log_scale(curve, floor).rows if row.distance <= max_distance]
    if len({row.distance for row in rows}) < 3:
        raise InsufficientDataError(f"need 3 buckets within distance {max_distance}, got {len(rows)}")
    fit = stats.linregress([row.distance for row in rows], [math.log(row.correlation) for row in rows])
    return LogLinearity(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue ** 2),
        n_points=len(rows),
        max_distance=max_distance,
    )


def monotone_violations(curve: CorrelationCurve, tolerance: float = 2.0) -> Sequence[int]:
    """Buckets whose correlation exceeds the previous one by more than ``tolerance`` standard errors."""
    rows = curve.rows
    return [
        i for i in range(1, len(rows))
        if rows[i].correlation - rows[i - 1].correlation
        > tolerance * math.hypot(rows[i].stderr, rows[i - 1].stderr)
    ]
