"""
Subsampled forest: the Monte Carlo U-statistic over size-s subsets.
"""

from typing import Any, List, Optional

import numpy as np
from loguru import logger

from src.core.exceptions import ConfigurationError
from src.core.models import EstimateStatus, ForestConfig, JointEstimate
from src.core.seeding import Stream, task_rngs
from src.forest.dataset import Dataset
from src.forest.grid import SplitGrid, build_split_grid
from src.forest.tree import Tree, grow_tree
from src.orchestration.task_dispatcher import task_dispatcher


def check_points(points: Any, p: int) -> np.ndarray:
    """Validate query points as a q x p matrix inside the unit cube."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if p == 1 else pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ConfigurationError("at least one query point is required")
    if pts.shape[1] != p:
        raise ConfigurationError(f"query points have {pts.shape[1]} coordinates, data have {p}")
    if not np.all(np.isfinite(pts)) or np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ConfigurationError("query points must lie in [0, 1]^p")
    return pts


def symmetric_cov(rows: np.ndarray) -> np.ndarray:
    """Sample covariance of the columns of ``rows``, exactly symmetric with a nonnegative diagonal."""
    if rows.shape[0] < 2:
        return np.zeros((rows.shape[1], rows.shape[1]))
    cov = np.atleast_2d(np.cov(rows, rowvar=False))
    cov = 0.5 * (cov + cov.T)
    np.fill_diagonal(cov, np.maximum(np.diag(cov), 0.0))
    return cov


def grow_ensemble_tree(
    data: Dataset,
    cfg: ForestConfig,
    index: int,
    grid: Optional[SplitGrid] = None,
) -> Tree:
    """
    Grow tree ``index`` of the forest defined by ``cfg``.

    The subsample and the coin flips come from the tree's own seed, so any
    tree can be regrown in isolation.
    """
    rng, coin_seed = task_rngs(cfg.seed, Stream.TREE, index)
    subsample = rng.choice(data.n, size=cfg.s, replace=False)
    return grow_tree(data, subsample, cfg, coin_seed, grid)


def _predict_chunk(
    items: range,
    data: Dataset,
    cfg: ForestConfig,
    grid: SplitGrid,
    points: np.ndarray,
) -> np.ndarray:
    out = np.empty((len(items), points.shape[0]))
    for row, b in enumerate(items):
        out[row] = grow_ensemble_tree(data, cfg, b, grid).predict_many(points)
    return out


def _grow_chunk(items: range, data: Dataset, cfg: ForestConfig, grid: SplitGrid) -> List[Tree]:
    return [grow_ensemble_tree(data, cfg, b, grid) for b in items]


def grow_forest(data: Dataset, cfg: ForestConfig) -> List[Tree]:
    """Grow all ``cfg.trees`` trees and keep them."""
    grid = build_split_grid(data.p, cfg.grid_g, cfg.alpha)
    chunks = task_dispatcher.run_chunks(_grow_chunk, cfg.trees, data=data, cfg=cfg, grid=grid)
    return [tree for chunk in chunks for tree in chunk]


def fit_forest(data: Dataset, points: Any, cfg: ForestConfig) -> JointEstimate:
    """
    Fit the forest and evaluate it jointly at the query points.

    Draws ``cfg.trees`` subsamples of size s without replacement, grows one
    tree on each and records every tree's prediction at every point.

    Args:
        data: Sample of size cfg.n
        points: q query locations in [0, 1]^p
        cfg: Forest tuning symbols

    Returns:
        JointEstimate with column means and the across-tree covariance
    """
    if data.n != cfg.n:
        raise ConfigurationError(f"config declares n={cfg.n}, data have {data.n} rows")
    pts = check_points(points, data.p)
    grid = build_split_grid(data.p, cfg.grid_g, cfg.alpha)

    logger.info(f"Fitting forest: B={cfg.trees}, s={cfg.s}, n={cfg.n}, q={pts.shape[0]}")
    predictions = task_dispatcher.map_array(
        _predict_chunk, cfg.trees, data=data, cfg=cfg, grid=grid, points=pts
    )

    status = EstimateStatus.OK
    if cfg.trees < 2:
        status = EstimateStatus.DEGENERATE
        logger.warning("Single tree: covariance reported as zero")

    # Each point is averaged over its own contiguous row, so its estimate does not depend on q.
    columns = np.ascontiguousarray(predictions.T)

    return JointEstimate(
        points=pts,
        estimates=columns.mean(axis=1),
        cov=symmetric_cov(predictions),
        trees_used=cfg.trees,
        status=status,
        seed=cfg.seed,
        config=cfg,
        tree_predictions=predictions,
    )
