"""
Monte Carlo estimate of the Hajek projection variance.
"""

from typing import Any, Optional

import numpy as np
from loguru import logger

from src.core.exceptions import ConfigurationError
from src.core.models import ForestConfig, HajekEstimate
from src.core.seeding import Stream, task_rngs
from src.forest.dataset import DataSampler, Dataset
from src.forest.grid import SplitGrid, build_split_grid
from src.forest.tree import grow_tree
from src.inference.ensemble import check_points, symmetric_cov
from src.orchestration.task_dispatcher import task_dispatcher


def forced_sample(anchor: Dataset, sampler: DataSampler, rng: np.random.Generator, s: int) -> Dataset:
    """A size-s sample whose first point is ``anchor`` and whose other s-1 points are fresh."""
    if s == 1:
        return anchor
    fresh = sampler.sample(rng, s - 1)
    return Dataset(np.vstack([anchor.x, fresh.x]), np.concatenate([anchor.y, fresh.y]))


def _anchor_chunk(
    items: range,
    sampler: DataSampler,
    points: np.ndarray,
    cfg: ForestConfig,
    grid: SplitGrid,
    mc_r: int,
    seed: int,
) -> np.ndarray:
    out = np.empty((len(items), mc_r, points.shape[0]))
    everyone = np.arange(cfg.s)
    for row, a in enumerate(items):
        anchor_rng, _ = task_rngs(seed, Stream.ANCHOR, a)
        anchor = sampler.sample(anchor_rng, 1)
        for r in range(mc_r):
            rng, coin_seed = task_rngs(seed, Stream.HAJEK_REP, a, r)
            sample = forced_sample(anchor, sampler, rng, cfg.s)
            out[row, r] = grow_tree(sample, everyone, cfg, coin_seed, grid).predict_many(points)
    return out


def hajek_variance(
    sampler: DataSampler,
    points: Any,
    cfg: ForestConfig,
    n_anchors: int,
    mc_r: int,
    seed: Optional[int] = None,
) -> HajekEstimate:
    """
    Estimate V = (s^2 / n) Var(T1) at q query points.

    For each of ``n_anchors`` anchors z drawn from the sampler, T1(z) is the
    mean prediction of ``mc_r`` trees grown on fresh size-s samples that
    contain z.

    Args:
        sampler: Generative distribution of (X, Y)
        points: q query locations
        cfg: Forest tuning symbols (n scales V, s sizes each tree)
        n_anchors: Number of anchors, at least 2
        mc_r: Trees per anchor, at least 2
        seed: Master seed (defaults to cfg.seed)

    Returns:
        HajekEstimate with v_hat, its debiased variant and the single-tree
        covariances used by the trace ratio
    """
    if mc_r < 2:
        raise ConfigurationError(f"mc_r must be at least 2, got {mc_r}")
    if n_anchors < 2:
        raise ConfigurationError(f"n_anchors must be at least 2, got {n_anchors}")

    seed = cfg.seed if seed is None else seed
    pts = check_points(points, sampler.p)
    q = pts.shape[0]
    grid = build_split_grid(sampler.p, cfg.grid_g, cfg.alpha)

    logger.info(f"Hajek variance: {n_anchors} anchors x {mc_r} trees, s={cfg.s}, q={q}")
    predictions = task_dispatcher.map_array(
        _anchor_chunk, n_anchors,
        sampler=sampler, points=pts, cfg=cfg, grid=grid, mc_r=mc_r, seed=seed,
    )

    t1 = predictions.mean(axis=1)
    cov_t1 = symmetric_cov(t1)

    # Noise of each anchor mean: within-anchor covariance over mc_r.
    centered = predictions - t1[:, None, :]
    within = np.einsum("arj,ark->jk", centered, centered) / (n_anchors * (mc_r - 1))
    within = 0.5 * (within + within.T)

    scale = cfg.s ** 2 / cfg.n
    return HajekEstimate(
        points=pts,
        t1_values=t1,
        v_hat=scale * cov_t1,
        v_hat_debiased=scale * (cov_t1 - within / mc_r),
        var_t=symmetric_cov(predictions.reshape(-1, q)),
        var_t_ring=cfg.s * cov_t1,
        mc_reps=mc_r,
        anchors=n_anchors,
        s=cfg.s,
        n=cfg.n,
        seed=seed,
    )
