"""
Terminal-node co-occurrence of two query points.
"""

import math
from typing import Any, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy import stats

from src.core.exceptions import ConfigurationError, InsufficientDataError
from src.core.models import CooccurEstimate, DecayFit, ForestConfig, MKernelEstimate, SeparationProfile
from src.core.seeding import Stream, task_rngs
from src.forest.dataset import DataSampler, Dataset
from src.forest.grid import SplitGrid, build_split_grid
from src.forest.tree import Tree, grow_tree
from src.inference.hajek import forced_sample
from src.orchestration.task_dispatcher import task_dispatcher


def clopper_pearson_upper(successes: int, trials: int, level: float = 0.95) -> float:
    """One-sided Clopper-Pearson upper bound of a binomial proportion."""
    if trials < 1:
        raise ConfigurationError("trials must be positive")
    if successes >= trials:
        return 1.0
    return float(stats.beta.ppf(level, successes + 1, trials - successes))


def predicted_decay_exponent(delta: float) -> float:
    """Exponent -log2(1 / (1 - delta)) of the co-occurrence decay in s."""
    if not 0.0 <= delta <= 1.0:
        raise ConfigurationError(f"delta must lie in [0, 1], got {delta}")
    if delta == 1.0:
        return -math.inf
    return -math.log2(1.0 / (1.0 - delta))


def _pair(x: Any, x_bar: Any, p: int) -> Tuple[np.ndarray, np.ndarray]:
    pair = np.vstack([np.asarray(x, dtype=float).reshape(1, -1), np.asarray(x_bar, dtype=float).reshape(1, -1)])
    if pair.shape[1] != p:
        raise ConfigurationError(f"query points have {pair.shape[1]} coordinates, sampler draws {p}")
    if np.any(pair < 0.0) or np.any(pair > 1.0):
        raise ConfigurationError("query points must lie in [0, 1]^p")
    return pair[0], pair[1]


def _fresh_tree(
    sampler: DataSampler,
    cfg: ForestConfig,
    grid: SplitGrid,
    seed: int,
    stream: Stream,
    index: Tuple[int, ...],
    forced: Optional[Dataset] = None,
) -> Tree:
    """Tree on a fresh size-s sample; ``forced`` replaces its first point."""
    rng, coin_seed = task_rngs(seed, stream, *index)
    if forced is None:
        sample = sampler.sample(rng, cfg.s)
    else:
        sample = forced_sample(forced, sampler, rng, cfg.s)
    return grow_tree(sample, np.arange(cfg.s), cfg, coin_seed, grid)


def _shared_chunk(
    items: range,
    sampler: DataSampler,
    pair: np.ndarray,
    cfg: ForestConfig,
    grid: SplitGrid,
    seed: int,
    conditional: bool,
) -> np.ndarray:
    out = np.empty(len(items), dtype=bool)
    for row, b in enumerate(items):
        forced = None
        if conditional:
            draw_rng, _ = task_rngs(seed, Stream.ANCHOR, b)
            forced = Dataset(pair[1:2], sampler.sample(draw_rng, 1).y)
        leaves = _fresh_tree(sampler, cfg, grid, seed, Stream.COOCCUR, (b,), forced).apply(pair)
        out[row] = leaves[0] == leaves[1]
    return out


def estimate_m(
    sampler: DataSampler,
    x: Any,
    x_bar: Any,
    cfg: ForestConfig,
    conditional: bool = False,
    seed: Optional[int] = None,
) -> CooccurEstimate:
    """
    Frequency with which x and x_bar land in the same leaf.

    Each of ``cfg.trees`` trees is grown on a fresh size-s sample. In the
    conditional variant the first sample point is moved to x_bar and keeps
    the response drawn with it.

    Args:
        sampler: Generative distribution of (X, Y)
        x: First query point
        x_bar: Second query point
        cfg: Forest tuning symbols (s, trees, delta, ...)
        conditional: Force X1 = x_bar in every sample
        seed: Master seed (defaults to cfg.seed)
    """
    seed = cfg.seed if seed is None else seed
    a, b = _pair(x, x_bar, sampler.p)
    grid = build_split_grid(sampler.p, cfg.grid_g, cfg.alpha)

    shared_flags = task_dispatcher.map_array(
        _shared_chunk, cfg.trees,
        sampler=sampler, pair=np.vstack([a, b]), cfg=cfg, grid=grid, seed=seed, conditional=conditional,
    )
    shared = int(shared_flags.sum())
    m_hat = shared / cfg.trees
    if shared == 0:
        logger.debug(f"No shared leaf in {cfg.trees} trees at s={cfg.s}; reporting the upper bound")

    return CooccurEstimate(
        x=a.tolist(),
        x_bar=b.tolist(),
        m_hat=m_hat,
        trees=cfg.trees,
        shared=shared,
        conditional=conditional,
        stderr=math.sqrt(m_hat * (1.0 - m_hat) / cfg.trees),
        cp_upper=clopper_pearson_upper(shared, cfg.trees),
        s=cfg.s,
        delta=cfg.delta,
    )


SeriesItem = Union[CooccurEstimate, Tuple[float, float]]


def decay_fit(
    series: Iterable[SeriesItem],
    level: float = 0.95,
    delta: Optional[float] = None,
) -> DecayFit:
    """
    Least-squares slope of log m_hat against log s.

    Zero cells are dropped and listed in ``dropped``.

    Args:
        series: (s, m_hat) pairs or CooccurEstimate results
        level: Two-sided confidence level of the slope band
        delta: Coin probability, to attach the predicted exponent

    Raises:
        InsufficientDataError: fewer than 3 usable points
    """
    pairs = [(item.s, item.m_hat) if isinstance(item, CooccurEstimate) else item for item in series]
    s_values = np.array([float(s) for s, _ in pairs])
    m_values = np.array([float(m) for _, m in pairs])

    keep = m_values > 0.0
    dropped = s_values[~keep].tolist()
    if dropped:
        logger.warning(f"Dropping zero co-occurrence cells at s={dropped}")
    s_values, m_values = s_values[keep], m_values[keep]

    if np.unique(s_values).size < 3:
        raise InsufficientDataError(f"need at least 3 distinct s with m_hat > 0, got {np.unique(s_values).size}")

    fit = stats.linregress(np.log(s_values), np.log(m_values))
    n_points = int(s_values.size)
    stderr = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    t = float(stats.t.ppf(0.5 + level / 2.0, n_points - 2))

    return DecayFit(
        slope=float(fit.slope),
        stderr=stderr,
        intercept=float(fit.intercept),
        ci_low=float(fit.slope) - t * stderr,
        ci_high=float(fit.slope) + t * stderr,
        level=level,
        n_points=n_points,
        dropped=dropped,
        predicted_exponent=None if delta is None else predicted_decay_exponent(delta),
    )


def _inclusion_chunk(
    items: range,
    sampler: DataSampler,
    pair: np.ndarray,
    cfg: ForestConfig,
    grid: SplitGrid,
    trees_per_anchor: int,
    seed: int,
) -> np.ndarray:
    """Per anchor: frequency of sharing a leaf with x (first tree set) and with x_bar (second)."""
    out = np.empty((len(items), 2))
    for row, a in enumerate(items):
        anchor_rng, _ = task_rngs(seed, Stream.ANCHOR, a)
        anchor = sampler.sample(anchor_rng, 1)
        queries = np.vstack([anchor.x, pair])
        for column, stream in enumerate((Stream.KERNEL_X, Stream.KERNEL_X_BAR)):
            hits = 0
            for t in range(trees_per_anchor):
                leaves = _fresh_tree(sampler, cfg, grid, seed, stream, (a, t), anchor).apply(queries)
                hits += int(leaves[0] == leaves[1 + column])
            out[row, column] = hits / trees_per_anchor
    return out


def inclusion_probabilities(
    sampler: DataSampler,
    x: Any,
    x_bar: Any,
    cfg: ForestConfig,
    anchors: int,
    trees_per_anchor: Optional[int] = None,
    seed: Optional[int] = None,
) -> np.ndarray:
    """
    Estimates of P(X1 shares a leaf with x | X1 = z) and the same for x_bar.

    Returns:
        anchors x 2 array; the two columns come from independent tree sets
    """
    if anchors < 1:
        raise ConfigurationError(f"anchors must be at least 1, got {anchors}")
    seed = cfg.seed if seed is None else seed
    trees_per_anchor = trees_per_anchor or cfg.trees
    a, b = _pair(x, x_bar, sampler.p)
    grid = build_split_grid(sampler.p, cfg.grid_g, cfg.alpha)
    return task_dispatcher.map_array(
        _inclusion_chunk, anchors,
        sampler=sampler, pair=np.vstack([a, b]), cfg=cfg, grid=grid,
        trees_per_anchor=trees_per_anchor, seed=seed,
    )


def m_kernel(
    sampler: DataSampler,
    x: Any,
    x_bar: Any,
    cfg: ForestConfig,
    anchors: int,
    trees_per_anchor: Optional[int] = None,
    seed: Optional[int] = None,
) -> MKernelEstimate:
    """
    Product-of-inclusion-probabilities form E[E(I | X1) E(I_bar | X1)].

    Anchors z are drawn from the data distribution; for each one the two
    inclusion probabilities are estimated on independent tree sets of
    ``trees_per_anchor`` trees (default cfg.trees) and multiplied.
    """
    inclusion = inclusion_probabilities(sampler, x, x_bar, cfg, anchors, trees_per_anchor, seed)
    products = inclusion[:, 0] * inclusion[:, 1]
    stderr = float(np.std(products, ddof=1) / math.sqrt(anchors)) if anchors > 1 else 0.0
    return MKernelEstimate(
        value=float(products.mean()),
        stderr=stderr,
        anchors=anchors,
        trees_per_anchor=trees_per_anchor or cfg.trees,
        inclusion_x=float(inclusion[:, 0].mean()),
        inclusion_x_bar=float(inclusion[:, 1].mean()),
    )


def correlation_ratio(
    sampler: DataSampler,
    x: Any,
    x_bar: Any,
    cfg: ForestConfig,
    anchors: int,
    trees_per_anchor: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    """M(x, x_bar) / sqrt(M(x, x) M(x_bar, x_bar)) from the kernel form; NaN when a diagonal term is 0."""
    cross = m_kernel(sampler, x, x_bar, cfg, anchors, trees_per_anchor, seed).value
    own_x = m_kernel(sampler, x, x, cfg, anchors, trees_per_anchor, seed).value
    own_x_bar = m_kernel(sampler, x_bar, x_bar, cfg, anchors, trees_per_anchor, seed).value
    denominator = math.sqrt(own_x * own_x_bar)
    return cross / denominator if denominator > 0.0 else math.nan


def _depth_chunk(
    items: range,
    sampler: DataSampler,
    pair: np.ndarray,
    cfg: ForestConfig,
    grid: SplitGrid,
    seed: int,
) -> np.ndarray:
    return np.array([
        _fresh_tree(sampler, cfg, grid, seed, Stream.COOCCUR, (b,)).shared_depth(pair[0], pair[1])
        for b in items
    ], dtype=np.intp)


def separation_profile(
    sampler: DataSampler,
    x: Any,
    x_bar: Any,
    cfg: ForestConfig,
    seed: Optional[int] = None,
) -> SeparationProfile:
    """
    Survival curve of the shared path of x and x_bar.

    ``survival[l]`` estimates the probability that both points still lie in
    one node after l splits, for l = 0 up to one past the deepest shared path.
    """
    seed = cfg.seed if seed is None else seed
    a, b = _pair(x, x_bar, sampler.p)
    grid = build_split_grid(sampler.p, cfg.grid_g, cfg.alpha)
    depths = task_dispatcher.map_array(
        _depth_chunk, cfg.trees, sampler=sampler, pair=np.vstack([a, b]), cfg=cfg, grid=grid, seed=seed
    )
    levels = np.arange(int(depths.max()) + 2)
    survival = (depths[None, :] >= levels[:, None]).mean(axis=1)
    return SeparationProfile(x=a.tolist(), x_bar=b.tolist(), survival=survival.tolist(), trees=cfg.trees)


def cooccur_rows(estimates: Sequence[CooccurEstimate]) -> list:
    """CSV rows (s, delta, l1_distance, m_hat, stderr, conditional)."""
    return [
        [e.s, e.delta, e.l1_distance, e.m_hat, e.stderr, e.conditional]
        for e in estimates
    ]
