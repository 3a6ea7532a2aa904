"""
Empirical coverage of contrast intervals over repeated datasets.
"""

from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.core.exceptions import ConfigurationError
from src.core.models import CoverageRow, FunctionalSpec, HajekEstimate, IntervalMode, SimDesign
from src.core.seeding import Stream, seed_sequence
from src.inference.ensemble import fit_forest
from src.inference.hajek import hajek_variance
from src.inference.intervals import confidence_intervals
from src.simulation.design import MixtureDesignSampler, sample_design, truth

MIN_TRIALS = 100

Contrast = Tuple[Sequence[float], Sequence[float]]


def contrast_label(x: Sequence[float], x_bar: Sequence[float]) -> str:
    def fmt(point: Sequence[float]) -> str:
        return "(" + ",".join(f"{c:g}" for c in point) + ")"

    return f"{fmt(x)}-{fmt(x_bar)}"


def _trial_seed(design: SimDesign, trial: int) -> int:
    return int(seed_sequence(design.seed, Stream.TRIAL, trial).generate_state(1)[0])


def coverage_table(
    design: SimDesign,
    contrasts: Sequence[Contrast],
    level: float = 0.95,
    trials: int = 200,
    n_anchors: int = 200,
    mc_r: int = 20,
    eps: float = 0.0,
    include_mc: bool = False,
    variance: Optional[HajekEstimate] = None,
) -> List[CoverageRow]:
    """
    Fraction of trials whose interval for f(x) - f(x_bar) covers the truth.

    Every trial draws a fresh dataset and fits a fresh forest. The Hajek
    variance depends on the design only, so it is estimated once (or taken
    from ``variance``) and shared by all trials.

    Args:
        design: Simulation design
        contrasts: (x, x_bar) pairs
        level: Nominal coverage
        trials: Replicates, at least 100
        n_anchors: Anchors of the Hajek estimate
        mc_r: Trees per anchor of the Hajek estimate
        eps: Exponent of the linear heuristic
        include_mc: Add the Monte Carlo term cov / B to V
        variance: Precomputed Hajek estimate at the stacked contrast points

    Returns:
        One row per contrast and covariance mode
    """
    if trials < MIN_TRIALS:
        raise ConfigurationError(f"coverage needs at least {MIN_TRIALS} trials, got {trials}")
    if not contrasts:
        raise ConfigurationError("at least one contrast is required")

    points = np.array([point for pair in contrasts for point in pair], dtype=float)
    q = points.shape[0]
    functionals = [FunctionalSpec.contrast(q, 2 * i, 2 * i + 1) for i in range(len(contrasts))]
    targets = [float(truth(x)[0] - truth(x_bar)[0]) for x, x_bar in contrasts]

    cfg = design.forest_config()
    if variance is None:
        variance = hajek_variance(MixtureDesignSampler(design), points, cfg, n_anchors, mc_r)

    hits = {(i, mode): 0 for i in range(len(contrasts)) for mode in IntervalMode}
    for trial in range(trials):
        trial_design = design.with_updates(seed=_trial_seed(design, trial))
        data = sample_design(trial_design)
        est = fit_forest(data, points, trial_design.forest_config())
        for i, func in enumerate(functionals):
            intervals = confidence_intervals(est, variance, func, level, eps=eps, include_mc=include_mc)
            for mode, interval in intervals.items():
                hits[(i, mode)] += int(interval.covers(targets[i]))
        if (trial + 1) % 50 == 0:
            logger.info(f"Coverage: {trial + 1}/{trials} trials")

    return [
        CoverageRow(
            contrast=contrast_label(*contrasts[i]),
            mode=mode,
            level=level,
            coverage=hits[(i, mode)] / trials,
            trials=trials,
        )
        for i in range(len(contrasts))
        for mode in IntervalMode
    ]


def parse_contrasts(raw: Any) -> List[Contrast]:
    """Contrasts from nested lists [[x, x_bar], ...]."""
    pairs = []
    for item in raw:
        if len(item) != 2:
            raise ConfigurationError(f"contrast {item} must be a pair of points")
        pairs.append((tuple(float(c) for c in item[0]), tuple(float(c) for c in item[1])))
    return pairs
