"""
Coupled split draws and stability classification.
"""

from collections import Counter
from typing import Any, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.stats import norm

from src.core.exceptions import ConfigurationError, ForestLabError
from src.core.models import CouplingRun, StabilityVerdict, VerdictKind
from src.core.seeding import Stream, seed_sequence
from src.cooccur.cooccurrence import clopper_pearson_upper
from src.forest.splitting import SplitDecision
from src.orchestration.task_dispatcher import task_dispatcher
from src.stability.rules import NodeSampler, SplitRule, rule_name

# Marks a rep in which the rule raised on its inputs.
FAILED = "__rule_failed__"

# Largest allowed deviation of consecutive node-size ratios from their geometric mean.
SPACING_TOL = 0.25

RULE_ERRORS = (ForestLabError, ValueError, ArithmeticError, IndexError)


def _child(decision: SplitDecision, x1: np.ndarray, lower: np.ndarray, upper: np.ndarray):
    lower, upper = lower.copy(), upper.copy()
    if x1[decision.axis] >= decision.cut:
        lower[decision.axis] = decision.cut
    else:
        upper[decision.axis] = decision.cut
    return lower, upper


def _coupled_pair(
    rule: SplitRule,
    node_dist: NodeSampler,
    m: int,
    x1: np.ndarray,
    depth: int,
    rng: np.random.Generator,
) -> Tuple[Hashable, Hashable]:
    others = node_dist.draw(rng, m - 1)
    fresh = node_dist.draw(rng, 1)
    lower, upper = node_dist.lower, node_dist.upper
    conditioned = np.vstack([x1, others])
    first = rule(conditioned, lower, upper)
    if depth == 1:
        return rule(np.vstack([fresh, others]), lower, upper), first

    if not isinstance(first, SplitDecision):
        raise ConfigurationError("depth-2 coupling needs a rule returning SplitDecision")
    child_lower, child_upper = _child(first, x1, lower, upper)
    inside = np.all((others >= child_lower) & (others < child_upper), axis=1)
    child_others = others[inside]
    child_fresh = node_dist.restrict(child_lower, child_upper).draw(rng, 1)
    return (
        rule(np.vstack([child_fresh, child_others]), child_lower, child_upper),
        rule(np.vstack([x1, child_others]), child_lower, child_upper),
    )


def _coupling_chunk(
    items: range,
    rule: SplitRule,
    node_dist: NodeSampler,
    m: int,
    x1: np.ndarray,
    depth: int,
    seed: int,
) -> List[Tuple[Hashable, Hashable]]:
    out = []
    for r in items:
        rng = np.random.default_rng(seed_sequence(seed, Stream.COUPLING, depth, m, r))
        try:
            out.append(_coupled_pair(rule, node_dist, m, x1, depth, rng))
        except ConfigurationError:
            raise
        except RULE_ERRORS:
            out.append((FAILED, FAILED))
    return out


def coupled_draws(
    rule: SplitRule,
    node_dist: NodeSampler,
    m: int,
    x1: Any,
    reps: int,
    depth: int = 1,
    seed: int = 0,
) -> List[Tuple[Hashable, Hashable]]:
    """
    The raw coupled pairs (S, S').

    S is the rule on a fresh X_1 and S' the rule on x1; both share X_2..X_m.
    Failed reps appear as (FAILED, FAILED).
    """
    if m < 2:
        raise ConfigurationError(f"node size must be at least 2, got {m}")
    if reps < 1:
        raise ConfigurationError(f"reps must be positive, got {reps}")
    if depth not in (1, 2):
        raise ConfigurationError(f"coupling depth must be 1 or 2, got {depth}")
    point = np.asarray(x1, dtype=float).reshape(1, -1)
    if point.shape[1] != node_dist.lower.shape[0]:
        raise ConfigurationError("x1 dimension does not match the node")

    chunks = task_dispatcher.run_chunks(
        _coupling_chunk, reps, rule=rule, node_dist=node_dist, m=m, x1=point, depth=depth, seed=seed
    )
    return [pair for chunk in chunks for pair in chunk]


def histogram_tv(first: Sequence[Hashable], second: Sequence[Hashable]) -> float:
    """Half the L1 distance between the empirical distributions of two samples."""
    if not first or not second:
        return 0.0
    p, q = Counter(first), Counter(second)
    return 0.5 * sum(abs(p[v] / len(first) - q[v] / len(second)) for v in set(p) | set(q))


def coupled_split_tv(
    rule: SplitRule,
    node_dist: NodeSampler,
    m: int,
    x1: Any,
    reps: int,
    depth: int = 1,
    seed: int = 0,
) -> CouplingRun:
    """
    Coupling estimate of the TV distance between split distributions with and
    without X_1 = x1.

    Args:
        rule: Deterministic split rule
        node_dist: Distribution of the node's points
        m: Points entering the split, at least 2
        x1: Conditioned value of X_1
        reps: Coupled draws
        depth: 1, or 2 to condition on the realized first split and couple
            again inside the child containing x1
        seed: Master seed

    Returns:
        CouplingRun; reps counts successful draws and failures are reported
        separately
    """
    pairs = coupled_draws(rule, node_dist, m, x1, reps, depth, seed)
    valid = [(a, b) for a, b in pairs if a != FAILED]
    failures = len(pairs) - len(valid)
    if failures:
        logger.warning(f"{rule_name(rule)} failed on {failures} of {reps} reps at m={m}")

    disagree = sum(1 for a, b in valid if a != b)
    n_valid = len(valid)
    return CouplingRun(
        rule=rule_name(rule),
        m=m,
        reps=n_valid,
        disagree=disagree,
        tv_hat=disagree / n_valid if n_valid else 0.0,
        tv_hist=histogram_tv([a for a, _ in valid], [b for _, b in valid]),
        x1=np.asarray(x1, dtype=float).reshape(-1).tolist(),
        depth=depth,
        failures=failures,
    )


def _check_spacing(sizes: np.ndarray) -> None:
    if sizes.size < 4:
        raise ConfigurationError(f"need at least 4 node sizes, got {sizes.size}")
    ratios = sizes[1:] / sizes[:-1]
    if np.any(ratios <= 1.0):
        raise ConfigurationError("node sizes must be distinct")
    center = np.exp(np.mean(np.log(ratios)))
    if np.any(np.abs(ratios / center - 1.0) > SPACING_TOL):
        raise ConfigurationError(f"node sizes {sizes.tolist()} are not geometrically spaced")


def _weighted_slope(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> Tuple[float, float]:
    x_bar = np.sum(w * x) / np.sum(w)
    y_bar = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - x_bar) ** 2)
    slope = float(np.sum(w * (x - x_bar) * (y - y_bar)) / sxx)
    return slope, float(np.sqrt(1.0 / sxx))


def stability_classify(runs: Sequence[CouplingRun], level: float = 0.95) -> StabilityVerdict:
    """
    Classify a rule from the decay of its disagreement rate in m.

    Fits log tv_hat against log m by weighted least squares with binomial
    delta-method weights; cells without disagreements enter at their
    one-sided Clopper-Pearson upper bound. The rule is stable with
    delta_hat = -slope - 1 when slope <= -1 holds at the one-sided ``level``.

    Raises:
        ConfigurationError: fewer than 4 node sizes, or sizes not geometric
    """
    ordered = sorted(runs, key=lambda r: r.m)
    sizes = np.array([r.m for r in ordered], dtype=float)
    _check_spacing(sizes)
    if any(r.reps == 0 for r in ordered):
        raise ConfigurationError("every run needs at least one successful rep")

    zero = np.array([r.disagree == 0 for r in ordered])
    rates = np.array([
        clopper_pearson_upper(0, r.reps) if r.disagree == 0 else r.disagree / r.reps
        for r in ordered
    ])
    reps = np.array([r.reps for r in ordered], dtype=float)
    variances = np.where(rates < 1.0, (1.0 - rates) / (rates * reps), 1.0 / reps)

    slope, stderr = _weighted_slope(np.log(sizes), np.log(rates), 1.0 / variances)
    node_sizes = [int(m) for m in sizes]

    if zero.all():
        logger.info("No disagreements at any node size; verdict rests on upper bounds only")
        return StabilityVerdict(
            kind=VerdictKind.STABLE, delta_hat=float("inf"), slope=slope, stderr=stderr,
            bounds_only=True, node_sizes=node_sizes,
        )

    z = float(norm.ppf(level))
    stable = slope + z * stderr <= -1.0
    logger.debug(f"Stability fit: slope {slope:.3f} +/- {stderr:.3f}, {int(zero.sum())} zero cells")
    return StabilityVerdict(
        kind=VerdictKind.STABLE if stable else VerdictKind.UNSTABLE,
        delta_hat=-slope - 1.0 if stable else None,
        slope=slope,
        stderr=stderr,
        bounds_only=False,
        node_sizes=node_sizes,
    )


def coupling_rows(runs: Sequence[CouplingRun]) -> list:
    """CSV rows (rule, m, reps, disagree, tv_hat, tv_hist, depth)."""
    return [[r.rule, r.m, r.reps, r.disagree, r.tv_hat, r.tv_hist, r.depth] for r in runs]


def split_distribution(
    rule: SplitRule,
    node_dist: NodeSampler,
    m: int,
    x1: Optional[Any],
    reps: int,
    seed: int = 0,
) -> Counter:
    """
    Uncoupled split histogram: each rep draws a whole fresh node, with X_1
    fixed to ``x1`` when given.
    """
    rng = np.random.default_rng(seed_sequence(seed, Stream.COUPLING, 0, m, reps))
    counts: Counter = Counter()
    for _ in range(reps):
        points = node_dist.draw(rng, m)
        if x1 is not None:
            points[0] = np.asarray(x1, dtype=float)
        counts[rule(points, node_dist.lower, node_dist.upper)] += 1
    return counts
