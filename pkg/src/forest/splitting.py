"""
Split selection for honest trees.

Both the coin-driven cyclic split and the criterion split look only at
covariates. Axes are 0-based throughout; the J-th heads of the coin selects
axis (J - 1) mod p.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.core.models import SplitCriterion, SplitKind
from src.forest.grid import SplitGrid, min_child_count

# Relative tolerance under which two objective values count as tied.
TIE_TOL = 1e-12


@dataclass(frozen=True)
class SplitDecision:
    """A cut at ``cut`` on ``axis``; points with x[axis] >= cut go right."""
    kind: SplitKind
    axis: int
    cut: float


def cyclic_axis(heads: int, p: int) -> int:
    """Axis chosen on the ``heads``-th heads of the coin (heads >= 1)."""
    return (heads - 1) % p


def regular_cuts(
    sorted_values: np.ndarray,
    cuts: np.ndarray,
    alpha: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Keep the cuts that leave at least ceil(alpha * m) points on each side.

    Args:
        sorted_values: Node coordinates on one axis, ascending
        cuts: Admissible grid cuts on that axis
        alpha: Regularity fraction

    Returns:
        (surviving cuts, number of points left of each surviving cut)
    """
    m = sorted_values.shape[0]
    need = min_child_count(alpha, m)
    left = np.searchsorted(sorted_values, cuts, side="left")
    keep = (left >= need) & (m - left >= need)
    return cuts[keep], left[keep]


def _first_minimum(values: np.ndarray) -> int:
    best = values.min()
    tied = np.flatnonzero(values <= best + TIE_TOL * max(1.0, abs(best)))
    return int(tied[0])


def _centroid_objective(sorted_points: np.ndarray, left: np.ndarray) -> np.ndarray:
    """Within-child sums of squared distances to the child centroids."""
    m = sorted_points.shape[0]
    s1 = np.vstack([np.zeros((1, sorted_points.shape[1])), np.cumsum(sorted_points, axis=0)])
    s2 = np.concatenate([[0.0], np.cumsum(np.einsum("ij,ij->i", sorted_points, sorted_points))])

    right = m - left
    left_sums = s1[left]
    right_sums = s1[m] - left_sums
    left_sse = s2[left] - np.einsum("ij,ij->i", left_sums, left_sums) / left
    right_sse = (s2[m] - s2[left]) - np.einsum("ij,ij->i", right_sums, right_sums) / right
    return left_sse + right_sse


def criterion_split(
    points: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    grid: SplitGrid,
    criterion: SplitCriterion = SplitCriterion.CENTROID,
) -> Optional[SplitDecision]:
    """
    Pick the admissible regular cut minimizing the criterion over all axes.

    The centroid criterion minimizes the summed squared L2 distances of the
    points to their child centroids; the balanced criterion minimizes the
    difference of the child counts. Ties go to the lowest axis, then the
    lowest cut.

    Args:
        points: Node covariates, m x p
        lower: Node lower bounds per axis
        upper: Node upper bounds per axis
        grid: Predetermined cut positions
        criterion: Which objective to minimize

    Returns:
        The chosen split, or None when no admissible regular cut exists
    """
    m, p = points.shape
    if m < 2:
        return None

    best: Optional[Tuple[float, int, float]] = None
    for axis in range(p):
        cuts = grid.admissible(axis, lower[axis], upper[axis])
        if cuts.size == 0:
            continue

        order = np.argsort(points[:, axis], kind="stable")
        sorted_points = points[order]
        cuts, left = regular_cuts(sorted_points[:, axis], cuts, grid.alpha)
        if cuts.size == 0:
            continue

        if criterion == SplitCriterion.CENTROID:
            objective = _centroid_objective(sorted_points, left)
        else:
            objective = np.abs(2 * left - m).astype(float)

        i = _first_minimum(objective)
        value = float(objective[i])
        if best is None or value < best[0] - TIE_TOL * max(1.0, abs(best[0])):
            best = (value, axis, float(cuts[i]))

    if best is None:
        return None
    return SplitDecision(kind=SplitKind.CRITERION, axis=best[1], cut=best[2])


def cyclic_split(
    points: np.ndarray,
    axis: int,
    lower: np.ndarray,
    upper: np.ndarray,
    grid: SplitGrid,
) -> Optional[SplitDecision]:
    """
    Data-independent split on a forced axis.

    Picks the admissible regular grid cut closest to the node midpoint on
    ``axis``, the lower one on ties.

    Returns:
        The split, or None when the axis has no admissible regular cut
    """
    cuts = grid.admissible(axis, lower[axis], upper[axis])
    if cuts.size == 0:
        return None
    cuts, _ = regular_cuts(np.sort(points[:, axis]), cuts, grid.alpha)
    if cuts.size == 0:
        return None

    midpoint = 0.5 * (lower[axis] + upper[axis])
    i = _first_minimum(np.abs(cuts - midpoint))
    return SplitDecision(kind=SplitKind.RANDOM_CYCLIC, axis=axis, cut=float(cuts[i]))
