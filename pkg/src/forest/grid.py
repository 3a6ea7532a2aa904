"""
Predetermined candidate split positions.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.core.exceptions import ConfigurationError

# Absolute slack for comparisons against grid positions of the form i/g.
GRID_TOL = 1e-12


@dataclass(frozen=True)
class SplitGrid:
    """
    Data-independent cut positions per axis.

    The stored positions are the uniform grid; which of them a node may use
    depends on the node's interval and is decided by ``admissible``.
    """
    positions: Tuple[np.ndarray, ...]
    g: int
    alpha: float

    @property
    def p(self) -> int:
        return len(self.positions)

    def admissible(self, axis: int, a: float, b: float) -> np.ndarray:
        """
        Cuts strictly inside (a, b) that leave each side at least an alpha
        fraction of the interval length.
        """
        cuts = self.positions[axis]
        margin = self.alpha * (b - a) - GRID_TOL
        lo = np.searchsorted(cuts, a + margin, side="left")
        hi = np.searchsorted(cuts, b - margin, side="right")
        inside = cuts[lo:hi]
        return inside[(inside > a + GRID_TOL) & (inside < b - GRID_TOL)]


def min_child_count(alpha: float, m: int) -> int:
    """ceil(alpha * m), the fewest points a child may keep."""
    return max(1, math.ceil(alpha * m - 1e-9))


def build_split_grid(p: int, g: int, alpha: float) -> SplitGrid:
    """
    Build the uniform grid {1/g, ..., (g-1)/g} on every axis.

    Args:
        p: Feature dimension
        g: Per-axis resolution
        alpha: Regularity fraction in (0, 1/2)

    Returns:
        SplitGrid shared by every tree of a run
    """
    if p < 1:
        raise ConfigurationError(f"dimension must be at least 1, got {p}")
    if g < 2:
        raise ConfigurationError(f"grid resolution must be at least 2, got {g}")
    if not 0.0 < alpha < 0.5:
        raise ConfigurationError(f"alpha must lie in (0, 1/2), got {alpha}")

    cuts = np.arange(1, g, dtype=float) / g
    cuts.setflags(write=False)
    return SplitGrid(positions=tuple(cuts for _ in range(p)), g=g, alpha=alpha)
