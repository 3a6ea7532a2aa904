"""
Truncated Gaussian mixture design of the correlation study.
"""

from typing import Optional, Tuple

import numpy as np

from src.core.exceptions import ConfigurationError
from src.core.models import SimDesign
from src.core.seeding import Stream, seed_sequence
from src.forest.dataset import Dataset

# Rejection rounds after which sampling gives up.
MAX_ROUNDS = 10_000


def draw_mixture(
    rng: np.random.Generator,
    n: int,
    means: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Equal-weight mixture of identity-covariance Gaussians truncated to the unit square.

    The component is drawn once per point; rejected points are redrawn from
    the same component.

    Returns:
        (n x p covariates, n component labels)
    """
    means = np.asarray(means, dtype=float)
    components = rng.integers(means.shape[0], size=n)
    x = np.empty((n, means.shape[1]))
    pending = np.arange(n)

    for _ in range(MAX_ROUNDS):
        if not pending.size:
            return x, components
        proposal = means[components[pending]] + rng.standard_normal((pending.size, means.shape[1]))
        inside = np.all((proposal >= 0.0) & (proposal <= 1.0), axis=1)
        x[pending[inside]] = proposal[inside]
        pending = pending[~inside]

    raise ConfigurationError(f"rejection sampling did not finish in {MAX_ROUNDS} rounds")


def truth(x: np.ndarray) -> np.ndarray:
    """E[Y | X = x], the coordinate mean."""
    return np.atleast_2d(np.asarray(x, dtype=float)).mean(axis=1)


class MixtureDesignSampler:
    """DataSampler of (X, Y) under a SimDesign."""

    def __init__(self, design: SimDesign):
        self.design = design
        self.means = np.asarray(design.means, dtype=float)

    @property
    def p(self) -> int:
        return int(self.means.shape[1])

    def sample(self, rng: np.random.Generator, n: int) -> Dataset:
        x, _ = draw_mixture(rng, n, self.means)
        y = truth(x) + self.design.noise_scale * rng.standard_normal(n)
        return Dataset(x, y)


def sample_design(design: SimDesign, n: Optional[int] = None, index: int = 0) -> Dataset:
    """
    Draw the n-point dataset number ``index`` of the design.

    Args:
        design: Simulation design (its seed fixes the draw)
        n: Sample size, design.n by default
        index: Dataset number, for independent replicates
    """
    n = design.n if n is None else n
    if n < 1:
        raise ConfigurationError(f"n must be at least 1, got {n}")
    rng = np.random.default_rng(seed_sequence(design.seed, Stream.DATA, index))
    return MixtureDesignSampler(design).sample(rng, n)
