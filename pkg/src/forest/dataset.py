"""
Immutable sample container.
"""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from src.core.exceptions import ConfigurationError


@dataclass(frozen=True)
class Dataset:
    """
    A sample (X_i, Y_i), i = 1..n, with covariates on the unit cube.

    Arrays are copied and marked read-only, so a dataset can be shared by
    concurrent workers.
    """
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float, copy=True)
        y = np.array(self.y, dtype=float, copy=True).reshape(-1)

        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ConfigurationError(f"x must be an n x p matrix with n, p >= 1, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise ConfigurationError(f"y has {y.shape[0]} entries, expected {x.shape[0]}")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ConfigurationError("x and y must be finite")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ConfigurationError("every covariate must lie in [0, 1]")

        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def p(self) -> int:
        return int(self.x.shape[1])

    def with_responses(self, y: np.ndarray) -> "Dataset":
        """Same covariates, new responses."""
        return Dataset(self.x, y)


class DataSampler(Protocol):
    """Generative distribution of (X, Y) pairs."""

    @property
    def p(self) -> int: ...

    def sample(self, rng: np.random.Generator, n: int) -> Dataset: ...


class UniformSampler:
    """
    X uniform on [0,1]^p and Y = f(X) + noise_scale * N(0, 1).

    With ``response=None`` the regression function is the coordinate mean.
    """

    def __init__(self, p: int, noise_scale: float = 0.0, response=None):
        if p < 1:
            raise ConfigurationError("dimension must be at least 1")
        self._p = p
        self.noise_scale = noise_scale
        self.response = response or (lambda x: x.mean(axis=1))

    @property
    def p(self) -> int:
        return self._p

    def sample(self, rng: np.random.Generator, n: int) -> Dataset:
        x = rng.random((n, self._p))
        y = self.response(x) + self.noise_scale * rng.standard_normal(n)
        return Dataset(x, y)
