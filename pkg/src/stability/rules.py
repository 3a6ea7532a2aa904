"""
Split rules for the stability lab.

A rule is called as ``rule(points, lower, upper)`` on the m points of a node
(row 0 is X_1) and the node's bounds, and returns a hashable split
identifier. Rules that return a SplitDecision can be coupled at depth 2.
"""

from typing import Callable, Hashable, Optional, Protocol, Sequence

import numpy as np

from src.core.exceptions import ConfigurationError, EmptyNodeError
from src.core.models import SplitCriterion
from src.forest.grid import SplitGrid, build_split_grid
from src.forest.splitting import SplitDecision, criterion_split


class SplitRule(Protocol):
    """Deterministic split rule on the points of one node."""
    name: str

    def __call__(self, points: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Hashable: ...


class NodeSampler(Protocol):
    """Distribution of the points that enter a node."""
    lower: np.ndarray
    upper: np.ndarray

    def draw(self, rng: np.random.Generator, m: int) -> np.ndarray: ...

    def restrict(self, lower: np.ndarray, upper: np.ndarray) -> "NodeSampler": ...


class UniformNodeSampler:
    """Points uniform on the node rectangle [lower, upper)."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise ConfigurationError("node bounds must satisfy lower < upper on every axis")

    @classmethod
    def unit_cube(cls, p: int) -> "UniformNodeSampler":
        return cls(np.zeros(p), np.ones(p))

    @property
    def p(self) -> int:
        return int(self.lower.shape[0])

    def draw(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return self.lower + (self.upper - self.lower) * rng.random((m, self.p))

    def restrict(self, lower, upper) -> "UniformNodeSampler":
        return UniformNodeSampler(lower, upper)


class CriterionRule:
    """The forest's covariate-only criterion split, on a fixed grid."""

    def __init__(self, grid: SplitGrid, criterion: SplitCriterion = SplitCriterion.CENTROID):
        self.grid = grid
        self.criterion = criterion
        self.name = criterion.value

    @classmethod
    def on_grid(cls, p: int, g: int = 101, alpha: float = 0.01, criterion: SplitCriterion = SplitCriterion.CENTROID):
        return cls(build_split_grid(p, g, alpha), criterion)

    def __call__(self, points: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Optional[SplitDecision]:
        if points.shape[0] == 0:
            raise EmptyNodeError("cannot split a node without points")
        return criterion_split(points, lower, upper, self.grid, self.criterion)


class IgnoreFirstRule:
    """Wraps a rule so that it never sees X_1."""

    def __init__(self, inner: SplitRule):
        self.inner = inner
        self.name = f"ignore-first({inner.name})"

    def __call__(self, points: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Hashable:
        return self.inner(points[1:], lower, upper)


class ArgmaxFirstRule:
    """Splits on the axis of X_1's largest coordinate. Unstable on purpose."""
    name = "argmax-first"

    def __call__(self, points: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Hashable:
        if points.shape[0] == 0:
            raise EmptyNodeError("cannot split a node without points")
        return int(np.argmax(points[0]))


Objective = Callable[[np.ndarray], float]
Feature = Callable[[np.ndarray], np.ndarray]


class LipschitzMeanRule:
    """
    Chooses among P candidate splits by objectives of Q sample means.

    mu_k is the node mean of feature m_k; the rule returns the 1-based index
    of the largest objective f_i(mu_1, ..., mu_Q), the lowest on ties.
    """

    def __init__(self, objectives: Sequence[Objective], features: Sequence[Feature], name: str = "lipschitz-mean"):
        if len(objectives) < 2:
            raise ConfigurationError(f"need at least 2 objectives, got {len(objectives)}")
        if len(features) < 1:
            raise ConfigurationError("need at least 1 feature")
        self.objectives = tuple(objectives)
        self.features = tuple(features)
        self.name = name

    def means(self, points: np.ndarray) -> np.ndarray:
        """Feature means mu_1..mu_Q over the node."""
        if points.shape[0] == 0:
            raise EmptyNodeError("cannot split a node without points")
        return np.array([float(np.mean(feature(points))) for feature in self.features])

    def __call__(self, points: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Hashable:
        mu = self.means(points)
        values = np.array([f(mu) for f in self.objectives], dtype=float)
        return int(np.argmax(values)) + 1


def lipschitz_mean_rule(
    objectives: Sequence[Objective],
    features: Sequence[Feature],
    name: str = "lipschitz-mean",
) -> LipschitzMeanRule:
    """Build a rule choosing argmax_i f_i(mu_1, ..., mu_Q) over node feature means."""
    return LipschitzMeanRule(objectives, features, name)


class Coordinate:
    """Feature x -> x[axis]."""

    def __init__(self, axis: int):
        self.axis = axis

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return points[:, self.axis]


def coordinate(axis: int) -> Coordinate:
    """Feature x -> x[axis] (0-based)."""
    return Coordinate(axis)


def _first_mean(mu: np.ndarray) -> float:
    return float(mu[0])


def _complement(mu: np.ndarray) -> float:
    return 1.0 - float(mu[0])


def _shifted_complement(mu: np.ndarray) -> float:
    return 1.1 - float(mu[0])


def separated_mean_rule() -> LipschitzMeanRule:
    """f_1 = mu_1 against f_2 = 1.1 - mu_1; the objectives differ by 0.1 at uniform means."""
    return LipschitzMeanRule([_first_mean, _shifted_complement], [coordinate(0)], name="separated-mean")


def knife_edge_mean_rule() -> LipschitzMeanRule:
    """f_1 = mu_1 against f_2 = 1 - mu_1; the objectives tie at uniform means."""
    return LipschitzMeanRule([_first_mean, _complement], [coordinate(0)], name="knife-edge-mean")


def rule_name(rule: Callable) -> str:
    return getattr(rule, "name", None) or getattr(rule, "__name__", type(rule).__name__)


RULE_NAMES = ("separated-mean", "knife-edge-mean", "argmax-first", "centroid", "balanced")


def build_rule(name: str, p: int = 2, g: int = 101, alpha: float = 0.01) -> SplitRule:
    """Rule by name, as used in experiment configs."""
    if name == "separated-mean":
        return separated_mean_rule()
    if name == "knife-edge-mean":
        return knife_edge_mean_rule()
    if name == "argmax-first":
        return ArgmaxFirstRule()
    if name in ("centroid", "balanced"):
        return CriterionRule.on_grid(p, g, alpha, SplitCriterion(name))
    raise ConfigurationError(f"unknown split rule {name!r}; choose from {', '.join(RULE_NAMES)}")
