"""
Tests for split rules, coupled split draws and stability verdicts.
"""

import math

import numpy as np
import pytest

from src.core.exceptions import ConfigurationError, EmptyNodeError
from src.core.models import CouplingRun, VerdictKind
from src.stability import (
    ArgmaxFirstRule,
    CriterionRule,
    IgnoreFirstRule,
    LipschitzMeanRule,
    UniformNodeSampler,
    build_rule,
    coordinate,
    coupled_draws,
    coupled_split_tv,
    knife_edge_mean_rule,
    separated_mean_rule,
    split_distribution,
    stability_classify,
)

X1 = [0.9, 0.1]


@pytest.fixture
def square():
    return UniformNodeSampler.unit_cube(2)


class FlakyRule:
    """Fails whenever the first point sits in the right half."""
    name = "flaky"

    def __call__(self, points, lower, upper):
        if points[0, 0] > 0.5:
            raise ValueError("right half")
        return 0


def planted_runs(rates, sizes=(50, 100, 200, 400), reps=10**8):
    return [
        CouplingRun(
            rule="planted", m=m, reps=reps, disagree=int(round(rate * reps)),
            tv_hat=rate, tv_hist=0.0, x1=X1,
        )
        for m, rate in zip(sizes, rates)
    ]


# Rules

def test_knife_edge_rule_thresholds_the_mean():
    rule = knife_edge_mean_rule()
    lower, upper = np.zeros(2), np.ones(2)
    assert rule(np.array([[0.7, 0.0], [0.7, 1.0]]), lower, upper) == 1
    assert rule(np.array([[0.3, 0.0], [0.3, 1.0]]), lower, upper) == 2
    assert rule(np.array([[0.4, 0.2], [0.6, 0.8]]), lower, upper) == 1


def test_separated_rule_prefers_second_near_uniform_mean():
    rule = separated_mean_rule()
    points = np.array([[0.5, 0.5], [0.52, 0.1]])
    assert rule(points, np.zeros(2), np.ones(2)) == 2
    assert rule.name == "separated-mean"


def test_lipschitz_rule_validation():
    with pytest.raises(ConfigurationError):
        LipschitzMeanRule([lambda mu: mu[0]], [coordinate(0)])
    with pytest.raises(EmptyNodeError):
        knife_edge_mean_rule()(np.empty((0, 2)), np.zeros(2), np.ones(2))


def test_build_rule_by_name():
    assert build_rule("argmax-first").name == "argmax-first"
    assert isinstance(build_rule("centroid", p=2, g=11, alpha=0.1), CriterionRule)
    with pytest.raises(ConfigurationError):
        build_rule("coin-toss")


def test_node_sampler_bounds():
    with pytest.raises(ConfigurationError):
        UniformNodeSampler([0.0, 0.5], [1.0, 0.5])
    node = UniformNodeSampler([0.0, 0.5], [0.5, 1.0])
    draws = node.draw(np.random.default_rng(0), 500)
    assert np.all(draws >= node.lower) and np.all(draws < node.upper)


# Coupling

def test_rule_ignoring_first_point_never_disagrees(square):
    rule = IgnoreFirstRule(CriterionRule.on_grid(2, 11, 0.1))
    run = coupled_split_tv(rule, square, m=20, x1=X1, reps=200)

    assert run.disagree == 0
    assert run.tv_hat == 0.0
    assert run.reps == 200


def test_argmax_rule_disagrees_half_the_time(square):
    run = coupled_split_tv(ArgmaxFirstRule(), square, m=20, x1=X1, reps=4000, seed=1)
    assert abs(run.tv_hat - 0.5) <= 4.0 * math.sqrt(0.25 / 4000)


def test_coupling_keeps_conditioned_marginal(square):
    """S' has the law of the rule on a node whose first point is x1."""
    rule = knife_edge_mean_rule()
    pairs = coupled_draws(rule, square, m=20, x1=X1, reps=4000, seed=2)
    coupled = np.mean([b == 1 for _, b in pairs])

    direct = split_distribution(rule, square, m=20, x1=X1, reps=4000, seed=3)
    uncoupled = direct[1] / 4000

    se = math.sqrt(coupled * (1 - coupled) / 4000 + uncoupled * (1 - uncoupled) / 4000)
    assert abs(coupled - uncoupled) <= 4.0 * se


def test_coupling_tv_bounds_histogram_tv(square):
    run = coupled_split_tv(knife_edge_mean_rule(), square, m=30, x1=X1, reps=2000, seed=4)
    assert run.tv_hat >= run.tv_hist - 1e-12


def test_rule_failures_are_counted_and_excluded():
    node = UniformNodeSampler.unit_cube(2)
    run = coupled_split_tv(FlakyRule(), node, m=10, x1=[0.1, 0.1], reps=400, seed=5)

    assert run.failures > 0
    assert run.reps + run.failures == 400
    assert run.disagree == 0


def test_second_level_coupling(square):
    rule = CriterionRule.on_grid(2, 11, 0.1)
    run = coupled_split_tv(rule, square, m=40, x1=X1, reps=100, depth=2, seed=6)
    assert run.depth == 2
    assert run.reps + run.failures == 100


def test_second_level_needs_split_decisions(square):
    with pytest.raises(ConfigurationError):
        coupled_split_tv(ArgmaxFirstRule(), square, m=10, x1=X1, reps=10, depth=2)


def test_coupling_rejects_bad_arguments(square):
    with pytest.raises(ConfigurationError):
        coupled_draws(ArgmaxFirstRule(), square, m=1, x1=X1, reps=10)
    with pytest.raises(ConfigurationError):
        coupled_draws(ArgmaxFirstRule(), square, m=10, x1=[0.5], reps=10)
    with pytest.raises(ConfigurationError):
        coupled_draws(ArgmaxFirstRule(), square, m=10, x1=X1, reps=10, depth=3)


# Classification

def test_inverse_square_decay_is_stable():
    verdict = stability_classify(planted_runs([m ** -2.0 for m in (50, 100, 200, 400)]))

    assert verdict.kind == VerdictKind.STABLE
    assert verdict.delta_hat == pytest.approx(1.0, abs=1e-6)
    assert verdict.node_sizes == [50, 100, 200, 400]


def test_constant_disagreement_is_unstable():
    verdict = stability_classify(planted_runs([0.3] * 4, reps=1000))
    assert verdict.kind == VerdictKind.UNSTABLE
    assert verdict.delta_hat is None


def test_no_disagreements_rests_on_bounds():
    verdict = stability_classify(planted_runs([0.0] * 4, reps=1000))
    assert verdict.kind == VerdictKind.STABLE
    assert verdict.delta_hat == math.inf
    assert verdict.bounds_only


def test_classification_needs_geometric_sizes():
    with pytest.raises(ConfigurationError):
        stability_classify(planted_runs([0.1] * 3, sizes=(50, 100, 200)))
    with pytest.raises(ConfigurationError):
        stability_classify(planted_runs([0.1] * 4, sizes=(50, 100, 110, 400)))


@pytest.mark.slow
def test_separated_rule_stable_and_argmax_unstable(square):
    sizes = (50, 100, 200, 400, 800)
    separated = [coupled_split_tv(separated_mean_rule(), square, m, X1, reps=20000, seed=7) for m in sizes]
    argmax = [coupled_split_tv(ArgmaxFirstRule(), square, m, X1, reps=20000, seed=7) for m in sizes]

    assert stability_classify(separated).kind == VerdictKind.STABLE
    assert stability_classify(argmax).kind == VerdictKind.UNSTABLE


@pytest.mark.slow
def test_centroid_rule_disagreement_does_not_grow(square):
    rule = CriterionRule.on_grid(2, 101, 0.01)
    small = coupled_split_tv(rule, square, 50, X1, reps=2000, seed=8)
    large = coupled_split_tv(rule, square, 400, X1, reps=2000, seed=8)

    se = math.sqrt(small.tv_hat * (1 - small.tv_hat) / 2000 + large.tv_hat * (1 - large.tv_hat) / 2000)
    assert large.tv_hat <= small.tv_hat + 2.0 * se
