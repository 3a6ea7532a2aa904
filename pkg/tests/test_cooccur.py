"""
Tests for terminal-node co-occurrence and its decay in the subsample size.
"""

import math

import numpy as np
import pytest

from src.core.exceptions import ConfigurationError, InsufficientDataError
from src.core.models import ForestConfig
from src.cooccur import (
    clopper_pearson_upper,
    correlation_ratio,
    decay_fit,
    estimate_m,
    m_kernel,
    predicted_decay_exponent,
    separation_profile,
)
from src.forest import UniformSampler


@pytest.fixture
def plane():
    return UniformSampler(p=2, noise_scale=0.1)


@pytest.fixture
def line():
    return UniformSampler(p=1, noise_scale=0.1)


def test_identical_points_always_share(plane):
    cfg = ForestConfig.build(n=64, s=64, trees=40)
    est = estimate_m(plane, [0.4, 0.6], [0.4, 0.6], cfg)

    assert est.m_hat == 1.0
    assert est.stderr == 0.0
    assert est.cp_upper == 1.0
    assert est.l1_distance == 0.0


def test_single_leaf_trees_always_share(plane):
    cfg = ForestConfig.build(n=5, s=5, k=3, trees=30)
    assert estimate_m(plane, [0.1, 0.1], [0.9, 0.9], cfg).m_hat == 1.0


def test_cyclic_midpoint_split_always_separates(line):
    """With delta = 1 and one cut at 0.5, points on either side never meet."""
    cfg = ForestConfig.build(n=200, s=200, trees=50, delta=1.0, grid_g=2)
    est = estimate_m(line, [0.25], [0.75], cfg)

    assert est.m_hat == 0.0
    assert est.shared == 0
    assert est.cp_upper == pytest.approx(1.0 - 0.05 ** (1.0 / 50))


def test_conditional_variant_is_a_frequency(plane):
    cfg = ForestConfig.build(n=32, s=32, trees=60, seed=2)
    est = estimate_m(plane, [0.3, 0.3], [0.35, 0.35], cfg, conditional=True)

    assert est.conditional
    assert 0.0 <= est.m_hat <= 1.0
    assert est.m_hat <= est.cp_upper


def test_estimate_m_is_seeded(plane):
    cfg = ForestConfig.build(n=32, s=32, trees=50, seed=7)
    first = estimate_m(plane, [0.3, 0.3], [0.4, 0.4], cfg)
    again = estimate_m(plane, [0.3, 0.3], [0.4, 0.4], cfg)
    assert first.shared == again.shared


def test_cooccurrence_falls_along_a_ray(plane):
    cfg = ForestConfig.build(n=32, s=32, trees=300, seed=1)
    x = [0.3, 0.3]
    estimates = [estimate_m(plane, x, [0.3 + d, 0.3 + d], cfg) for d in (0.0, 0.05, 0.15)]

    for near, far in zip(estimates, estimates[1:]):
        assert far.m_hat <= near.m_hat + 2.0 * math.hypot(near.stderr, far.stderr)


def test_query_points_are_validated(plane):
    cfg = ForestConfig.build(n=16, s=16, trees=2)
    with pytest.raises(ConfigurationError):
        estimate_m(plane, [0.5], [0.5], cfg)
    with pytest.raises(ConfigurationError):
        estimate_m(plane, [0.5, 1.2], [0.5, 0.5], cfg)


def test_clopper_pearson_upper_bound():
    assert clopper_pearson_upper(0, 50) == pytest.approx(1.0 - 0.05 ** (1.0 / 50))
    assert clopper_pearson_upper(50, 50) == 1.0
    assert clopper_pearson_upper(10, 100) > 0.1
    with pytest.raises(ConfigurationError):
        clopper_pearson_upper(0, 0)


def test_predicted_decay_exponent():
    assert predicted_decay_exponent(0.5) == pytest.approx(-1.0)
    assert predicted_decay_exponent(0.0) == 0.0
    assert predicted_decay_exponent(1.0) == -math.inf


def test_decay_fit_recovers_power_law():
    series = [(s, s ** -1.5) for s in (128, 256, 512, 1024)]
    fit = decay_fit(series, delta=0.6)

    assert fit.slope == pytest.approx(-1.5, abs=1e-9)
    assert fit.stderr == pytest.approx(0.0, abs=1e-9)
    assert fit.n_points == 4
    assert fit.slope_below(-1.0)
    assert fit.predicted_exponent == pytest.approx(-math.log2(1 / 0.4))


def test_decay_fit_constant_series_is_flat():
    fit = decay_fit([(128, 0.2), (256, 0.2), (512, 0.2)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert not fit.slope_below(-1.0)


def test_decay_fit_drops_zero_cells():
    fit = decay_fit([(64, 0.5), (128, 0.25), (256, 0.125), (512, 0.0)])
    assert fit.dropped == [512.0]
    assert fit.n_points == 3
    assert fit.slope == pytest.approx(-1.0)


def test_decay_fit_needs_three_sizes():
    with pytest.raises(InsufficientDataError):
        decay_fit([(64, 0.5), (128, 0.25), (256, 0.0)])


def test_kernel_form_vanishes_across_forced_cut(line):
    """Every tree cuts at 0.5, so no anchor shares a leaf with both sides."""
    cfg = ForestConfig.build(n=50, s=50, trees=10, delta=1.0, grid_g=2)
    est = m_kernel(line, [0.25], [0.75], cfg, anchors=20)

    assert est.value == 0.0
    assert est.trees_per_anchor == 10
    assert est.anchors == 20


def test_kernel_form_at_one_point_is_positive(plane):
    cfg = ForestConfig.build(n=8, s=8, trees=20, seed=4)
    est = m_kernel(plane, [0.5, 0.5], [0.5, 0.5], cfg, anchors=30)
    assert est.value > 0.0
    assert est.stderr >= 0.0


def test_correlation_ratio_bounds(plane, line):
    cfg = ForestConfig.build(n=8, s=8, trees=20, seed=4)
    assert correlation_ratio(plane, [0.5, 0.5], [0.5, 0.5], cfg, anchors=30) == pytest.approx(1.0)

    forced = ForestConfig.build(n=50, s=50, trees=10, delta=1.0, grid_g=2, k=20)
    assert correlation_ratio(line, [0.25], [0.75], forced, anchors=20) == 0.0


def test_separation_profile_is_a_survival_curve(plane):
    cfg = ForestConfig.build(n=64, s=64, trees=50, seed=3)
    profile = separation_profile(plane, [0.3, 0.3], [0.45, 0.45], cfg)

    survival = np.array(profile.survival)
    assert survival[0] == 1.0
    assert survival[-1] == 0.0
    assert np.all(np.diff(survival) <= 0.0)


def test_estimate_m_is_symmetric(plane):
    """Swapping the query points changes nothing on shared trees and little on fresh ones."""
    cfg = ForestConfig.build(n=32, s=32, trees=400, seed=6)
    x, x_bar = [0.3, 0.3], [0.4, 0.35]
    forward = estimate_m(plane, x, x_bar, cfg)

    assert estimate_m(plane, x_bar, x, cfg).m_hat == forward.m_hat

    backward = estimate_m(plane, x_bar, x, cfg, seed=19)
    assert abs(forward.m_hat - backward.m_hat) <= 3.0 * math.hypot(forward.stderr, backward.stderr)


def test_kernel_form_obeys_cauchy_schwarz(plane):
    cfg = ForestConfig.build(n=32, s=32, trees=30, seed=8)
    x, x_bar = [0.3, 0.3], [0.4, 0.35]
    cross = m_kernel(plane, x, x_bar, cfg, anchors=40)
    own_x = m_kernel(plane, x, x, cfg, anchors=40)
    own_x_bar = m_kernel(plane, x_bar, x_bar, cfg, anchors=40)

    assert cross.value <= math.sqrt(own_x.value * own_x_bar.value) + 3.0 * cross.stderr


# Both points sit on grid cuts at g = 100: a cut at 0.5 parts them, a cut
# above 0.5 does not, so survival falls geometrically with depth.
PAIR_ON_CUTS = ([0.25, 0.25], [0.5, 0.5])


def decay_series(sampler, pair, delta, sizes, trees):
    return [
        estimate_m(
            sampler, *pair,
            ForestConfig.build(n=s, s=s, trees=trees, delta=delta, k=33, grid_g=100, seed=11),
        )
        for s in sizes
    ]


@pytest.mark.slow
def test_cooccurrence_decays_faster_than_one_over_s(plane):
    """At delta = 0.6 the slope of log m_hat against log s is below -1 with 95% confidence."""
    series = decay_series(plane, PAIR_ON_CUTS, 0.6, (128, 256, 512, 1024, 2048), trees=5000)
    # The upper edge of a 90% band is a one-sided 95% bound.
    fit = decay_fit(series, level=0.90, delta=0.6)

    assert fit.n_points >= 3
    assert fit.slope_below(-1.0)


@pytest.mark.slow
def test_greedy_trees_need_not_decay_faster_than_one_over_s(plane):
    """With delta = 0 a close pair inside one dyadic cell keeps sharing leaves."""
    series = decay_series(plane, ([0.3, 0.3], [0.33, 0.33]), 0.0, (128, 256, 512, 1024), trees=1000)
    fit = decay_fit(series, delta=0.0)

    assert fit.n_points == 4
    assert fit.predicted_exponent == 0.0
    assert not fit.slope_below(-1.0)
