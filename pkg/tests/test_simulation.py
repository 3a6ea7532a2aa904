"""
Tests for the mixture design, the correlation sweep and interval coverage.
"""

import math

import numpy as np
import pytest
from scipy import stats

from src.core.exceptions import ConfigurationError, InsufficientDataError
from src.core.models import CorrelationCurve, CurveRow, IntervalMode, SimDesign
from src.inference import fit_forest
from src.simulation import (
    bucket_curve,
    cell_centers,
    correlation_sweep,
    coverage_table,
    draw_mixture,
    heuristic_compare,
    log_linearity,
    sample_design,
    to_log_scale,
)
from src.simulation.coverage import contrast_label, parse_contrasts
from src.simulation.sweep import fit_decay_rate, monotone_violations

MEANS = np.array([[0.3, 0.3], [0.3, 0.7], [0.7, 0.3], [0.7, 0.7]])


@pytest.fixture
def small_design():
    return SimDesign(n=300, s=30, trees=40, grid_g=11, seed=5)


def exponential_curve(lam=2.0, distances=(0.0, 0.5, 1.0, 2.0)):
    rows = [CurveRow(distance=d, correlation=math.exp(-lam * d), count=10, stderr=0.0) for d in distances]
    return CorrelationCurve(rows=rows, n=100, s=10, trees=50)


# Design

def test_mixture_draws_stay_in_square():
    x, _ = draw_mixture(np.random.default_rng(0), 5000, MEANS)
    assert x.shape == (5000, 2)
    assert np.all((x >= 0.0) & (x <= 1.0))


def test_mixture_components_are_equally_likely():
    _, components = draw_mixture(np.random.default_rng(1), 20000, MEANS)
    shares = np.bincount(components, minlength=4) / 20000
    assert np.all(np.abs(shares - 0.25) <= 3.0 * math.sqrt(0.25 * 0.75 / 20000))


def test_design_response_is_coordinate_mean():
    data = sample_design(SimDesign(n=100_000, seed=2))
    fit = stats.linregress(data.x.mean(axis=1), data.y)
    assert fit.slope == pytest.approx(1.0, abs=0.02)
    assert fit.intercept == pytest.approx(0.0, abs=0.01)


def test_sample_design_is_seeded():
    design = SimDesign(n=50, seed=3)
    first, again = sample_design(design), sample_design(design)
    other = sample_design(design, index=1)

    assert np.array_equal(first.x, again.x)
    assert not np.array_equal(first.x, other.x)


def test_design_rejects_means_outside_square():
    with pytest.raises(ConfigurationError):
        SimDesign.build(means=((0.3, 1.2),))


# Curves

def test_cell_centers():
    assert np.allclose(cell_centers(2), [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])


def test_bucket_curve_groups_by_distance():
    distances = np.array([0.0, 0.01, 0.015, 0.03, 0.05])
    correlations = np.array([np.nan, 0.9, 0.8, 0.5, np.nan])
    curve = bucket_curve(distances, correlations, width=0.02, n=100, s=10, trees=20)

    assert [row.count for row in curve.rows] == [1, 2, 1]
    assert curve.rows[0].correlation == 1.0
    assert curve.rows[1].distance == pytest.approx(0.0125)
    assert curve.rows[1].correlation == pytest.approx(0.85)
    assert curve.rows[2].distance == pytest.approx(0.03)
    assert curve.excluded == 1


def test_exponential_fit_and_linear_bound():
    comparison = heuristic_compare(exponential_curve(), s=500, p=2)
    rows = {row.distance: row for row in comparison.rows}

    assert comparison.lam == pytest.approx(2.0)
    assert rows[0.0].linear_bound == 1.0
    assert rows[0.0].exponential_fit == 1.0
    assert rows[2.0].linear_bound == 0.0
    assert not rows[2.0].conservative
    assert rows[0.5].conservative


def test_log_scale_keeps_rows_above_floor():
    curve = exponential_curve(distances=(0.0, 1.0, 3.0))
    assert [row.distance for row in to_log_scale(curve, floor=0.01).rows] == [0.0, 1.0]
    assert fit_decay_rate(curve, floor=0.01) == pytest.approx(2.0)


def test_log_linearity_of_exponential_curve():
    fit = log_linearity(exponential_curve(), max_distance=2.0)
    assert fit.slope == pytest.approx(-2.0)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.n_points == 4

    with pytest.raises(InsufficientDataError):
        log_linearity(exponential_curve(), max_distance=0.6)


def test_monotone_violations():
    assert monotone_violations(exponential_curve()) == []
    rising = CorrelationCurve(
        rows=[
            CurveRow(distance=0.0, correlation=1.0, count=5, stderr=0.0),
            CurveRow(distance=0.1, correlation=0.5, count=5, stderr=0.01),
            CurveRow(distance=0.2, correlation=0.6, count=5, stderr=0.01),
        ],
        n=100, s=10, trees=50,
    )
    assert monotone_violations(rising) == [2]


def test_correlation_sweep_on_small_design(small_design):
    curve = correlation_sweep(small_design)

    assert curve.rows[0].distance == 0.0
    assert curve.rows[0].correlation == 1.0
    # Five self-pairs plus the cell centered at (0.5, 0.5).
    assert curve.rows[0].count == 6
    assert sum(row.count for row in curve.rows) == 5 + 5 * 121 - curve.excluded
    assert np.all(np.diff(curve.distances()) > 0.0)


def test_sweep_needs_two_trees(small_design):
    with pytest.raises(ConfigurationError):
        correlation_sweep(small_design.with_updates(trees=1))


# Coverage

def test_contrast_helpers():
    assert contrast_label((0.3, 0.3), (0.7, 0.7)) == "(0.3,0.3)-(0.7,0.7)"
    assert parse_contrasts([[[0.3, 0.3], [0.7, 0.7]]]) == [((0.3, 0.3), (0.7, 0.7))]
    with pytest.raises(ConfigurationError):
        parse_contrasts([[[0.3, 0.3]]])


def test_coverage_needs_enough_trials():
    design = SimDesign(n=100, s=10, trees=5)
    with pytest.raises(ConfigurationError):
        coverage_table(design, [((0.5, 0.5), (0.6, 0.6))], trials=99)


def test_coverage_of_small_design():
    design = SimDesign(n=200, s=20, trees=20, grid_g=11, seed=8)
    contrasts = [((0.5, 0.5), (0.5, 0.5)), ((0.3, 0.3), (0.7, 0.7))]
    rows = coverage_table(design, contrasts, trials=100, n_anchors=10, mc_r=2)
    table = {(row.contrast, row.mode): row for row in rows}

    assert len(rows) == 4
    same = contrast_label(*contrasts[0])
    apart = contrast_label(*contrasts[1])
    assert table[(same, IntervalMode.DIAGONAL)].coverage == 1.0
    assert table[(same, IntervalMode.HEURISTIC)].coverage == 1.0
    assert table[(apart, IntervalMode.HEURISTIC)].coverage >= table[(apart, IntervalMode.DIAGONAL)].coverage
    assert all(row.trials == 100 for row in rows)


@pytest.mark.slow
def test_forest_is_nearly_unbiased_at_center():
    design = SimDesign(n=10_000, s=500, trees=2000, seed=12)
    est = fit_forest(sample_design(design), [[0.5, 0.5]], design.forest_config())
    assert abs(est.estimates[0] - 0.5) < 0.05


@pytest.mark.slow
def test_reduced_sweep_profile():
    design = SimDesign(n=10_000, s=500, trees=500, grid_g=51, seed=13)
    curve = correlation_sweep(design)
    comparison = heuristic_compare(curve, s=design.s, p=2)

    assert curve.rows[0].correlation == 1.0
    assert monotone_violations(curve) == []
    assert log_linearity(curve, max_distance=0.4).r_squared >= 0.9
    assert all(row.conservative for row in comparison.rows if row.distance >= 0.05)


@pytest.mark.slow
def test_distant_contrast_coverage_at_reduced_budget():
    design = SimDesign(n=4000, s=200, trees=300, grid_g=51, seed=21)
    contrast = ((0.25, 0.25), (0.75, 0.75))
    rows = coverage_table(design, [contrast], level=0.95, trials=200, include_mc=True)
    table = {row.mode: row.coverage for row in rows}

    assert table[IntervalMode.DIAGONAL] >= 0.90
    assert table[IntervalMode.HEURISTIC] >= table[IntervalMode.DIAGONAL]
