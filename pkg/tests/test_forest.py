"""
Tests for honest tree growth: grid, splits, regularity, honesty and routing.
"""

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from src.core.config import settings
from src.core.exceptions import ConfigurationError
from src.core.models import CoinSchedule, ForestConfig, SplitCriterion, SplitKind
from src.forest import (
    Dataset,
    build_split_grid,
    criterion_split,
    cyclic_axis,
    cyclic_split,
    grow_tree,
    leaf_id,
    min_child_count,
    predict,
)
from src.forest.tree import LEAF


def make_cfg(n: int, s: int, **kw) -> ForestConfig:
    return ForestConfig.build(n=n, s=s, **kw)


def uniform_data(n: int, p: int = 2, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    x = rng.random((n, p))
    return Dataset(x, x.mean(axis=1) + 0.1 * rng.standard_normal(n))


def check_regular(tree, alpha: float) -> int:
    """Count regularity violations over every internal node."""
    violations = 0
    for node in range(tree.n_nodes):
        if tree.feature[node] == LEAF:
            continue
        need = min_child_count(alpha, int(tree.count[node]))
        for child in (tree.left[node], tree.right[node]):
            if tree.count[child] < need:
                violations += 1
    return violations


def test_grid_admissible_cuts():
    """Cuts must leave an alpha fraction of the interval on each side."""
    grid = build_split_grid(1, 10, 0.1)
    assert np.allclose(grid.admissible(0, 0.0, 1.0), np.arange(1, 10) / 10)
    assert np.allclose(grid.admissible(0, 0.5, 1.0), [0.6, 0.7, 0.8, 0.9])
    assert grid.admissible(0, 0.3, 0.4).size == 0


def test_grid_rejects_bad_parameters():
    with pytest.raises(ConfigurationError):
        build_split_grid(2, 1, 0.1)
    with pytest.raises(ConfigurationError):
        build_split_grid(2, 10, 0.5)


def test_min_child_count():
    assert min_child_count(0.01, 50) == 1
    assert min_child_count(0.1, 25) == 3
    assert min_child_count(0.25, 4) == 1


def test_cyclic_axis_schedule():
    assert [cyclic_axis(j, 2) for j in range(1, 6)] == [0, 1, 0, 1, 0]
    assert [cyclic_axis(j, 3) for j in range(1, 5)] == [0, 1, 2, 0]


def test_criterion_split_separates_clusters():
    """Two clusters on axis 0 are split at the lowest cut between them."""
    points = np.array([
        [0.1, 0.1], [0.15, 0.5], [0.2, 0.9],
        [0.8, 0.1], [0.85, 0.5], [0.9, 0.9],
    ])
    grid = build_split_grid(2, 10, 0.1)
    decision = criterion_split(points, np.zeros(2), np.ones(2), grid)

    assert decision.kind == SplitKind.CRITERION
    assert decision.axis == 0
    assert decision.cut == pytest.approx(0.3)


def test_balanced_criterion_splits_counts_evenly():
    points = np.column_stack([np.linspace(0.05, 0.95, 10), np.full(10, 0.5)])
    grid = build_split_grid(2, 20, 0.1)
    decision = criterion_split(points, np.zeros(2), np.ones(2), grid, SplitCriterion.BALANCED)

    left = int(np.sum(points[:, decision.axis] < decision.cut))
    assert left == 5


def test_criterion_split_returns_none_without_regular_cut():
    points = np.full((5, 2), 0.42)
    grid = build_split_grid(2, 10, 0.1)
    assert criterion_split(points, np.zeros(2), np.ones(2), grid) is None


def test_cyclic_split_prefers_midpoint_and_lower_tie():
    grid = build_split_grid(2, 10, 0.1)
    points = np.column_stack([np.linspace(0.01, 0.49, 20), np.linspace(0.01, 0.99, 20)])

    full = cyclic_split(points, 1, np.zeros(2), np.ones(2), grid)
    assert full.kind == SplitKind.RANDOM_CYCLIC
    assert full.axis == 1
    assert full.cut == pytest.approx(0.5)

    # Midpoint 0.25 of [0, 0.5) is equidistant from 0.2 and 0.3.
    half = cyclic_split(points, 0, np.zeros(2), np.array([0.5, 1.0]), grid)
    assert half.cut == pytest.approx(0.2)


def test_dataset_validation():
    with pytest.raises(ConfigurationError):
        Dataset(np.array([[0.5, 1.5]]), np.array([0.0]))
    with pytest.raises(ConfigurationError):
        Dataset(np.array([[0.5, 0.5]]), np.array([0.0, 1.0]))
    with pytest.raises(ConfigurationError):
        Dataset(np.array([[0.5, np.nan]]), np.array([0.0]))


def test_forest_config_validation():
    with pytest.raises(ConfigurationError):
        make_cfg(10, 20)
    with pytest.raises(ConfigurationError):
        make_cfg(10, 2, k=3)
    with pytest.raises(ConfigurationError):
        make_cfg(10, 5, alpha=0.5)


def test_forest_config_defaults_come_from_settings(monkeypatch):
    monkeypatch.setattr(settings, "default_trees", 17)
    monkeypatch.setattr(settings, "default_delta", 0.75)
    monkeypatch.setattr(settings, "default_grid", 11)
    cfg = make_cfg(40, 20)

    assert (cfg.trees, cfg.delta, cfg.grid_g) == (17, 0.75, 11)
    assert cfg.alpha == settings.default_alpha
    assert cfg.k == settings.default_k


def test_grow_tree_rejects_bad_subsample():
    data = uniform_data(20)
    cfg = make_cfg(20, 5)
    with pytest.raises(ConfigurationError):
        grow_tree(data, np.array([0, 1, 1, 2, 3]), cfg, seed=0)
    with pytest.raises(ConfigurationError):
        grow_tree(data, np.array([0, 1, 2, 3, 25]), cfg, seed=0)


def test_partition_covers_subsample():
    """Every subsample point sits in exactly one leaf, and routing finds it."""
    data = uniform_data(300, p=3, seed=1)
    subsample = np.arange(0, 300, 2)
    tree = grow_tree(data, subsample, make_cfg(300, 150, alpha=0.05, grid_g=51), seed=7)

    members = np.concatenate([tree.members[leaf] for leaf in tree.leaves()])
    assert np.array_equal(np.sort(members), subsample)

    for leaf in tree.leaves():
        for i in tree.members[leaf]:
            assert leaf_id(tree, data.x[i]) == leaf
            assert predict(tree, data.x[i]) == pytest.approx(data.y[tree.members[leaf]].mean())


def test_leaves_respect_terminal_size():
    data = uniform_data(400, seed=2)
    cfg = make_cfg(400, 400, k=3, alpha=0.05, grid_g=101)
    tree = grow_tree(data, np.arange(400), cfg, seed=3)

    for node in range(tree.n_nodes):
        if tree.feature[node] != LEAF:
            assert tree.count[node] > cfg.max_terminal


def test_small_subsample_is_single_leaf():
    data = uniform_data(10)
    tree = grow_tree(data, np.arange(5), make_cfg(10, 5, k=3), seed=0)
    assert tree.n_nodes == 1
    assert predict(tree, [0.1, 0.9]) == pytest.approx(data.y[:5].mean())


def test_constant_response_predicts_constant():
    rng = np.random.default_rng(4)
    data = Dataset(rng.random((200, 2)), np.full(200, 3.25))
    tree = grow_tree(data, np.arange(200), make_cfg(200, 200), seed=0)
    assert np.all(tree.predict_many(rng.random((50, 2))) == 3.25)


def test_full_coin_follows_cyclic_schedule():
    """With delta = 1 every random split uses axis (heads so far) mod p."""
    data = uniform_data(500, p=3, seed=5)
    tree = grow_tree(data, np.arange(500), make_cfg(500, 500, delta=1.0, alpha=0.05), seed=11)

    random_nodes = np.flatnonzero(tree.kind == 1)
    assert random_nodes.size > 0
    for node in random_nodes:
        assert tree.feature[node] == tree.heads[node] % 3
        assert tree.heads[tree.left[node]] == tree.heads[node] + 1


def test_zero_coin_uses_criterion_only():
    data = uniform_data(200, seed=6)
    tree = grow_tree(data, np.arange(200), make_cfg(200, 200, delta=0.0), seed=0)
    internal = tree.feature != LEAF
    assert np.all(tree.kind[internal] == 2)
    assert tree.coin_count == 0


def test_uniform_coin_schedule_grows_regular_tree():
    data = uniform_data(300, seed=8)
    cfg = make_cfg(300, 300, delta=0.4, alpha=0.1, coin_schedule=CoinSchedule.UNIFORM)
    tree = grow_tree(data, np.arange(300), cfg, seed=9)
    assert check_regular(tree, cfg.alpha) == 0
    assert np.any(tree.kind == 1)


def test_shared_depth_of_identical_points_is_leaf_depth():
    data = uniform_data(200, seed=10)
    tree = grow_tree(data, np.arange(200), make_cfg(200, 200), seed=1)
    x = np.array([0.3, 0.6])
    assert tree.shared_depth(x, x) == tree.depth[leaf_id(tree, x)]
    assert len(tree.path(x)) == tree.shared_depth(x, x) + 1


@hsettings(max_examples=40, deadline=None)
@given(
    alpha=st.floats(min_value=0.01, max_value=0.45),
    k=st.sampled_from([1, 2, 5]),
    delta=st.floats(min_value=0.0, max_value=1.0),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_regularity_and_honesty(alpha, k, delta, seed):
    """Children keep ceil(alpha m) points; responses never move a split."""
    rng = np.random.default_rng(seed)
    n, s = 120, 80
    data = Dataset(rng.random((n, 2)), rng.standard_normal(n))
    subsample = rng.choice(n, size=s, replace=False)
    cfg = make_cfg(n, s, alpha=alpha, k=k, delta=delta, grid_g=41)

    tree = grow_tree(data, subsample, cfg, seed=seed)
    assert check_regular(tree, alpha) == 0

    perturbed = data.with_responses(rng.standard_normal(n) * 100.0)
    twin = grow_tree(perturbed, subsample, cfg, seed=seed)
    assert twin.structure() == tree.structure()


@pytest.mark.slow
def test_regularity_and_honesty_over_500_trees():
    rng = np.random.default_rng(2024)
    violations = 0
    for i in range(500):
        alpha = float(rng.uniform(0.01, 0.49))
        k = int(rng.choice([1, 2, 5]))
        n = int(rng.integers(20, 400))
        s = int(rng.integers(k, n + 1))
        data = Dataset(rng.random((n, 2)), rng.standard_normal(n))
        subsample = rng.choice(n, size=s, replace=False)
        cfg = make_cfg(n, s, alpha=alpha, k=k, delta=float(rng.random()), grid_g=int(rng.integers(2, 102)))

        tree = grow_tree(data, subsample, cfg, seed=i)
        violations += check_regular(tree, alpha)
        twin = grow_tree(data.with_responses(rng.standard_normal(n)), subsample, cfg, seed=i)
        violations += int(twin.structure() != tree.structure())

    assert violations == 0


def test_criterion_split_ties_go_to_lowest_cut():
    """Two points and three cuts between them: every cut scores zero, the lowest wins."""
    points = np.array([[0.1], [0.9]])
    grid = build_split_grid(1, 4, 0.1)
    decision = criterion_split(points, np.zeros(1), np.ones(1), grid)

    assert decision.axis == 0
    assert decision.cut == pytest.approx(0.25)


def test_leaf_cells_partition_the_unit_cube():
    """Each query point lies in exactly one leaf cell, and that cell is the routed leaf."""
    data = uniform_data(400, p=2, seed=4)
    tree = grow_tree(data, np.arange(400), make_cfg(400, 400, alpha=0.05, grid_g=51), seed=13)
    queries = np.random.default_rng(5).random((10000, 2))

    leaves = tree.leaves()
    lower = tree.lower[leaves]
    upper = tree.upper[leaves]
    # Cells are left-closed; the face at 1 is closed.
    above = queries[:, None, :] >= lower[None, :, :]
    below = (queries[:, None, :] < upper[None, :, :]) | (upper[None, :, :] >= 1.0)
    inside = np.all(above & below, axis=2)

    assert np.all(inside.sum(axis=1) == 1)
    assert np.array_equal(leaves[np.argmax(inside, axis=1)], tree.apply(queries))
