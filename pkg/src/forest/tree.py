"""
Honest, (alpha, k)-regular trees with coin-randomized cyclic splits.
"""

from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

import numpy as np

from src.core.exceptions import ConfigurationError
from src.core.models import CoinSchedule, ForestConfig, SplitKind
from src.forest.dataset import Dataset
from src.forest.grid import SplitGrid, build_split_grid, min_child_count
from src.forest.splitting import SplitDecision, criterion_split, cyclic_axis, cyclic_split

LEAF = -1

_KIND_CODES = {SplitKind.RANDOM_CYCLIC: 1, SplitKind.CRITERION: 2}
_CODE_KINDS = {code: kind for kind, code in _KIND_CODES.items()}


@dataclass(frozen=True)
class SplitRecord:
    """Split applied at an internal node."""
    kind: SplitKind
    axis: int
    cut: float
    left: int
    right: int


@dataclass(frozen=True)
class TerminalStats:
    """Members and mean response of a leaf."""
    members: np.ndarray
    mean: float
    count: int


@dataclass(frozen=True)
class TreeNode:
    """Read-only view of one node; exactly one of split / terminal_stats is set."""
    node_id: int
    bounds: np.ndarray
    depth: int
    heads: int
    split: Optional[SplitRecord] = None
    terminal_stats: Optional[TerminalStats] = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None


class Tree:
    """
    A grown tree stored as flat node arrays.

    Node 0 is the root. Internal nodes route x to ``right`` when
    x[feature] >= threshold, otherwise to ``left``; leaves have feature -1.
    """

    def __init__(
        self,
        feature: np.ndarray,
        threshold: np.ndarray,
        left: np.ndarray,
        right: np.ndarray,
        parent: np.ndarray,
        kind: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        value: np.ndarray,
        count: np.ndarray,
        depth: np.ndarray,
        heads: np.ndarray,
        members: Tuple[np.ndarray, ...],
        subsample_ids: np.ndarray,
        rng_seed: Any,
    ):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.parent = parent
        self.kind = kind
        self.lower = lower
        self.upper = upper
        self.value = value
        self.count = count
        self.depth = depth
        self.heads = heads
        self.members = members
        self.subsample_ids = subsample_ids
        self.rng_seed = rng_seed
        for array in (feature, threshold, left, right, parent, kind, lower, upper, value, count, depth, heads):
            array.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def p(self) -> int:
        return int(self.lower.shape[1])

    @property
    def coin_count(self) -> int:
        """Largest number of realized coin-driven splits on any root-to-leaf path."""
        return int(self.heads.max())

    @property
    def root(self) -> TreeNode:
        return self.node(0)

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature == LEAF)

    def node(self, node_id: int) -> TreeNode:
        bounds = np.column_stack([self.lower[node_id], self.upper[node_id]])
        if self.feature[node_id] == LEAF:
            stats = TerminalStats(
                members=self.members[node_id],
                mean=float(self.value[node_id]),
                count=int(self.count[node_id]),
            )
            return TreeNode(node_id, bounds, int(self.depth[node_id]), int(self.heads[node_id]), terminal_stats=stats)

        split = SplitRecord(
            kind=_CODE_KINDS[int(self.kind[node_id])],
            axis=int(self.feature[node_id]),
            cut=float(self.threshold[node_id]),
            left=int(self.left[node_id]),
            right=int(self.right[node_id]),
        )
        return TreeNode(node_id, bounds, int(self.depth[node_id]), int(self.heads[node_id]), split=split)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index of every row of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        node = np.zeros(x.shape[0], dtype=np.intp)
        active = np.arange(x.shape[0])
        while active.size:
            current = node[active]
            axis = self.feature[current]
            internal = axis != LEAF
            active, current, axis = active[internal], current[internal], axis[internal]
            if not active.size:
                break
            go_right = x[active, axis] >= self.threshold[current]
            node[active] = np.where(go_right, self.right[current], self.left[current])
        return node

    def predict_many(self, x: np.ndarray) -> np.ndarray:
        """Leaf means at every row of ``x``."""
        return self.value[self.apply(x)]

    def path(self, x: np.ndarray) -> List[int]:
        """Node ids from the root to the leaf containing ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        nodes = [0]
        node = 0
        while self.feature[node] != LEAF:
            node = int(self.right[node] if x[self.feature[node]] >= self.threshold[node] else self.left[node])
            nodes.append(node)
        return nodes

    def shared_depth(self, x: np.ndarray, x_bar: np.ndarray) -> int:
        """Number of splits applied before ``x`` and ``x_bar`` are separated."""
        a, b = self.path(x), self.path(x_bar)
        depth = 0
        for u, v in zip(a[1:], b[1:]):
            if u != v:
                break
            depth += 1
        return depth

    def structure(self) -> Tuple[Tuple[int, float, int, int], ...]:
        """Split layout without leaf values, for structural comparisons."""
        return tuple(
            (int(f), float(t), int(l), int(r))
            for f, t, l, r in zip(self.feature, self.threshold, self.left, self.right)
        )


class _TreeBuilder:
    """Accumulates nodes during growth."""

    def __init__(self, p: int):
        self.p = p
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.parent: List[int] = []
        self.kind: List[int] = []
        self.lower: List[np.ndarray] = []
        self.upper: List[np.ndarray] = []
        self.value: List[float] = []
        self.count: List[int] = []
        self.depth: List[int] = []
        self.heads: List[int] = []
        self.members: List[np.ndarray] = []

    def add(self, lower: np.ndarray, upper: np.ndarray, parent: int, depth: int, heads: int, count: int) -> int:
        self.feature.append(LEAF)
        self.threshold.append(np.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.parent.append(parent)
        self.kind.append(0)
        self.lower.append(lower)
        self.upper.append(upper)
        self.value.append(np.nan)
        self.count.append(count)
        self.depth.append(depth)
        self.heads.append(heads)
        self.members.append(np.empty(0, dtype=np.intp))
        return len(self.feature) - 1

    def make_leaf(self, node: int, members: np.ndarray, mean: float) -> None:
        self.members[node] = members
        self.value[node] = mean

    def make_split(self, node: int, decision: SplitDecision, left: int, right: int) -> None:
        self.feature[node] = decision.axis
        self.threshold[node] = decision.cut
        self.kind[node] = _KIND_CODES[decision.kind]
        self.left[node] = left
        self.right[node] = right

    def build(self, subsample_ids: np.ndarray, rng_seed: Any) -> Tree:
        for array in self.members:
            array.setflags(write=False)
        return Tree(
            feature=np.array(self.feature, dtype=np.intp),
            threshold=np.array(self.threshold, dtype=float),
            left=np.array(self.left, dtype=np.intp),
            right=np.array(self.right, dtype=np.intp),
            parent=np.array(self.parent, dtype=np.intp),
            kind=np.array(self.kind, dtype=np.int8),
            lower=np.array(self.lower, dtype=float).reshape(-1, self.p),
            upper=np.array(self.upper, dtype=float).reshape(-1, self.p),
            value=np.array(self.value, dtype=float),
            count=np.array(self.count, dtype=np.intp),
            depth=np.array(self.depth, dtype=np.intp),
            heads=np.array(self.heads, dtype=np.intp),
            members=tuple(self.members),
            subsample_ids=subsample_ids,
            rng_seed=rng_seed,
        )


def _choose_split(
    points: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    heads: int,
    cfg: ForestConfig,
    grid: SplitGrid,
    rng: np.random.Generator,
) -> Tuple[Optional[SplitDecision], int]:
    """Flip the coin and pick this node's split; returns (split, heads after it)."""
    p = points.shape[1]
    if cfg.coin_schedule == CoinSchedule.CYCLIC:
        if rng.random() < cfg.delta:
            decision = cyclic_split(points, cyclic_axis(heads + 1, p), lower, upper, grid)
            if decision is not None:
                return decision, heads + 1
    elif rng.random() < min(1.0, p * cfg.delta):
        decision = cyclic_split(points, int(rng.integers(p)), lower, upper, grid)
        if decision is not None:
            return decision, heads + 1

    # Tails, or heads on an axis without an admissible regular cut.
    return criterion_split(points, lower, upper, grid, cfg.criterion), heads


def grow_tree(
    data: Dataset,
    subsample: np.ndarray,
    cfg: ForestConfig,
    seed: Any,
    grid: Optional[SplitGrid] = None,
) -> Tree:
    """
    Grow one tree on ``data`` restricted to ``subsample``.

    The partition depends on the subsample covariates and on ``seed`` only;
    responses enter through the leaf means.

    Args:
        data: Full sample
        subsample: Distinct row indices of the s points used
        cfg: Forest tuning symbols
        seed: Anything accepted by numpy.random.default_rng
        grid: Precomputed split grid (built from cfg when omitted)

    Returns:
        The grown tree
    """
    subsample = np.asarray(subsample, dtype=np.intp).reshape(-1)
    if subsample.size < cfg.k:
        raise ConfigurationError(f"subsample of {subsample.size} points is smaller than k={cfg.k}")
    if subsample.size and (subsample.min() < 0 or subsample.max() >= data.n):
        raise ConfigurationError("subsample indices out of range")
    if np.unique(subsample).size != subsample.size:
        raise ConfigurationError("subsample indices must be distinct")

    if grid is None:
        grid = build_split_grid(data.p, cfg.grid_g, cfg.alpha)
    elif grid.p != data.p:
        raise ConfigurationError(f"grid has {grid.p} axes, data has {data.p}")

    rng = np.random.default_rng(seed)
    x = data.x[subsample]
    y = data.y[subsample]
    p = data.p

    builder = _TreeBuilder(p)
    root = builder.add(np.zeros(p), np.ones(p), parent=LEAF, depth=0, heads=0, count=subsample.size)
    stack = [(root, np.arange(subsample.size))]

    while stack:
        node, members = stack.pop()
        lower, upper = builder.lower[node], builder.upper[node]
        m = members.size

        decision = None
        heads = builder.heads[node]
        if m > cfg.max_terminal:
            decision, heads = _choose_split(x[members], lower, upper, heads, cfg, grid, rng)

        if decision is None:
            builder.make_leaf(node, subsample[members], float(y[members].mean()))
            continue

        goes_left = x[members, decision.axis] < decision.cut
        left_members, right_members = members[goes_left], members[~goes_left]
        need = min_child_count(cfg.alpha, m)
        assert left_members.size >= need and right_members.size >= need, "regularity violated"

        left_upper = upper.copy()
        left_upper[decision.axis] = decision.cut
        right_lower = lower.copy()
        right_lower[decision.axis] = decision.cut

        depth = builder.depth[node] + 1
        left = builder.add(lower, left_upper, node, depth, heads, left_members.size)
        right = builder.add(right_lower, upper, node, depth, heads, right_members.size)
        builder.make_split(node, decision, left, right)

        stack.append((right, right_members))
        stack.append((left, left_members))

    return builder.build(subsample, seed)


def predict(tree: Tree, x: np.ndarray) -> float:
    """Mean response of the leaf containing ``x``."""
    return float(tree.predict_many(np.asarray(x, dtype=float).reshape(1, -1))[0])


def leaf_id(tree: Tree, x: np.ndarray) -> int:
    """Identifier of the leaf containing ``x``."""
    return int(tree.apply(np.asarray(x, dtype=float).reshape(1, -1))[0])
