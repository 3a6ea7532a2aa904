"""
Honest tree growth on a predetermined split grid.
"""

from src.forest.dataset import Dataset, DataSampler, UniformSampler
from src.forest.grid import SplitGrid, build_split_grid, min_child_count
from src.forest.splitting import SplitDecision, criterion_split, cyclic_axis, cyclic_split
from src.forest.tree import Tree, TreeNode, grow_tree, leaf_id, predict

__all__ = [
    "Dataset",
    "DataSampler",
    "UniformSampler",
    "SplitGrid",
    "build_split_grid",
    "min_child_count",
    "SplitDecision",
    "criterion_split",
    "cyclic_axis",
    "cyclic_split",
    "Tree",
    "TreeNode",
    "grow_tree",
    "leaf_id",
    "predict",
]
