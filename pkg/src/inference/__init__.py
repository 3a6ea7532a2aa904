"""
Forest aggregation, Hajek variance and multi-point intervals.
"""

from src.inference.ensemble import fit_forest, grow_ensemble_tree, grow_forest
from src.inference.hajek import hajek_variance
from src.inference.hoeffding import TreeKernel, exact_hoeffding, hoeffding_check
from src.inference.intervals import (
    confidence_interval,
    confidence_intervals,
    linear_heuristic,
    trace_ratio,
    trace_report,
)

__all__ = [
    "fit_forest",
    "grow_ensemble_tree",
    "grow_forest",
    "hajek_variance",
    "TreeKernel",
    "exact_hoeffding",
    "hoeffding_check",
    "confidence_interval",
    "confidence_intervals",
    "linear_heuristic",
    "trace_ratio",
    "trace_report",
]
