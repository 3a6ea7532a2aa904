"""
Simulation study of the correlation between forest estimates.
"""

from src.simulation.coverage import coverage_table
from src.simulation.design import MixtureDesignSampler, draw_mixture, sample_design, truth
from src.simulation.sweep import (
    bucket_curve,
    cell_centers,
    correlation_sweep,
    heuristic_compare,
    log_linearity,
    to_log_scale,
)

__all__ = [
    "coverage_table",
    "MixtureDesignSampler",
    "draw_mixture",
    "sample_design",
    "truth",
    "bucket_curve",
    "cell_centers",
    "correlation_sweep",
    "heuristic_compare",
    "log_linearity",
    "to_log_scale",
]
