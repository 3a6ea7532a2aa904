"""
Split-stability measurements by coupling.
"""

from src.stability.coupling import (
    coupled_draws,
    coupled_split_tv,
    histogram_tv,
    split_distribution,
    stability_classify,
)
from src.stability.rules import (
    ArgmaxFirstRule,
    CriterionRule,
    IgnoreFirstRule,
    LipschitzMeanRule,
    UniformNodeSampler,
    build_rule,
    coordinate,
    knife_edge_mean_rule,
    lipschitz_mean_rule,
    separated_mean_rule,
)

__all__ = [
    "coupled_draws",
    "coupled_split_tv",
    "histogram_tv",
    "split_distribution",
    "stability_classify",
    "ArgmaxFirstRule",
    "CriterionRule",
    "IgnoreFirstRule",
    "LipschitzMeanRule",
    "UniformNodeSampler",
    "build_rule",
    "coordinate",
    "knife_edge_mean_rule",
    "lipschitz_mean_rule",
    "separated_mean_rule",
]
