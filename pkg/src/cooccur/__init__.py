"""
Co-occurrence of query points in terminal nodes.
"""

from src.cooccur.cooccurrence import (
    clopper_pearson_upper,
    correlation_ratio,
    decay_fit,
    estimate_m,
    inclusion_probabilities,
    m_kernel,
    predicted_decay_exponent,
    separation_profile,
)

__all__ = [
    "clopper_pearson_upper",
    "correlation_ratio",
    "decay_fit",
    "estimate_m",
    "inclusion_probabilities",
    "m_kernel",
    "predicted_decay_exponent",
    "separation_profile",
]
