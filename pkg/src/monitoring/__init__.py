"""
Monitoring for Honest Forest Lab.
"""

from src.monitoring.metrics import MetricsCollector, metrics_collector

__all__ = [
    "MetricsCollector",
    "metrics_collector",
]
