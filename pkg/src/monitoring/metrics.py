"""
Metrics collection for experiment stages.
"""

import time
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Dict, Iterator, List

from loguru import logger

from src.core.models import ExecutionMetrics


@dataclass
class StageMetrics:
    """Aggregated metrics for one stage name."""
    stage: str
    runs: int = 0
    items: int = 0
    total_duration: float = 0.0
    errors: int = 0

    def add_execution(self, metrics: ExecutionMetrics) -> None:
        """Add execution metrics."""
        self.runs += 1
        self.items += metrics.items
        self.total_duration += metrics.duration_seconds

        if not metrics.success:
            self.errors += 1

    def get_items_per_second(self) -> float:
        """Get average throughput."""
        if self.total_duration == 0:
            return 0.0
        return self.items / self.total_duration


class MetricsCollector:
    """
    Collects wall times and item counts per experiment stage.
    """

    def __init__(self):
        self.stage_metrics: Dict[str, StageMetrics] = {}
        self.execution_history: List[ExecutionMetrics] = []
        self.start_time = datetime.now(timezone.utc)

    def record_execution(self, metrics: ExecutionMetrics) -> None:
        """
        Record execution metrics.

        Args:
            metrics: Execution metrics of one finished stage
        """
        self.execution_history.append(metrics)
        self.stage_metrics.setdefault(metrics.stage, StageMetrics(stage=metrics.stage)).add_execution(metrics)

        logger.debug(
            f"Recorded metrics for {metrics.stage}: "
            f"{metrics.duration_seconds:.2f}s, "
            f"{metrics.items} items"
        )

    @contextmanager
    def track(self, stage: str, items: int = 0) -> Iterator[None]:
        """Time the enclosed block as ``stage``; failures are recorded and re-raised."""
        start = time.perf_counter()
        try:
            yield
        except Exception as e:
            self.record_execution(ExecutionMetrics(
                stage=stage,
                duration_seconds=time.perf_counter() - start,
                items=items,
                success=False,
                error_message=str(e),
            ))
            raise
        self.record_execution(ExecutionMetrics(
            stage=stage,
            duration_seconds=time.perf_counter() - start,
            items=items,
        ))

    def wall_times(self) -> Dict[str, float]:
        """Total seconds per stage."""
        return {name: m.total_duration for name, m in self.stage_metrics.items()}

    def get_system_metrics(self) -> Dict:
        """Get overall run metrics."""

        if not self.execution_history:
            return {
                "status": "no_data",
                "message": "No stages recorded yet"
            }

        total = len(self.execution_history)
        successful = sum(1 for m in self.execution_history if m.success)
        uptime = (datetime.now(timezone.utc) - self.start_time).total_seconds()

        return {
            "total_stages": total,
            "successful_stages": successful,
            "success_rate": successful / total,
            "uptime_seconds": uptime,
            "stages": {
                name: {
                    "runs": m.runs,
                    "items": m.items,
                    "duration_seconds": m.total_duration,
                    "errors": m.errors,
                    "items_per_second": m.get_items_per_second(),
                }
                for name, m in self.stage_metrics.items()
            },
        }

    def reset(self) -> None:
        """Forget every recorded stage."""
        self.stage_metrics.clear()
        self.execution_history.clear()
        self.start_time = datetime.now(timezone.utc)


# Global metrics collector
metrics_collector = MetricsCollector()
