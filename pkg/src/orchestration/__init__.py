"""
Orchestration layer for Honest Forest Lab.
"""

from src.orchestration.task_dispatcher import TaskDispatcher, task_dispatcher

__all__ = [
    "TaskDispatcher",
    "task_dispatcher",
]
