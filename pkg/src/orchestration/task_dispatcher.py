"""
Task dispatcher running seeded work items in parallel.
"""

import time
from typing import Any, Callable, List, Optional

import numpy as np
from joblib import Parallel, delayed
from loguru import logger

from src.core.config import settings


class TaskDispatcher:
    """
    Splits ``n_items`` work items into fixed-size chunks and runs them.

    Features:
    - Chunk boundaries depend only on the chunk size, never on worker count
    - Results come back in item order, so reductions are order-independent
    - Serial fast path when a single worker is configured
    """

    def __init__(
        self,
        n_jobs: Optional[int] = None,
        backend: Optional[str] = None,
        chunk_size: Optional[int] = None
    ):
        self._n_jobs = n_jobs
        self._backend = backend
        self._chunk_size = chunk_size

    @property
    def n_jobs(self) -> int:
        return self._n_jobs if self._n_jobs is not None else settings.n_jobs

    @property
    def backend(self) -> str:
        return self._backend or settings.parallel_backend

    @property
    def chunk_size(self) -> int:
        return self._chunk_size or settings.chunk_size

    def chunks(self, n_items: int) -> List[range]:
        """Item ranges handed to workers."""
        size = self.chunk_size
        return [range(start, min(start + size, n_items)) for start in range(0, n_items, size)]

    def run_chunks(
        self,
        fn: Callable[..., Any],
        n_items: int,
        **kwargs
    ) -> List[Any]:
        """
        Call ``fn(items, **kwargs)`` on every chunk.

        Args:
            fn: Module-level function taking a range of item indices
            n_items: Number of work items
            **kwargs: Shared read-only inputs

        Returns:
            Chunk results in item order
        """
        chunks = self.chunks(n_items)
        start = time.perf_counter()

        if self.n_jobs == 1 or len(chunks) <= 1:
            results = [fn(items, **kwargs) for items in chunks]
        else:
            results = Parallel(n_jobs=self.n_jobs, backend=self.backend)(
                delayed(fn)(items, **kwargs) for items in chunks
            )

        logger.debug(
            f"{getattr(fn, '__name__', 'task')}: {n_items} items in {len(chunks)} chunks, "
            f"{time.perf_counter() - start:.2f}s on {self.n_jobs} worker(s)"
        )
        return list(results)

    def map_array(
        self,
        fn: Callable[..., np.ndarray],
        n_items: int,
        **kwargs
    ) -> np.ndarray:
        """Like ``run_chunks`` for functions returning one row per item; rows are stacked."""
        if n_items == 0:
            return np.empty((0,))
        return np.concatenate(self.run_chunks(fn, n_items, **kwargs), axis=0)


# Global dispatcher instance
task_dispatcher = TaskDispatcher()
