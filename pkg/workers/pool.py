from __future__ import annotations

"""Bounded worker pool over independent simulation jobs."""

import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from loguru import logger

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    """Run independent jobs on at most ``max_workers`` threads.

    Results come back in submission order, so reductions over them are
    identical for any worker count. ``max_workers=1`` runs inline.
    """

    def __init__(self, max_workers: Optional[int] = None) -> None:
        if max_workers is None:
            from core.config import get_settings

            max_workers = get_settings().workers
        self.max_workers = max(1, int(max_workers))
        self._lock = threading.Lock()
        self.completed = 0

    def _track(self, fn: Callable[[T], R]) -> Callable[[T], R]:
        def run(item: T) -> R:
            out = fn(item)
            with self._lock:
                self.completed += 1
            return out

        return run

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        jobs = list(items)
        if self.max_workers == 1 or len(jobs) <= 1:
            return [self._track(fn)(job) for job in jobs]
        logger.debug("WorkerPool running {} jobs on {} workers", len(jobs), self.max_workers)
        with ThreadPoolExecutor(max_workers=self.max_workers) as ex:
            return list(ex.map(self._track(fn), jobs))


__all__ = ["WorkerPool"]
