"""Deterministic parallel map over independent work items."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def worker_count(threads: int | None = None) -> int:
    """Requested thread count; NV_THREADS overrides the CPU default."""
    if threads is not None and threads > 0:
        return threads
    env = os.environ.get("NV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> list[R]:
    """
    Map fn over items, preserving input order in the output.

    Uses threads: the heavy kernels underneath (FFT, LAPACK) release the
    GIL.  With one worker this degenerates to a plain loop.
    """
    n = worker_count(threads)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
