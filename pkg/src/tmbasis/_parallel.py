"""Deterministic fan-out over fixed work chunks.

Work is always split into the same chunks whatever the thread count, and
BLAS is pinned to one thread inside each chunk, so results are bitwise
independent of ``TMBASIS_THREADS``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable, TypeVar

from threadpoolctl import threadpool_limits

ENV_THREADS = "TMBASIS_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        raw = os.environ.get(ENV_THREADS, "1")
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    return max(1, int(threads))


@contextmanager
def single_threaded_blas():
    with threadpool_limits(limits=1, user_api="blas"):
        yield


def ordered_map(func: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """``[func(x) for x in items]`` evaluated on a thread pool, results in input order."""
    items = list(items)
    n = resolve_threads(threads)
    with single_threaded_blas():
        if n == 1 or len(items) <= 1:
            return [func(x) for x in items]
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(func, items))


def chunk_ranges(total: int, chunk: int) -> list[range]:
    return [range(s, min(s + chunk, total)) for s in range(0, total, chunk)]
