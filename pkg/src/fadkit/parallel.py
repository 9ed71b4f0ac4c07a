"""Worker-pool helpers with deterministic result ordering.

Parallelism never changes numerical results: tasks are pure, results are
gathered in input order, and reductions happen on the ordered list.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

from .errors import FadkitError

THREADS_ENV = "FADKIT_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    """Worker cap: FADKIT_THREADS if set, else the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise FadkitError(f"invalid {THREADS_ENV}={raw!r}: expected a positive integer")
    if n < 1:
        raise FadkitError(f"invalid {THREADS_ENV}={n}: must be >= 1")
    return n


def ordered_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T]) -> list[R]:
    """Map `fn` over `items`, preserving order regardless of worker count."""
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
