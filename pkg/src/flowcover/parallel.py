"""Deterministic data-parallel execution over row chunks.

Work is split into fixed chunks of output rows ahead of time. Each chunk
writes a disjoint slice of a preallocated output, and every per-row
reduction happens inside numpy along a contiguous last axis. The summation
tree for one output row then depends only on the row length, never on the
chunk layout or the worker count, which keeps results bit-identical from
one worker to many.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

ENV_WORKERS = "FLOWCOVER_WORKERS"


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: explicit argument, else FLOWCOVER_WORKERS, else cpu count."""
    if requested is not None:
        if requested < 1:
            raise ValueError(f"worker count must be >= 1, got {requested}")
        return int(requested)
    env = os.environ.get(ENV_WORKERS)
    if env is not None:
        try:
            value = int(env)
        except ValueError as exc:
            raise ValueError(f"{ENV_WORKERS} must be an integer, got {env!r}") from exc
        if value < 1:
            raise ValueError(f"{ENV_WORKERS} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def chunk_ranges(total: int, chunk: int) -> list[tuple[int, int]]:
    """Half-open (start, stop) ranges covering range(total) in order."""
    if total < 0:
        raise ValueError(f"total must be nonnegative, got {total}")
    if chunk < 1:
        raise ValueError(f"chunk must be >= 1, got {chunk}")
    return [(a, min(a + chunk, total)) for a in range(0, total, chunk)]


def run_chunked(
    task: Callable[[int, int], None],
    total: int,
    chunk: int,
    workers: int = 1,
) -> None:
    """Run task(start, stop) over every chunk, possibly on a thread pool.

    The task must confine its writes to the output rows [start, stop); under
    that contract the result is independent of scheduling order.
    """
    ranges = chunk_ranges(total, chunk)
    if workers <= 1 or len(ranges) <= 1:
        for a, b in ranges:
            task(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # Drain the iterator so worker exceptions surface here.
        for _ in pool.map(lambda r: task(r[0], r[1]), ranges):
            pass
