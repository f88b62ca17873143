"""Order-preserving parallel map over independent per-sample problems."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "PATHSPACE_THREADS"


def thread_count(requested: int | None = None) -> int:
    """Worker count: explicit request, else ``PATHSPACE_THREADS`` (0 = auto)."""
    if requested is None:
        raw = os.environ.get(ENV_THREADS, "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValueError("thread count must be non-negative")
    if requested == 0:
        return max(1, os.cpu_count() or 1)
    return requested


def pmap(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]``, possibly in worker threads.

    Results come back in input order, so the outcome never depends on
    completion order.
    """
    items = list(items)
    k = min(thread_count(threads), len(items))
    if k <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, items))
