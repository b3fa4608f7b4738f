"""Chunked, order-preserving parallel map over block stacks.

Chunk boundaries are fixed (``CHUNK`` blocks) and results are concatenated in
index order, so outputs do not depend on the worker count. ``RDOT_THREADS``
caps the number of workers (default: CPU count).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

CHUNK = 4096


def thread_count() -> int:
    raw = os.environ.get("RDOT_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def map_chunks(fn, total: int, chunk: int = CHUNK) -> list:
    """``[fn(slice) for each consecutive slice of range(total)]``, possibly in threads."""
    slices = [slice(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
    workers = min(thread_count(), len(slices))
    if workers <= 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))
