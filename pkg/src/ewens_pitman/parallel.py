"""Deterministic fan-out of trajectory ranges over a thread pool.

Kernels release the GIL and write into preallocated rows indexed by trajectory,
so output depends only on (seed, trajectory index), never on scheduling.
"""

import os
from concurrent.futures import ThreadPoolExecutor

WORKERS_ENV = "EWENS_PITMAN_WORKERS"


def default_workers():
    """Worker count from ``EWENS_PITMAN_WORKERS``, default all available CPUs."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if raw:
        value = int(raw)
        if value < 1:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer")
        return value
    return os.cpu_count() or 1


def chunk_ranges(total, workers, per_worker=4):
    chunks = max(1, min(total, workers * per_worker))
    bounds = [total * k // chunks for k in range(chunks + 1)]
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_ranges(fn, total, workers=None):
    """Call ``fn(lo, hi)`` over a partition of ``range(total)``."""
    workers = default_workers() if workers is None else int(workers)
    ranges = chunk_ranges(total, workers)
    if workers <= 1 or len(ranges) == 1:
        for lo, hi in ranges:
            fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(fn, lo, hi) for lo, hi in ranges]:
            fut.result()
