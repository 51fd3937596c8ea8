"""Order-independent replica parallelism.

Replicas are split into fixed-size chunks that do not depend on the worker
count; each chunk returns an integer count vector and the vectors are summed.
Integer addition is associative, so totals are identical for any number of
workers and any scheduling.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

DEFAULT_CHUNK = 64


def map_chunks(fn: Callable[[int, int], object], replicas: int, workers: int = 1,
               chunk: int = DEFAULT_CHUNK, start: int = 0) -> list:
    """``[fn(lo, hi), ...]`` over chunks covering replicas
    ``start .. start+replicas-1``, in replica order.

    Threads are used, so real speed-ups come from compiled kernels that
    release the GIL.
    """
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    bounds = [(lo, min(lo + chunk, start + replicas))
              for lo in range(start, start + replicas, chunk)]
    if workers == 1 or len(bounds) == 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def map_replicas(fn: Callable[[int, int], np.ndarray], replicas: int, workers: int = 1,
                 chunk: int = DEFAULT_CHUNK, start: int = 0) -> np.ndarray:
    """Sum the integer count vectors ``fn(lo, hi)`` over all chunks."""
    parts = map_chunks(fn, replicas, workers, chunk, start)
    total = np.zeros_like(np.asarray(parts[0], dtype=np.int64))
    for part in parts:
        total += np.asarray(part, dtype=np.int64)
    return total
