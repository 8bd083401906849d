"""
Worker pool for lane-parallel stages.

Work is split into contiguous lane chunks; every chunk draws its random numbers from
counter-based streams keyed by lane index, so the joined result does not depend on the
number of threads. Each map call is a barrier: it returns only when all chunks are done.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, is_dataclass, replace
from typing import Any, Callable, List, Optional, Sequence

import numpy as np

from restirmcmc.core.reservoir import Reservoir

DEFAULT_CHUNK = 4096


def default_threads() -> int:
    return os.cpu_count() or 1


def concat_lanes(parts: Sequence[Any]) -> Any:
    """Concatenate lane-major results (arrays, dataclasses of arrays, tuples of those)."""
    first = parts[0]
    if isinstance(first, Reservoir):
        return Reservoir(concat_lanes([p.sample for p in parts]),
                         np.concatenate([p.w_sum for p in parts]),
                         np.concatenate([p.M for p in parts]),
                         np.concatenate([p.W for p in parts]))
    if is_dataclass(first):
        updates = {}
        for f in fields(first):
            if getattr(first, f.name) is None:
                continue
            updates[f.name] = concat_lanes([getattr(p, f.name) for p in parts])
        return replace(first, **updates)
    if isinstance(first, tuple):
        return tuple(concat_lanes([p[i] for p in parts]) for i in range(len(first)))
    return np.concatenate([np.asarray(p) for p in parts])


class WorkerPool:
    """Thread pool running a function over lane chunks."""

    def __init__(self, threads: Optional[int] = None, chunk_size: int = DEFAULT_CHUNK):
        self.threads = max(1, threads or default_threads())
        self.chunk_size = max(1, chunk_size)
        self._executor = ThreadPoolExecutor(max_workers=self.threads) if self.threads > 1 else None

    def chunks(self, lanes: np.ndarray) -> List[np.ndarray]:
        return [lanes[i:i + self.chunk_size] for i in range(0, len(lanes), self.chunk_size)]

    def map(self, fn: Callable[[np.ndarray], Any], lanes: np.ndarray) -> List[Any]:
        """Apply fn to each chunk of lane indices, results in chunk order."""
        parts = self.chunks(np.asarray(lanes))
        if self._executor is None or len(parts) == 1:
            return [fn(p) for p in parts]
        return list(self._executor.map(fn, parts))

    def map_concat(self, fn: Callable[[np.ndarray], Any], lanes: np.ndarray) -> Any:
        return concat_lanes(self.map(fn, lanes))

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc):
        self.close()
