"""
Timing and memory helpers.

Tracks per-stage render timings (initial, temporal, mutate, spatial, shade) and
process memory for the per-frame log line.
"""
import statistics
import time
from dataclasses import asdict, dataclass
from datetime import datetime
from typing import Dict, List, Optional

import pandas as pd
import psutil


@dataclass
class BenchmarkResult:
    """Timing of one stage, or aggregated timings of repeated runs of it."""
    operation: str
    duration_ms: float
    iterations: int = 1
    min_ms: Optional[float] = None
    max_ms: Optional[float] = None
    mean_ms: Optional[float] = None
    median_ms: Optional[float] = None
    stdev_ms: Optional[float] = None
    timestamp: Optional[str] = None

    def __post_init__(self):
        if self.timestamp is None:
            self.timestamp = datetime.now().isoformat()


class Timer:
    """Context manager for measuring execution time."""

    def __init__(self, name: str = None):
        self.name = name or "Operation"
        self.start_time = None
        self.duration_ms = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, *args):
        self.duration_ms = (time.perf_counter() - self.start_time) * 1000

    def __str__(self) -> str:
        if self.duration_ms is None:
            return f"{self.name}: Not completed"
        return f"{self.name}: {self.duration_ms:.2f}ms"


class Benchmark:
    """Collects stage timings across frames."""

    def __init__(self):
        self.results: List[BenchmarkResult] = []

    def per_operation(self) -> List[BenchmarkResult]:
        """Aggregate recorded durations by operation name."""
        grouped: Dict[str, List[float]] = {}
        for r in self.results:
            grouped.setdefault(r.operation, []).append(r.duration_ms)
        out = []
        for op, durations in grouped.items():
            out.append(BenchmarkResult(
                operation=op,
                duration_ms=sum(durations),
                iterations=len(durations),
                min_ms=min(durations),
                max_ms=max(durations),
                mean_ms=statistics.mean(durations),
                median_ms=statistics.median(durations),
                stdev_ms=statistics.stdev(durations) if len(durations) > 1 else 0.0,
            ))
        return out

    def export_csv(self, filepath: str):
        """Write aggregated per-stage timings."""
        rows = [asdict(r) for r in self.per_operation()]
        pd.DataFrame(rows).drop(columns=["timestamp"], errors="ignore").to_csv(
            filepath, index=False, float_format="%.3f")


class MemoryMonitor:
    """Track resident memory of this process."""

    def __init__(self):
        self.samples: List[float] = []
        self._process = psutil.Process()

    def get_current_usage_mb(self) -> float:
        try:
            return self._process.memory_info().rss / 1024 / 1024
        except psutil.Error:
            return 0.0

    def sample(self) -> float:
        usage = self.get_current_usage_mb()
        self.samples.append(usage)
        return usage

