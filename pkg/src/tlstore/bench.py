"""Benchmark drivers over the two-level store.

Two workloads, both emitting CSV:

- the mountain sweep: read throughput over a (data size, skip size)
  grid.  Data is ingested write-through once per data size, the blocks
  the tier kept are pinned so the tier/backing mix stays put, and each
  grid point replays a read-and-skip pass.  Small data sits fully in the
  tier (high ridge); large data is mostly backing-bound (low ridge).
- a dd-style sequential benchmark: write or read a row of equal files
  against the tier, the backing store, or the combined path, reporting
  per-file and mean MB/s.

Throughput is decimal MB/s computed as bytes / elapsed microseconds.
Under a virtual clock with simulated devices every number is exactly
reproducible; under a wall clock the same drivers measure real time.
"""

from __future__ import annotations

import statistics
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .errors import UsageError
from .model import Direction, format_mbps
from .store import ReadMode, Store, WriteMode


@dataclass(frozen=True)
class MountainSpec:
    """Grid for the mountain sweep; sizes in bytes, ascending."""

    data_sizes: tuple[int, ...]
    skip_sizes: tuple[int, ...]
    repetitions: int = 5

    def __post_init__(self):
        if not self.data_sizes or not self.skip_sizes:
            raise UsageError("data_sizes and skip_sizes must be non-empty")
        if any(d <= 0 for d in self.data_sizes):
            raise UsageError("data sizes must be positive")
        if any(s < 0 for s in self.skip_sizes):
            raise UsageError("skip sizes cannot be negative")
        if list(self.data_sizes) != sorted(self.data_sizes) or \
                list(self.skip_sizes) != sorted(self.skip_sizes):
            raise UsageError("sizes must be listed in ascending order")
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")


@dataclass(frozen=True)
class MountainPoint:
    """One grid cell.  ``samples`` holds every repetition in run order
    (the first is the cold pass); ``throughput_mbps`` is their median.
    ``residency`` is the measured tier fraction after ingest, kept for
    cross-checks against the analytic read model; it is not a CSV
    column."""

    data_size: int
    skip_size: int
    throughput_mbps: float
    samples: tuple[float, ...]
    residency: float


class BenchTarget(Enum):
    TIER = "tier"
    BACKING = "backing"
    TIERED = "tiered"


class CacheDiscipline(Enum):
    # drop tier contents between setup and measurement where that does
    # not destroy data; OS page caches on directory targets cannot be
    # bypassed portably, hence "best effort"
    BEST_EFFORT_BYPASS = "best_effort_bypass"
    NONE = "none"


@dataclass(frozen=True)
class SeqBenchSpec:
    target: BenchTarget
    file_size: int
    file_count: int = 16
    direction: Direction = Direction.READ
    cache_discipline: CacheDiscipline = CacheDiscipline.BEST_EFFORT_BYPASS
    parallel_streams: int = 1

    def __post_init__(self):
        if self.file_count < 1:
            raise UsageError("file_count must be >= 1")
        if self.file_size <= 0:
            raise UsageError("file_size must be positive")
        if self.parallel_streams < 1:
            raise UsageError("parallel_streams must be >= 1")


@dataclass(frozen=True)
class FileResult:
    index: int
    nbytes: int
    elapsed_us: float
    throughput_mbps: float


@dataclass(frozen=True)
class SeqBenchResult:
    files: tuple[FileResult, ...]
    mean_mbps: float


_WRITE_MODE = {
    BenchTarget.TIER: WriteMode.MEMORY_ONLY,
    BenchTarget.BACKING: WriteMode.BYPASS,
    BenchTarget.TIERED: WriteMode.WRITE_THROUGH,
}
_READ_MODE = {
    BenchTarget.TIER: ReadMode.MEMORY_ONLY,
    BenchTarget.BACKING: ReadMode.BYPASS_NO_CACHE,
    BenchTarget.TIERED: ReadMode.TIERED_CACHING,
}


def _require_clock(store: Store):
    if store.clock is None:
        raise UsageError("benchmarks need a store built with a clock")
    return store.clock


def _elapsed_guard(elapsed: float) -> float:
    if elapsed <= 0:
        raise UsageError(
            "no transfer time was charged; benchmark stores need "
            "simulated devices or a wall clock")
    return elapsed


def _ingest(store: Store, path: str, nbytes: int, mode: WriteMode) -> None:
    handle = store.create(path, mode)
    chunk = b"\0" * store.config.app_buffer
    remaining = nbytes
    while remaining > 0:
        n = min(len(chunk), remaining)
        handle.append(chunk if n == len(chunk) else chunk[:n])
        remaining -= n
    handle.seal()


def _read_pass(store: Store, path: str, data_size: int, skip: int,
               read_mode: ReadMode) -> float:
    """One read-and-skip sweep; returns MB/s over the bytes actually read."""
    clock = _require_clock(store)
    app = store.config.app_buffer
    started = clock.now_us()
    cursor = 0
    bytes_read = 0
    while cursor < data_size:
        n = min(app, data_size - cursor)
        store.read(path, cursor, n, read_mode)
        bytes_read += n
        cursor += n + skip
    return bytes_read / _elapsed_guard(clock.now_us() - started)


def run_mountain(spec: MountainSpec,
                 store_factory: Callable[[], Store]) -> list[MountainPoint]:
    """Sweep the (data size, skip size) grid.

    A fresh store is built per data size, filled write-through, and the
    surviving tier blocks are pinned: the read passes then see a frozen
    residency mix, with misses served straight from backing (the tier
    has no unpinned room to cache into).  Points come out in
    (data_size, skip_size) order.
    """
    probe = store_factory()
    if probe.config.tier_capacity >= max(spec.data_sizes):
        raise UsageError(
            "tier capacity must be smaller than the largest data size "
            "so both ridges appear")
    points = []
    for data_size in spec.data_sizes:
        store = store_factory()
        _ingest(store, "mountain-data", data_size, WriteMode.WRITE_THROUGH)
        store.pin("mountain-data")
        residency = store.residency_ratio("mountain-data")
        for skip in spec.skip_sizes:
            samples = tuple(
                _read_pass(store, "mountain-data", data_size, skip,
                           ReadMode.TIERED_CACHING)
                for _ in range(spec.repetitions))
            points.append(MountainPoint(
                data_size, skip, statistics.median(samples), samples,
                residency))
    return points


def run_seqbench(spec: SeqBenchSpec, store: Store) -> SeqBenchResult:
    """Write (or write then read) ``file_count`` equal files sequentially.

    With ``parallel_streams > 1`` the files are split across that many
    threads sharing the store and its clock, so per-file times include
    contention for the one set of devices; results are merged in file
    order once every stream finishes.
    """
    clock = _require_clock(store)
    write_mode = _WRITE_MODE[spec.target]
    read_mode = _READ_MODE[spec.target]
    paths = [f"seq-{i:04d}" for i in range(spec.file_count)]

    if spec.direction is Direction.WRITE:
        def work(index: int) -> FileResult:
            started = clock.now_us()
            _ingest(store, paths[index], spec.file_size, write_mode)
            elapsed = _elapsed_guard(clock.now_us() - started)
            return FileResult(index, spec.file_size, elapsed,
                              spec.file_size / elapsed)
    else:
        for path in paths:
            _ingest(store, path, spec.file_size, write_mode)
        if (spec.cache_discipline is CacheDiscipline.BEST_EFFORT_BYPASS
                and spec.target is not BenchTarget.TIER):
            # drop warm tier copies so reads hit the level under test;
            # never for the tier target, whose only copies live there
            store.evict(store.config.tier_capacity)

        def work(index: int) -> FileResult:
            app = store.config.app_buffer
            started = clock.now_us()
            offset = 0
            while offset < spec.file_size:
                n = min(app, spec.file_size - offset)
                store.read(paths[index], offset, n, read_mode)
                offset += n
            elapsed = _elapsed_guard(clock.now_us() - started)
            return FileResult(index, spec.file_size, elapsed,
                              spec.file_size / elapsed)

    results: list[FileResult] = [None] * spec.file_count  # type: ignore
    if spec.parallel_streams == 1:
        for i in range(spec.file_count):
            results[i] = work(i)
    else:
        def stream(indices):
            for i in indices:
                results[i] = work(i)
        threads = [
            threading.Thread(
                target=stream,
                args=(range(k, spec.file_count, spec.parallel_streams),))
            for k in range(spec.parallel_streams)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    mean = statistics.fmean(r.throughput_mbps for r in results)
    return SeqBenchResult(tuple(results), mean)


def measure_level_rates(store_factory: Callable[[], Store],
                        probe_bytes: int) -> tuple[float, float]:
    """Measured sequential read MB/s of (tier, backing) in isolation.

    These are the empirical rates the combined read path is predicted
    from: the tier probe reads a memory-resident file, the backing probe
    reads a bypass-written file through the normal buffered path.
    """
    tier_store = store_factory()
    tier_bytes = min(probe_bytes, tier_store.config.tier_capacity)
    if tier_bytes <= 0:
        raise UsageError("tier rate probe needs a nonzero tier capacity")
    _ingest(tier_store, "probe", tier_bytes, WriteMode.MEMORY_ONLY)
    tier_rate = _read_pass(tier_store, "probe", tier_bytes, 0,
                           ReadMode.MEMORY_ONLY)
    backing_store = store_factory()
    _ingest(backing_store, "probe", probe_bytes, WriteMode.BYPASS)
    backing_rate = _read_pass(backing_store, "probe", probe_bytes, 0,
                              ReadMode.BYPASS_NO_CACHE)
    return tier_rate, backing_rate


MOUNTAIN_CSV_HEADER = "data_size,skip_size,throughput_mbps,samples"
SEQBENCH_CSV_HEADER = "file_index,bytes,elapsed_us,throughput_mbps"


def mountain_csv_lines(points: Sequence[MountainPoint]) -> list[str]:
    lines = [MOUNTAIN_CSV_HEADER]
    for p in points:
        samples = ";".join(format_mbps(s) for s in p.samples)
        lines.append(f"{p.data_size},{p.skip_size},"
                     f"{format_mbps(p.throughput_mbps)},{samples}")
    return lines


def seqbench_csv_lines(result: SeqBenchResult) -> list[str]:
    lines = [SEQBENCH_CSV_HEADER]
    for r in result.files:
        lines.append(f"{r.index},{r.nbytes},{format_mbps(r.elapsed_us)},"
                     f"{format_mbps(r.throughput_mbps)}")
    total_bytes = sum(r.nbytes for r in result.files)
    total_us = sum(r.elapsed_us for r in result.files)
    lines.append(f"mean,{total_bytes},{format_mbps(total_us)},"
                 f"{format_mbps(result.mean_mbps)}")
    return lines


def emit_csv(lines: Sequence[str], destination) -> None:
    """Write CSV lines to a path or a writable text stream."""
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)
