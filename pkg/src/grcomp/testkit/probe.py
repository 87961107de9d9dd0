"""Instrumented runs: boundary snapshots, space probes and timed benchmarks."""
from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from ..decompressor import Decompressor
from ..parser import Compressor, CompressStats, Probe
from ..strategies import StrategyConfig


class BoundarySnapshot(NamedTuple):
    segment: int
    rules_digest: int
    counters_digest: int
    created: int
    live: int
    length: int  # bytes consumed (compressor) or recovered (decompressor)
    delta: int


def _chunks(data: bytes | Iterable[bytes], size: int = 1 << 20) -> Iterable[bytes]:
    if isinstance(data, (bytes, bytearray, memoryview)):
        for i in range(0, len(data), size):
            yield bytes(data[i : i + size])
    else:
        yield from data


@dataclass
class RunRecord:
    container: bytes
    stats: CompressStats
    snapshots: list[BoundarySnapshot] = field(default_factory=list)
    probe: Probe | None = None


def compress_run(
    data: bytes | Iterable[bytes],
    config: StrategyConfig,
    *,
    snapshots: bool = False,
    probe_interval: int = 0,
    alpha: float = 1.0,
) -> RunRecord:
    rows: list | None = [] if snapshots else None
    probe = Probe(probe_interval) if probe_interval else None
    buf = io.BytesIO()
    comp = Compressor(buf, config, alpha=alpha, snapshots=rows, probe=probe)
    for chunk in _chunks(data):
        comp.feed(chunk)
    stats = comp.finish()
    return RunRecord(
        buf.getvalue(), stats, [BoundarySnapshot(*r) for r in rows or ()], probe
    )


def decompress_run(container: bytes, *, alpha: float = 1.0) -> tuple[bytes, list[BoundarySnapshot]]:
    rows: list = []
    out = io.BytesIO()
    Decompressor(io.BytesIO(container), out, alpha=alpha, snapshots=rows).run()
    return out.getvalue(), [BoundarySnapshot(*r) for r in rows]


@dataclass
class SpaceSeries:
    series: list[tuple[int, int]]  # (bytes consumed, live rules) at every sample
    boundary_live: list[int]  # live rules right after each boundary prune
    peak_live: int  # over the whole run, including mid-segment growth
    stats: CompressStats

    @property
    def max_sampled(self) -> int:
        return max((v for _, v in self.series), default=0)


def space_probe(
    data: bytes | Iterable[bytes], config: StrategyConfig, interval: int = 1 << 20
) -> SpaceSeries:
    """Compress ``data`` sampling the live rule count every ``interval`` bytes."""
    run = compress_run(data, config, snapshots=True, probe_interval=interval)
    return SpaceSeries(
        run.probe.series,
        [s.live for s in run.snapshots],
        run.stats.rules_live_peak,
        run.stats,
    )


def timed_compress(data: bytes | Iterable[bytes], config: StrategyConfig) -> tuple[float, CompressStats]:
    """Wall time of a compression to a null sink (output is counted, not kept)."""
    sink = _NullSink()
    started = time.perf_counter()
    comp = Compressor(sink, config)
    for chunk in _chunks(data):
        comp.feed(chunk)
    stats = comp.finish()
    return time.perf_counter() - started, stats


class _NullSink(io.RawIOBase):
    def writable(self) -> bool:
        return True

    def write(self, b) -> int:
        return len(b)
