"""Online construction of a post-order SLP and its direct encoding.

Symbols enter per-level queues of capacity five.  Each queue starts with two
sentinel context slots; when it holds four symbols and position 2 carries no
landmark, the last two become a 2-tree, and at five symbols the last three
become a 2-2-tree.  The result moves one level up.

Encoding works on the *frontier*: the sequence of not-yet-parented parse
tree nodes, left to right.  Every rule lookup combines the two rightmost
frontier nodes.  A node produced by a dictionary hit may still be pruned
(its parent may be a hit too), so its leaf event is held back.  When a lookup
creates a rule, every held-back node to its left is certain to end up under
a freshly created ancestor, so all of them are written as leaves, followed
by the internal-node bit.  Segments close by folding the frontier from the
right, which keeps that guarantee.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import BinaryIO, Callable

import numpy as np
from numba import njit

from . import dictionary as dct
from .codec import (
    LENGTH_OFFSET,
    W_POS,
    W_SIZE,
    W_TOTAL,
    ContainerHeader,
    pad_to_byte,
    write_bits,
    write_leaf,
)
from .dictionary import D_CNT, D_LEFT, D_META, M_CREATED, M_LIVE, PhraseDictionary
from .strategies import (
    BLOCK,
    FREQ,
    LOSSY,
    S_CONSUMED,
    S_DELTA,
    S_ELL,
    S_K,
    S_MODE,
    StrategyConfig,
    StrategyState,
    counter_init,
    prune,
)

SENTINEL = -1
QCAP = 5
MAX_LEVELS = 64
FRONTIER_CAP = 3 * MAX_LEVELS + 8

# parser meta
P_SP = 0  # frontier size
P_EMITTED = 1  # frontier prefix already written to the stream
P_LEVELS = 2  # highest queue level touched in this segment, plus one
P_PENDING = 3  # symbols consumed in the current segment
P_SIZE = 4

# compressor statistics
C_SEGMENTS = 0
C_LEAVES = 1
C_INTERNALS = 2
C_LEVELS_MAX = 3
C_BOUNDARY_LIVE_MAX = 4
C_NSNAP = 5
C_SIZE = 6

# snapshot row
SNAP_FIELDS = ("segment", "rules_digest", "counters_digest", "created", "live", "length", "delta")
SNAP_WIDTH = len(SNAP_FIELDS)

# kernel status codes
DONE = 0
NEED_ROOM = 1
OUT_FULL = 2
SNAP_FULL = 3
ERR_EMITTED_HIT = -1
ERR_LEVELS = -2
ERR_CLOSURE = -3

RULE_MARGIN = 2 * MAX_LEVELS + FRONTIER_CAP + 16
OUT_MARGIN = 4 * FRONTIER_CAP * 9 + 64


@njit(cache=True, inline="always")
def edge_label(x, y):
    if x == y or x < 0 or y < 0:
        return -1
    d = x ^ y
    j = 0
    while (d & 1) == 0:
        d >>= 1
        j += 1
    return 2 * j + ((y >> j) & 1)


@njit(cache=True, inline="always")
def _landmark(w1, w2, w3, w4):
    mid = edge_label(w2, w3)
    return mid > edge_label(w1, w2) and mid >= edge_label(w3, w4)


def landmark(w1: int, w2: int, w3: int, w4: int) -> bool:
    """Whether position 2 of the window ``w1 w2 w3 w4`` carries a landmark.

    Edge ``(x, y)`` is labelled ``2j + bit_j(y)`` with ``j`` the lowest bit
    where ``x`` and ``y`` differ, or -1 when they are equal.  The middle
    edge is a landmark when it beats its left neighbour strictly and its
    right neighbour or ties it.
    """
    return bool(_landmark(w1, w2, w3, w4))


def new_parser_state():
    Q = np.full(MAX_LEVELS * QCAP, SENTINEL, np.int64)
    qlen = np.full(MAX_LEVELS, 2, np.int64)
    F = np.zeros(FRONTIER_CAP, np.int64)
    pm = np.zeros(P_SIZE, np.int64)
    pm[P_LEVELS] = 1
    return (Q, qlen, F, pm)


@njit(cache=True, inline="always")
def _find(meta, rx, ry, nxt, heads, x, y):
    b = np.int64(dct.pair_hash(x, y) & np.uint64(meta[dct.M_MASK]))
    s = heads[b]
    probes = 1
    while s >= 0:
        if rx[s] == x and ry[s] == y:
            break
        s = nxt[s]
        probes += 1
    meta[dct.M_LOOKUPS] += 1
    meta[dct.M_PROBES] += probes
    return s


@njit(cache=True, inline="always")
def _insert(meta, left, rx, ry, cnt, nxtp, nxtc, pheads, cheads, x, y, count):
    s = meta[dct.M_FREE]
    if s >= 0:
        meta[dct.M_FREE] = nxtp[s]
    else:
        s = meta[dct.M_HIGH]
        meta[dct.M_HIGH] = s + 1
    z = dct.SIGMA + meta[M_CREATED]
    meta[M_CREATED] += 1
    meta[dct.M_TOTAL] += 1
    live = meta[M_LIVE] + 1
    meta[M_LIVE] = live
    if live > meta[dct.M_PEAK]:
        meta[dct.M_PEAK] = live
    left[s] = z
    rx[s] = x
    ry[s] = y
    cnt[s] = count
    mask = np.uint64(meta[dct.M_MASK])
    b = np.int64(dct.pair_hash(x, y) & mask)
    nxtp[s] = pheads[b]
    pheads[b] = s
    b = np.int64(dct.code_hash(z) & mask)
    nxtc[s] = cheads[b]
    cheads[b] = s
    return z


@njit(cache=True, inline="always")
def _update_arrays(F, pm, meta, left, rx, ry, cnt, nxtp, nxtc, pheads, cheads, S, out, wm, C):
    """Combine the two rightmost frontier nodes; returns the code or < 0."""
    sp = pm[P_SP]
    x = F[sp - 2]
    y = F[sp - 1]
    s = _find(meta, rx, ry, nxtp, pheads, x, y)
    if s >= 0:
        if pm[P_EMITTED] > sp - 2:
            return ERR_EMITTED_HIT
        c = cnt[s]
        cnt[s] = dct.COUNTER_MAX if c == dct.COUNTER_MAX else c + 1
        z = left[s]
    else:
        created = meta[M_CREATED]
        for i in range(pm[P_EMITTED], sp):
            write_leaf(out, wm, F[i], created)
        C[C_LEAVES] += sp - pm[P_EMITTED]
        z = _insert(meta, left, rx, ry, cnt, nxtp, nxtc, pheads, cheads, x, y, counter_init(S))
        write_bits(out, wm, 1, 1)
        C[C_INTERNALS] += 1
        pm[P_EMITTED] = sp - 1
    F[sp - 2] = z
    pm[P_SP] = sp - 1
    return z


@njit(cache=True)
def _update(P, D, S, out, wm, C):
    return _update_arrays(
        P[2], P[3], D[D_META], D[D_LEFT], D[dct.D_X], D[dct.D_Y], D[D_CNT], D[dct.D_NEXT_PAIR],
        D[dct.D_NEXT_CODE], D[dct.D_PAIR_HEADS], D[dct.D_CODE_HEADS], S, out, wm, C,
    )


@njit(cache=True)
def _snapshot(D, S, C, snaps, length):
    i = C[C_NSNAP]
    rules, counts = dct.digests(D)
    snaps[i, 0] = C[C_SEGMENTS] - 1
    snaps[i, 1] = rules
    snaps[i, 2] = counts
    snaps[i, 3] = D[D_META][M_CREATED]
    snaps[i, 4] = D[D_META][M_LIVE]
    snaps[i, 5] = length
    snaps[i, 6] = S[S_DELTA]
    C[C_NSNAP] = i + 1


@njit(cache=True)
def _close_segment(P, D, S, out, wm, C, snaps):
    """Fold the frontier into one root, end the segment, prune."""
    Q = P[0]
    qlen = P[1]
    F = P[2]
    pm = P[3]
    while pm[P_SP] > 1:
        z = _update(P, D, S, out, wm, C)
        if z < 0:
            return z
    if pm[P_EMITTED] == 0:
        write_leaf(out, wm, F[0], D[D_META][M_CREATED])
        C[C_LEAVES] += 1
    write_bits(out, wm, 1, 1)
    C[C_SEGMENTS] += 1
    _, status = prune(S, D)
    if status < 0:
        return ERR_CLOSURE
    live = D[D_META][M_LIVE]
    if live > C[C_BOUNDARY_LIVE_MAX]:
        C[C_BOUNDARY_LIVE_MAX] = live
    if snaps.shape[0] > 0:
        _snapshot(D, S, C, snaps, S[S_CONSUMED])
    for level in range(pm[P_LEVELS]):
        Q[level * QCAP] = SENTINEL
        Q[level * QCAP + 1] = SENTINEL
        qlen[level] = 2
    pm[P_SP] = 0
    pm[P_EMITTED] = 0
    pm[P_LEVELS] = 1
    pm[P_PENDING] = 0
    return 0


# Runs without reference counting: the loop never allocates, and refcount
# traffic on the array tuples costs far more than the parsing itself.
# Segment closing (which does allocate) stays in a separately compiled call.
@njit(cache=True, _nrt=False)
def _compress_chunk(data, start, P, D, S, out, wm, C, snaps):
    """Feed ``data[start:]``; returns (status, next index)."""
    Q = P[0]
    qlen = P[1]
    F = P[2]
    pm = P[3]
    meta = D[D_META]
    left = D[D_LEFT]
    rx = D[dct.D_X]
    ry = D[dct.D_Y]
    cnt = D[D_CNT]
    nxtp = D[dct.D_NEXT_PAIR]
    nxtc = D[dct.D_NEXT_CODE]
    pheads = D[dct.D_PAIR_HEADS]
    cheads = D[dct.D_CODE_HEADS]
    limit = min(left.shape[0], meta[dct.M_LIMIT]) - RULE_MARGIN
    olimit = out.shape[0] - OUT_MARGIN
    nsnap = snaps.shape[0]
    mode = S[S_MODE]
    ell = S[S_ELL]
    k = S[S_K]
    for i in range(start, data.shape[0]):
        if meta[M_LIVE] > limit:
            return NEED_ROOM, i
        if wm[W_POS] > olimit:
            return OUT_FULL, i
        if nsnap > 0 and C[C_NSNAP] >= nsnap:
            return SNAP_FULL, i
        b = np.int64(data[i])
        F[pm[P_SP]] = b
        pm[P_SP] += 1
        level = 0
        x = b
        while True:
            base = level * QCAP
            n = qlen[level]
            Q[base + n] = x
            n += 1
            if n == 4:
                if _landmark(Q[base], Q[base + 1], Q[base + 2], Q[base + 3]):
                    qlen[level] = n
                    break
                z = _update_arrays(F, pm, meta, left, rx, ry, cnt, nxtp, nxtc, pheads, cheads, S, out, wm, C)
                if z < 0:
                    return z, i
                Q[base] = Q[base + 2]
                Q[base + 1] = Q[base + 3]
            elif n == 5:
                y = _update_arrays(F, pm, meta, left, rx, ry, cnt, nxtp, nxtc, pheads, cheads, S, out, wm, C)
                if y < 0:
                    return y, i
                z = _update_arrays(F, pm, meta, left, rx, ry, cnt, nxtp, nxtc, pheads, cheads, S, out, wm, C)
                if z < 0:
                    return z, i
                Q[base] = Q[base + 3]
                Q[base + 1] = Q[base + 4]
            else:
                qlen[level] = n
                break
            qlen[level] = 2
            level += 1
            if level >= MAX_LEVELS:
                return ERR_LEVELS, i
            if level >= pm[P_LEVELS]:
                pm[P_LEVELS] = level + 1
                if level + 1 > C[C_LEVELS_MAX]:
                    C[C_LEVELS_MAX] = level + 1
            x = z
        consumed = S[S_CONSUMED] + 1
        S[S_CONSUMED] = consumed
        pm[P_PENDING] += 1
        if mode == FREQ:
            flush = meta[M_LIVE] >= k
        elif mode == LOSSY or mode == BLOCK:
            flush = consumed % ell == 0
        else:
            flush = False
        if flush:
            r = _close_segment(P, D, S, out, wm, C, snaps)
            if r < 0:
                return r, i
            limit = min(left.shape[0], meta[dct.M_LIMIT]) - RULE_MARGIN
    return DONE, data.shape[0]


@dataclass
class CompressStats:
    bytes_in: int = 0
    bytes_out: int = 0
    segments: int = 0
    rules_created: int = 0
    rules_live_peak: int = 0
    boundary_live_max: int = 0
    bits_out: int = 0
    leaves: int = 0
    internals: int = 0
    levels: int = 0
    seconds: float = 0.0
    mean_probes: float = 0.0

    @property
    def cr_percent(self) -> float:
        return 100.0 * self.bytes_out / self.bytes_in if self.bytes_in else 0.0

    def record(self) -> dict:
        return {
            "bytes_in": self.bytes_in,
            "bytes_out": self.bytes_out,
            "cr_percent": round(self.cr_percent, 4),
            "segments": self.segments,
            "rules_created": self.rules_created,
            "rules_live_peak": self.rules_live_peak,
            "seconds": round(self.seconds, 4),
        }


@dataclass
class Probe:
    """Samples of (bytes consumed, live rules) taken every ``interval`` bytes."""

    interval: int
    series: list = field(default_factory=list)


class Compressor:
    """Incremental compressor writing a container to ``sink``.

    ``snapshots`` collects one row per segment boundary (see ``SNAP_FIELDS``)
    for mirroring checks; leave it ``None`` for production runs.
    """

    def __init__(
        self,
        sink: BinaryIO,
        config: StrategyConfig,
        *,
        alpha: float = 1.0,
        snapshots: list | None = None,
        probe: Probe | None = None,
        buffer_size: int = 1 << 20,
    ):
        self.sink = sink
        self.config = config
        self.dictionary = PhraseDictionary(alpha)
        self.strategy = StrategyState(config)
        self.P = new_parser_state()
        self.out = np.zeros(max(buffer_size, 2 * OUT_MARGIN), np.uint8)
        self.wm = np.zeros(W_SIZE, np.int64)
        self.C = np.zeros(C_SIZE, np.int64)
        self.snapshots = snapshots
        self.snaps = np.zeros((1024 if snapshots is not None else 0, SNAP_WIDTH), np.int64)
        self.probe = probe
        self._started = time.perf_counter()
        self._header_at = sink.tell() if _seekable(sink) else None
        sink.write(ContainerHeader.for_config(config).pack())
        self.bytes_out = 0
        self.closed = False

    def _flush_out(self) -> None:
        pos = int(self.wm[W_POS])
        if pos:
            self.sink.write(self.out[:pos].tobytes())
            self.bytes_out += pos
            self.wm[W_POS] = 0

    def _flush_snaps(self) -> None:
        n = int(self.C[C_NSNAP])
        if n:
            for row in self.snaps[:n]:
                self.snapshots.append(tuple(int(v) for v in row))
            self.C[C_NSNAP] = 0

    def _check(self, status: int) -> None:
        if status == NEED_ROOM:
            self.dictionary.reserve(max(2 * RULE_MARGIN, len(self.dictionary)))
        elif status == OUT_FULL:
            self._flush_out()
        elif status == SNAP_FULL:
            self._flush_snaps()
        elif status < 0:
            from .errors import InvariantError

            raise InvariantError(f"compressor kernel failed with status {status}")

    def _run(self, data: np.ndarray) -> None:
        i = 0
        while True:
            status, i = _compress_chunk(
                data, i, self.P, self.dictionary.D, self.strategy.S, self.out, self.wm,
                self.C, self.snaps,
            )
            if status == DONE:
                return
            self._check(status)

    def feed(self, chunk: bytes) -> None:
        if self.closed:
            raise ValueError("compressor already finished")
        data = np.frombuffer(chunk, np.uint8)
        if self.probe is None:
            self._run(data)
            return
        step = self.probe.interval
        consumed = self.strategy.chars_consumed
        i = 0
        while i < len(data):
            j = min(len(data), i + step - consumed % step)
            self._run(data[i:j])
            consumed += j - i
            i = j
            if consumed % step == 0:
                self.probe.series.append((consumed, len(self.dictionary)))

    def finish(self) -> CompressStats:
        if not self.closed:
            self.closed = True
            if self.P[3][P_PENDING]:
                self._flush_out()
                self.dictionary.reserve(RULE_MARGIN)
                if self.snapshots is not None:
                    self._flush_snaps()
                status = _close_segment(
                    self.P, self.dictionary.D, self.strategy.S, self.out, self.wm, self.C,
                    self.snaps,
                )
                self._check(status)
            pad_to_byte(self.out, self.wm)
            self._flush_out()
            if self.snapshots is not None:
                self._flush_snaps()
            if self.probe is not None:
                n = self.strategy.chars_consumed
                if not self.probe.series or self.probe.series[-1][0] != n:
                    self.probe.series.append((n, len(self.dictionary)))
            if self._header_at is not None:
                end = self.sink.tell()
                self.sink.seek(self._header_at + LENGTH_OFFSET)
                self.sink.write(self.strategy.chars_consumed.to_bytes(8, "little"))
                self.sink.seek(end)
        return self.stats()

    def stats(self) -> CompressStats:
        from .codec import HEADER_SIZE

        C = self.C
        meta = self.dictionary.D[D_META]
        return CompressStats(
            bytes_in=self.strategy.chars_consumed,
            bytes_out=HEADER_SIZE + self.bytes_out,
            segments=int(C[C_SEGMENTS]),
            rules_created=int(meta[dct.M_TOTAL]),
            rules_live_peak=int(meta[dct.M_PEAK]),
            boundary_live_max=int(C[C_BOUNDARY_LIVE_MAX]),
            bits_out=int(self.wm[W_TOTAL]),
            leaves=int(C[C_LEAVES]),
            internals=int(C[C_INTERNALS]),
            levels=int(C[C_LEVELS_MAX]),
            seconds=time.perf_counter() - self._started,
            mean_probes=self.dictionary.mean_probes(),
        )

    # -- views for tests and tooling -----------------------------------

    def queues(self) -> list[list[int]]:
        """Current queue contents per level, sentinels shown as -1."""
        Q, qlen, _, pm = self.P
        return [list(Q[k * QCAP : k * QCAP + qlen[k]]) for k in range(max(1, pm[P_LEVELS]))]

    def frontier(self) -> list[int]:
        _, _, F, pm = self.P
        return [int(v) for v in F[: pm[P_SP]]]


def _seekable(f) -> bool:
    try:
        return f.seekable()
    except (AttributeError, ValueError):
        return False


def compress_stream(
    src: BinaryIO,
    config: StrategyConfig,
    out: BinaryIO,
    *,
    alpha: float = 1.0,
    chunk_size: int = 1 << 20,
    snapshots: list | None = None,
    probe: Probe | None = None,
    on_chunk: Callable[[Compressor], None] | None = None,
) -> CompressStats:
    comp = Compressor(out, config, alpha=alpha, snapshots=snapshots, probe=probe)
    offset = 0
    while True:
        chunk = src.read(chunk_size)
        if not chunk:
            break
        try:
            comp.feed(chunk)
        except OSError as exc:
            raise OSError(f"write failed near input offset {offset}: {exc}") from exc
        offset += len(chunk)
        if on_chunk is not None:
            on_chunk(comp)
    return comp.finish()


def compress(data: bytes, config: StrategyConfig | None = None, **kwargs) -> bytes:
    import io

    buf = io.BytesIO()
    comp = Compressor(buf, config or StrategyConfig.plain(), **kwargs)
    comp.feed(data)
    comp.finish()
    return buf.getvalue()
