"""Bounded-space decompression by replaying the compressor's dictionary.

Every internal event creates the next rule exactly as the compressor did.
Every nonterminal leaf stands for an occurrence the compressor matched with
dictionary hits all the way down, so expanding it bumps the counter of every
rule in its derivation; that reproduces the compressor's counters without
any side channel.  Segment ends run the same prune as the compressor, so the
two dictionaries agree at every boundary.

Leaves arrive in text order, so output is produced as each leaf is read.
"""
from __future__ import annotations

import io
import time
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np
from numba import njit

from . import dictionary as dct
from .codec import HEADER_SIZE, ContainerHeader
from .dictionary import D_LEFT, D_META, D_X, D_Y, M_CREATED, M_LIVE, SIGMA, PhraseDictionary
from .errors import (
    CorruptStreamError,
    IntegrityError,
    InvariantError,
    MirrorDivergenceError,
    TruncatedStreamError,
)
from .parser import SNAP_WIDTH, _snapshot
from .strategies import StrategyConfig, StrategyState, counter_init, prune

# decoder meta
R_BITPOS = 0
R_SP = 1  # decode stack size
R_BALANCE = 2  # leaves minus internals in the open segment
R_XSP = 3  # expansion stack size
R_OPOS = 4  # next free byte in the output buffer
R_LENGTH = 5  # bytes recovered so far
R_SIZE = 6

# decoder statistics (laid out like the compressor's where shared)
X_SEGMENTS = 0
X_LEAVES = 1
X_INTERNALS = 2
X_MAX_STACK = 3
X_BOUNDARY_LIVE_MAX = 4
X_NSNAP = 5
X_STRUCT_BITS = 6
X_SIZE = 7

DONE = 0
NEED_INPUT = 1
OUT_FULL = 2
SNAP_FULL = 3
NEED_ROOM = 4
ERR_TRUNCATED = -1
ERR_PADDING = -2
ERR_UNDERFLOW = -3
ERR_DIVERGENCE = -4
ERR_CLOSURE = -5
ERR_DEPTH = -6
ERR_BAD_START = -7
ERR_BAD_LABEL = -8

_ERRORS = {
    ERR_TRUNCATED: (TruncatedStreamError, "truncated stream"),
    ERR_PADDING: (CorruptStreamError, "corrupt padding"),
    ERR_UNDERFLOW: (CorruptStreamError, "decode stack overflow or underflow"),
    ERR_DIVERGENCE: (MirrorDivergenceError, "mirror divergence: internal node for a live digram"),
    ERR_CLOSURE: (CorruptStreamError, "broken closure: leaf refers to a missing rule"),
    ERR_DEPTH: (CorruptStreamError, "derivation deeper than the expansion stack"),
    ERR_BAD_START: (CorruptStreamError, "segment starts with an internal node"),
    ERR_BAD_LABEL: (CorruptStreamError, "leaf label is not a known code"),
}

MAX_EVENT_BITS = 1 + 64
STACK_CAP = 1 << 12
EXPAND_CAP = 1 << 16


@njit(cache=True, inline="always")
def _read_bit(buf, pos):
    return (buf[pos >> 3] >> (7 - (pos & 7))) & 1


@njit(cache=True, _nrt=False)
def _expand(D, XS, rm, out, counting):
    """Continue the pending expansion until done or the output is full.

    Returns 0 when the stack is empty, OUT_FULL, or ERR_CLOSURE.
    """
    xsp = rm[R_XSP]
    opos = rm[R_OPOS]
    ocap = out.shape[0]
    rx = D[D_X]
    ry = D[D_Y]
    status = 0
    while xsp > 0:
        c = XS[xsp - 1]
        if c < SIGMA:
            if opos >= ocap:
                status = OUT_FULL
                break
            out[opos] = c
            opos += 1
            xsp -= 1
            continue
        s = dct.find_code(D, c)
        if s < 0:
            status = ERR_CLOSURE
            break
        if xsp + 1 >= XS.shape[0]:
            status = ERR_DEPTH
            break
        if counting:
            dct.bump(D, s, 1)
        XS[xsp - 1] = ry[s]
        XS[xsp] = rx[s]
        xsp += 1
    rm[R_LENGTH] += opos - rm[R_OPOS]
    rm[R_XSP] = xsp
    rm[R_OPOS] = opos
    return status


@njit(cache=True)
def _end_segment(D, S, X, snaps, length):
    X[X_SEGMENTS] += 1
    _, status = prune(S, D)
    if status < 0:
        return -1
    live = D[D_META][M_LIVE]
    if live > X[X_BOUNDARY_LIVE_MAX]:
        X[X_BOUNDARY_LIVE_MAX] = live
    if snaps.shape[0] > 0:
        _snapshot(D, S, X, snaps, length)
    return 0


# Hot kernels run without reference counting: they never allocate, and the
# per-access refcount traffic on the array tuples costs more than the work.
@njit(cache=True, _nrt=False)
def _decode_chunk(buf, nbits, final, rm, D, S, ST, XS, out, X, snaps, counting):
    """Decode events from ``buf`` (``nbits`` valid bits) until a stop condition.

    Returns a status code; the bit position and all state live in the arrays.
    """
    meta = D[D_META]
    limit = min(D[D_LEFT].shape[0], meta[dct.M_LIMIT])
    while True:
        if rm[R_XSP] > 0:
            r = _expand(D, XS, rm, out, counting)
            if r != 0:
                return r
        if rm[R_OPOS] >= out.shape[0]:
            return OUT_FULL
        if meta[M_LIVE] + 1 > limit:
            return NEED_ROOM
        if snaps.shape[0] > 0 and X[X_NSNAP] >= snaps.shape[0]:
            return SNAP_FULL
        pos = rm[R_BITPOS]
        remaining = nbits - pos
        if not final and remaining < MAX_EVENT_BITS:
            return NEED_INPUT
        bal = rm[R_BALANCE]
        if bal == 0 and remaining <= 7:
            while pos < nbits:
                if _read_bit(buf, pos):
                    return ERR_PADDING
                pos += 1
            rm[R_BITPOS] = pos
            return DONE
        if remaining <= 0:
            return ERR_TRUNCATED
        bit = _read_bit(buf, pos)
        pos += 1
        X[X_STRUCT_BITS] += 1
        if bit == 0:
            created = meta[M_CREATED]
            v = SIGMA + created - 1
            w = 0
            while v > 0:
                v >>= 1
                w += 1
            if pos + w > nbits:
                return ERR_TRUNCATED
            code = np.int64(0)
            for _ in range(w):
                code = (code << 1) | _read_bit(buf, pos)
                pos += 1
            rm[R_BITPOS] = pos
            if code >= SIGMA + created:
                return ERR_BAD_LABEL
            sp = rm[R_SP]
            if sp >= ST.shape[0]:
                return ERR_UNDERFLOW
            ST[sp] = code
            rm[R_SP] = sp + 1
            if sp + 1 > X[X_MAX_STACK]:
                X[X_MAX_STACK] = sp + 1
            rm[R_BALANCE] = bal + 1
            X[X_LEAVES] += 1
            XS[0] = code
            rm[R_XSP] = 1
            continue
        rm[R_BITPOS] = pos
        if bal == 0:
            return ERR_BAD_START
        if bal == 1:
            # the balancing bit: segment end, no rule for the virtual node
            if rm[R_SP] != 1:
                return ERR_UNDERFLOW
            rm[R_SP] = 0
            rm[R_BALANCE] = 0
            if _end_segment(D, S, X, snaps, rm[R_LENGTH]) < 0:
                return ERR_CLOSURE
            limit = min(D[D_LEFT].shape[0], meta[dct.M_LIMIT])
            continue
        sp = rm[R_SP]
        if sp < 2:
            return ERR_UNDERFLOW
        a = ST[sp - 2]
        b = ST[sp - 1]
        if dct.find_pair(D, a, b) >= 0:
            return ERR_DIVERGENCE
        z = dct.insert_rule(D, a, b, counter_init(S))
        ST[sp - 2] = z
        rm[R_SP] = sp - 1
        rm[R_BALANCE] = bal - 1
        X[X_INTERNALS] += 1


def expand(root: int, dictionary: PhraseDictionary, out: BinaryIO | None = None) -> int:
    """Write the text derived from ``root`` to ``out``; returns its length."""
    XS = np.zeros(EXPAND_CAP, np.int64)
    XS[0] = root
    rm = np.zeros(R_SIZE, np.int64)
    rm[R_XSP] = 1
    buf = np.zeros(1 << 16, np.uint8)
    while True:
        status = _expand(dictionary.D, XS, rm, buf, False)
        if status < 0:
            cls, msg = _ERRORS[ERR_CLOSURE if status == ERR_CLOSURE else ERR_DEPTH]
            raise cls(msg)
        if out is not None:
            out.write(buf[: rm[R_OPOS]].tobytes())
        rm[R_OPOS] = 0
        if status == 0:
            return int(rm[R_LENGTH])


@dataclass
class DecompressStats:
    bytes_in: int = 0
    bytes_out: int = 0
    segments: int = 0
    rules_created: int = 0
    rules_live_peak: int = 0
    boundary_live_max: int = 0
    leaves: int = 0
    internals: int = 0
    structure_bits: int = 0
    max_stack: int = 0
    seconds: float = 0.0

    @property
    def cr_percent(self) -> float:
        return 100.0 * self.bytes_in / self.bytes_out if self.bytes_out else 0.0

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


class Decompressor:
    """Streams a container from ``src`` and writes the text to ``out``.

    ``out`` may be ``None`` to only replay the stream (used by ``stat``).
    """

    def __init__(
        self,
        src: BinaryIO,
        out: BinaryIO | None,
        *,
        alpha: float = 1.0,
        snapshots: list | None = None,
        chunk_size: int = 1 << 20,
        out_size: int = 1 << 20,
    ):
        self.src = src
        self.out = out
        self.header = ContainerHeader.read(src)
        self.config: StrategyConfig = self.header.config()
        self.dictionary = PhraseDictionary(alpha)
        self.strategy = StrategyState(self.config)
        self.snapshots = snapshots
        self.snaps = np.zeros((1024 if snapshots is not None else 0, SNAP_WIDTH), np.int64)
        self.chunk_size = chunk_size
        self.rm = np.zeros(R_SIZE, np.int64)
        self.ST = np.zeros(STACK_CAP, np.int64)
        self.XS = np.zeros(EXPAND_CAP, np.int64)
        self.obuf = np.zeros(out_size, np.uint8)
        self.X = np.zeros(X_SIZE, np.int64)
        self.bytes_in = HEADER_SIZE

    def _emit(self) -> None:
        n = int(self.rm[R_OPOS])
        if n and self.out is not None:
            self.out.write(self.obuf[:n].tobytes())
        self.rm[R_OPOS] = 0

    def _flush_snaps(self) -> None:
        n = int(self.X[X_NSNAP])
        for row in self.snaps[:n]:
            self.snapshots.append(tuple(int(v) for v in row))
        self.X[X_NSNAP] = 0

    def run(self) -> DecompressStats:
        started = time.perf_counter()
        buf = np.zeros(0, np.uint8)
        final = False
        while True:
            if not final:
                chunk = self.src.read(self.chunk_size)
                if chunk:
                    self.bytes_in += len(chunk)
                    keep = buf[int(self.rm[R_BITPOS]) >> 3 :]
                    self.rm[R_BITPOS] &= 7
                    buf = np.concatenate([keep, np.frombuffer(chunk, np.uint8)])
                else:
                    final = True
            while True:
                status = _decode_chunk(
                    buf, 8 * len(buf), final, self.rm, self.dictionary.D, self.strategy.S,
                    self.ST, self.XS, self.obuf, self.X, self.snaps, True,
                )
                if status == OUT_FULL:
                    self._emit()
                elif status == SNAP_FULL:
                    self._flush_snaps()
                elif status == NEED_ROOM:
                    self.dictionary.reserve(max(1024, len(self.dictionary)))
                else:
                    break
            if status < 0:
                cls, msg = _ERRORS[status]
                raise cls(f"{msg} (bit {int(self.rm[R_BITPOS])} of the payload)")
            if status == DONE:
                break
        self._emit()
        if self.snapshots is not None:
            self._flush_snaps()
        length = int(self.rm[R_LENGTH])
        if self.header.original_length and length != self.header.original_length:
            raise IntegrityError(
                f"recovered {length} bytes, header records {self.header.original_length}"
            )
        meta = self.dictionary.D[D_META]
        return DecompressStats(
            bytes_in=self.bytes_in,
            bytes_out=length,
            segments=int(self.X[X_SEGMENTS]),
            rules_created=int(meta[dct.M_TOTAL]),
            rules_live_peak=int(meta[dct.M_PEAK]),
            boundary_live_max=int(self.X[X_BOUNDARY_LIVE_MAX]),
            leaves=int(self.X[X_LEAVES]),
            internals=int(self.X[X_INTERNALS]),
            structure_bits=int(self.X[X_STRUCT_BITS]),
            max_stack=int(self.X[X_MAX_STACK]),
            seconds=time.perf_counter() - started,
        )


def decompress_stream(src: BinaryIO, out: BinaryIO | None, **kwargs) -> DecompressStats:
    return Decompressor(src, out, **kwargs).run()


def decompress(blob: bytes, **kwargs) -> bytes:
    out = io.BytesIO()
    decompress_stream(io.BytesIO(blob), out, **kwargs)
    return out.getvalue()
