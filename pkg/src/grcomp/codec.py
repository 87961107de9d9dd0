"""Container header and the interleaved succinct tree event stream.

Layout, all multi-byte header fields little-endian::

    magic "GRC1" | version u8 | mode u8 | sigma u16 | k u64 | eps_ppm u32
    | ell u64 | original_length u64

followed by one bit stream (MSB first within each byte).  Each segment is
the post-order walk of one partial parse tree:

* leaf      ``0`` then the label in ``w`` bits, big-endian
* internal  ``1``
* segment end: the ``1`` that would bring the leaf-minus-internal count to 0

``w = max(1, ceil(lg(sigma + created)))`` where ``created`` is the number of
rules created before the event, so both sides derive widths on their own.
The stream ends with at most 7 zero padding bits.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator, NamedTuple

import numpy as np
from numba import njit

from .dictionary import SIGMA
from .errors import CorruptStreamError, FramingError, TruncatedStreamError
from .strategies import Mode, StrategyConfig

MAGIC = b"GRC1"
VERSION = 1
_HEADER = struct.Struct("<4sBBHQIQQ")
HEADER_SIZE = _HEADER.size
LENGTH_OFFSET = HEADER_SIZE - 8


@dataclass(frozen=True)
class ContainerHeader:
    mode: Mode
    k: int = 0
    eps_ppm: int = 0
    ell: int = 0
    original_length: int = 0
    sigma: int = SIGMA
    version: int = VERSION

    @classmethod
    def for_config(cls, config: StrategyConfig, original_length: int = 0) -> ContainerHeader:
        return cls(config.mode, config.k, config.eps_ppm, config.ell, original_length)

    def config(self) -> StrategyConfig:
        return StrategyConfig(self.mode, k=self.k, eps=self.eps_ppm / 10_000, ell=self.ell)

    def pack(self) -> bytes:
        return _HEADER.pack(
            MAGIC, self.version, int(self.mode), self.sigma, self.k, self.eps_ppm,
            self.ell, self.original_length,
        )

    @classmethod
    def unpack(cls, raw: bytes) -> ContainerHeader:
        if len(raw) < HEADER_SIZE:
            raise TruncatedStreamError(f"header needs {HEADER_SIZE} bytes, got {len(raw)}")
        magic, version, mode, sigma, k, eps_ppm, ell, length = _HEADER.unpack(raw[:HEADER_SIZE])
        if magic != MAGIC:
            raise CorruptStreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CorruptStreamError(f"unsupported version {version}")
        if sigma != SIGMA:
            raise CorruptStreamError(f"unsupported alphabet size {sigma}")
        try:
            header = cls(Mode(mode), k, eps_ppm, ell, length, sigma, version)
            header.config()
        except ValueError as exc:
            raise CorruptStreamError(f"bad header parameters: {exc}") from None
        return header

    @classmethod
    def read(cls, src: BinaryIO) -> ContainerHeader:
        return cls.unpack(_read_exact(src, HEADER_SIZE))


def _read_exact(src: BinaryIO, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = src.read(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return buf


def label_width(created: int, sigma: int = SIGMA) -> int:
    return max(1, (sigma + created - 1).bit_length())


# -- bit writer shared with the compressor kernel -------------------------

W_POS = 0  # next free byte in the output buffer
W_BUF = 1  # pending bits not yet forming a whole byte
W_NBITS = 2
W_TOTAL = 3  # bits written over the whole stream
W_SIZE = 4


@njit(cache=True, inline="always")
def write_bits(out, wm, value, n):
    buf = (wm[W_BUF] << n) | value
    nbits = wm[W_NBITS] + n
    pos = wm[W_POS]
    while nbits >= 8:
        nbits -= 8
        out[pos] = (buf >> nbits) & 0xFF
        pos += 1
    wm[W_BUF] = buf & ((np.int64(1) << nbits) - 1)
    wm[W_NBITS] = nbits
    wm[W_POS] = pos
    wm[W_TOTAL] += n


@njit(cache=True, inline="always")
def width_for(created):
    v = SIGMA + created - 1
    w = 0
    while v > 0:
        v >>= 1
        w += 1
    return max(w, 1)


@njit(cache=True, inline="always")
def write_leaf(out, wm, code, created):
    w = width_for(created)
    write_bits(out, wm, 0, 1)
    if w > 48:
        write_bits(out, wm, code >> 32, w - 32)
        write_bits(out, wm, code & 0xFFFFFFFF, 32)
    else:
        write_bits(out, wm, code, w)


@njit(cache=True)
def pad_to_byte(out, wm):
    if wm[W_NBITS]:
        pad = 8 - wm[W_NBITS]
        write_bits(out, wm, 0, pad)
        wm[W_TOTAL] -= pad


class EventWriter:
    """Python-level emitter of leaf / internal / segment-end events.

    Tracks the leaf-minus-internal balance so framing mistakes raise instead
    of producing an undecodable stream.  ``created`` must be advanced by the
    caller whenever an internal event creates a rule (it does so by default).
    """

    def __init__(self, sink: BinaryIO, buffer_size: int = 1 << 16):
        self.sink = sink
        self.out = np.zeros(buffer_size, np.uint8)
        self.wm = np.zeros(W_SIZE, np.int64)
        self.created = 0
        self.balance = 0

    def _drain(self) -> None:
        pos = int(self.wm[W_POS])
        if pos > len(self.out) - 64:
            self.sink.write(self.out[:pos].tobytes())
            self.wm[W_POS] = 0

    def emit_leaf(self, code: int) -> None:
        if not 0 <= code < SIGMA + self.created:
            raise FramingError(f"leaf label {code} is not a known code")
        write_leaf(self.out, self.wm, code, self.created)
        self.balance += 1
        self._drain()

    def emit_internal(self, creates: bool = True) -> None:
        if self.balance < 2:
            raise FramingError("internal node needs two subtrees")
        write_bits(self.out, self.wm, 1, 1)
        self.balance -= 1
        if creates:
            self.created += 1
        self._drain()

    def end_segment(self) -> None:
        if self.balance != 1:
            raise FramingError(f"segment end with {self.balance} open subtrees")
        write_bits(self.out, self.wm, 1, 1)
        self.balance = 0
        self._drain()

    def close(self) -> int:
        if self.balance:
            raise FramingError("stream closed inside a segment")
        pad_to_byte(self.out, self.wm)
        self.sink.write(self.out[: int(self.wm[W_POS])].tobytes())
        self.wm[W_POS] = 0
        return int(self.wm[W_TOTAL])


# -- pure Python reader (independent of the decoder kernel) ----------------


class Leaf(NamedTuple):
    code: int


class Internal(NamedTuple):
    pass


class SegmentEnd(NamedTuple):
    pass


class EndOfStream(NamedTuple):
    pass


INTERNAL = Internal()
SEGMENT_END = SegmentEnd()
END_OF_STREAM = EndOfStream()


class EventReader:
    """Reads events from an in-memory payload.

    ``read_event(created_so_far)`` needs the number of rules the caller has
    created so far to know each label's width.
    """

    def __init__(self, payload: bytes):
        self.data = payload
        self.nbits = 8 * len(payload)
        self.pos = 0
        self.balance = 0

    def _bit(self) -> int:
        p = self.pos
        self.pos = p + 1
        return (self.data[p >> 3] >> (7 - (p & 7))) & 1

    def read_event(self, created_so_far: int):
        remaining = self.nbits - self.pos
        if self.balance == 0 and remaining <= 7:
            tail = self.data[self.pos >> 3 :] if remaining else b""
            if remaining and tail[0] & ((1 << remaining) - 1):
                raise CorruptStreamError("corrupt padding")
            self.pos = self.nbits
            return END_OF_STREAM
        if remaining <= 0:
            raise TruncatedStreamError("truncated stream inside a segment")
        if self._bit() == 0:
            w = label_width(created_so_far)
            if self.pos + w > self.nbits:
                raise TruncatedStreamError("truncated stream: label runs past the end")
            code = 0
            for _ in range(w):
                code = (code << 1) | self._bit()
            self.balance += 1
            return Leaf(code)
        if self.balance == 0:
            raise CorruptStreamError("segment starts with an internal node")
        self.balance -= 1
        return SEGMENT_END if self.balance == 0 else INTERNAL


def iter_segments(payload: bytes, mode: Mode) -> Iterator[list]:
    """Yield each segment's event list (leaves and internals, end excluded).

    Tracks rule creation the same way the decoder does: every internal event
    creates one rule, and block mode restarts numbering after each segment.
    """
    reader = EventReader(payload)
    created = 0
    events: list = []
    while True:
        ev = reader.read_event(created)
        if ev is END_OF_STREAM:
            return
        if ev is SEGMENT_END:
            yield events
            events = []
            if mode == Mode.BLOCK:
                created = 0
            continue
        if ev is INTERNAL:
            created += 1
        events.append(ev)
