"""Dictionary-size control: plain, frequency counting, lossy counting, block.

All pruning runs at segment boundaries only, so the decoder can replay it
from the same dictionary state.  A rule that is still referenced by a
surviving rule is never removed (closure protection), which keeps every
live right-hand side expandable.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dictionary import (
    D_CNT,
    D_LEFT,
    D_MARK,
    D_META,
    M_LIVE,
    PhraseDictionary,
    clear,
    live_slots,
    mark_below,
    new_epoch,
    remove_slot,
)
from .errors import InvariantError


class Mode(enum.IntEnum):
    PLAIN = 0
    FREQ = 1
    LOSSY = 2
    BLOCK = 3


PLAIN, FREQ, LOSSY, BLOCK = 0, 1, 2, 3

# strategy state array
S_MODE = 0
S_K = 1
S_EPS = 2  # vacancy rate in parts per million of the dictionary (percent * 10**4)
S_ELL = 3
S_DELTA = 4  # completed intervals (lossy), completed segments otherwise
S_CONSUMED = 5  # N: input bytes consumed so far
S_PRUNES = 6
S_REMOVED = 7
S_SIZE = 8

PPM = 1_000_000


@dataclass(frozen=True)
class StrategyConfig:
    mode: Mode = Mode.PLAIN
    k: int = 0
    eps: float = 0.0  # percent
    ell: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode == Mode.FREQ:
            if self.k < 2:
                raise ValueError(f"freq mode needs k >= 2, got {self.k}")
            if not 0 < self.eps < 100:
                raise ValueError(f"freq mode needs 0 < eps < 100, got {self.eps}")
            if self.ell:
                raise ValueError("ell is not used by freq mode")
        elif self.mode in (Mode.LOSSY, Mode.BLOCK):
            if self.ell < 1:
                raise ValueError(f"{self.mode.name.lower()} mode needs ell >= 1, got {self.ell}")
            if self.k or self.eps:
                raise ValueError("k and eps are only used by freq mode")
        elif self.k or self.eps or self.ell:
            raise ValueError("plain mode takes no parameters")

    @classmethod
    def plain(cls) -> StrategyConfig:
        return cls(Mode.PLAIN)

    @classmethod
    def freq(cls, k: int, eps: float = 0.3) -> StrategyConfig:
        return cls(Mode.FREQ, k=k, eps=eps)

    @classmethod
    def lossy(cls, ell: int) -> StrategyConfig:
        return cls(Mode.LOSSY, ell=ell)

    @classmethod
    def block(cls, ell: int) -> StrategyConfig:
        return cls(Mode.BLOCK, ell=ell)

    @property
    def eps_ppm(self) -> int:
        return round(self.eps * 10_000)

    def target_size(self) -> int:
        """Largest dictionary size a frequency-counting prune stops at."""
        return self.k * (PPM - self.eps_ppm) // PPM


@njit(cache=True, inline="always")
def counter_init(S):
    if S[S_MODE] == LOSSY:
        return S[S_DELTA] + 1
    return np.int64(1)


@njit(cache=True, inline="always")
def should_flush(S, live):
    mode = S[S_MODE]
    if mode == FREQ:
        return live >= S[S_K]
    if mode == LOSSY or mode == BLOCK:
        return S[S_CONSUMED] % S[S_ELL] == 0
    return False


@njit(cache=True)
def _protected(D, slots, keep, epoch, stack):
    """Mark everything below the kept slots; -1 on a broken closure."""
    for i in range(slots.shape[0]):
        if keep[i]:
            if mark_below(D, slots[i], epoch, stack) < 0:
                return -1
    return 0


@njit(cache=True)
def _removable(D, slots, cnt, threshold, strict, stack):
    """Count marked-but-unprotected rules for a counter threshold.

    A rule is marked when its counter is ``<= threshold`` (or ``<`` when
    ``strict``).  Returns (count, epoch) so the caller can reuse the marks.
    """
    n = slots.shape[0]
    keep = np.empty(n, np.bool_)
    for i in range(n):
        keep[i] = cnt[i] >= threshold if strict else cnt[i] > threshold
    epoch = new_epoch(D)
    if _protected(D, slots, keep, epoch, stack) < 0:
        return np.int64(-1), epoch
    mark = D[D_MARK]
    removable = 0
    for i in range(n):
        if not keep[i] and mark[slots[i]] != epoch:
            removable += 1
    return np.int64(removable), epoch


@njit(cache=True)
def prune(S, D):
    """Apply the boundary prune of the active mode; returns removed codes.

    The second return value is 0, or -1 when the closure is broken.
    """
    mode = S[S_MODE]
    none = np.empty(0, np.int64)
    if mode == PLAIN:
        return none, 0
    S[S_DELTA] += 1
    if mode == BLOCK:
        slots = live_slots(D)
        removed = D[D_LEFT][slots].copy()
        clear(D)
        S[S_PRUNES] += 1
        S[S_REMOVED] += removed.shape[0]
        return removed, 0
    live = D[D_META][M_LIVE]
    if mode == FREQ and live < S[S_K]:
        return none, 0
    slots = live_slots(D)
    cnt = D[D_CNT][slots]
    stack = np.empty(2 * live + 4, np.int64)
    if mode == LOSSY:
        threshold = S[S_DELTA]
        strict = True
        n_rm, epoch = _removable(D, slots, cnt, threshold, strict, stack)
        if n_rm < 0:
            return none, -1
    else:
        # Frequency counting decrements every counter once per pass until
        # enough rules hit zero.  Removable(t) after t passes is monotone in
        # t, so binary search over the distinct counter values instead.
        target = S[S_K] * (PPM - S[S_EPS]) // PPM
        vals = np.unique(cnt)
        lo = 0
        hi = vals.shape[0] - 1
        while lo < hi:
            mid = (lo + hi) // 2
            n_rm, epoch = _removable(D, slots, cnt, vals[mid], False, stack)
            if n_rm < 0:
                return none, -1
            if live - n_rm <= target:
                hi = mid
            else:
                lo = mid + 1
        threshold = vals[lo]
        strict = False
        n_rm, epoch = _removable(D, slots, cnt, threshold, strict, stack)
        if n_rm < 0:
            return none, -1
    mark = D[D_MARK]
    counters = D[D_CNT]
    removed = np.empty(n_rm, np.int64)
    j = 0
    for i in range(slots.shape[0]):
        s = slots[i]
        c = cnt[i]
        dropped = c < threshold if strict else c <= threshold
        if mode == FREQ:
            if not dropped:
                counters[s] = c - threshold
            elif mark[s] == epoch:
                counters[s] = 1
        if dropped and mark[s] != epoch:
            removed[j] = D[D_LEFT][s]
            j += 1
            remove_slot(D, s)
    S[S_PRUNES] += 1
    S[S_REMOVED] += n_rm
    return removed, 0


def new_state(config: StrategyConfig):
    S = np.zeros(S_SIZE, np.int64)
    S[S_MODE] = int(config.mode)
    S[S_K] = config.k
    S[S_EPS] = config.eps_ppm
    S[S_ELL] = config.ell
    return S


class StrategyState:
    """Mutable counterpart of a :class:`StrategyConfig` (Δ, N, prune stats)."""

    def __init__(self, config: StrategyConfig):
        self.config = config
        self.S = new_state(config)

    @property
    def delta(self) -> int:
        return int(self.S[S_DELTA])

    @delta.setter
    def delta(self, value: int) -> None:
        self.S[S_DELTA] = value

    @property
    def chars_consumed(self) -> int:
        return int(self.S[S_CONSUMED])

    @chars_consumed.setter
    def chars_consumed(self, value: int) -> None:
        self.S[S_CONSUMED] = value

    def counter_init(self) -> int:
        return int(counter_init(self.S))

    def should_flush(self, live_rules: int) -> bool:
        return bool(should_flush(self.S, live_rules))

    def on_hit(self, dictionary: PhraseDictionary, z: int) -> None:
        dictionary.on_hit(z)

    def prune(self, dictionary: PhraseDictionary) -> set[int]:
        removed, status = prune(self.S, dictionary.D)
        if status < 0:
            raise InvariantError("broken closure while pruning")
        return set(removed.tolist())
