"""Phrase dictionary and reverse dictionary for digram rules.

Rules ``Z -> X Y`` live in a slot pool of parallel int64 arrays.  Two
chained hash indexes share the pool: one keyed by the digram ``(X, Y)``
(the reverse dictionary) and one keyed by the code ``Z`` (forward lookups
for expansion and closure).  Everything the compressor's inner loop touches
is a plain array so the numba kernels can work on it directly; the
:class:`PhraseDictionary` wrapper owns growth and offers a Python API.

The arrays travel together as one tuple, indexed by the ``D_*`` constants.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import InvariantError

SIGMA = 256

# meta fields
M_CREATED = 0  # nonterminals created since the last reset (code = SIGMA + ordinal)
M_LIVE = 1
M_FREE = 2  # head of the free-slot list, -1 if empty
M_MASK = 3  # bucket count - 1
M_HIGH = 4  # slots ever handed out
M_LIMIT = 5  # max entries allowed for the current bucket count (floor(alpha * buckets))
M_EPOCH = 6
M_PROBES = 7
M_LOOKUPS = 8
M_PEAK = 9  # peak live count
M_TOTAL = 10  # creations over the whole run, never reset
META_SIZE = 12

# tuple layout
D_META = 0
D_LEFT = 1
D_X = 2
D_Y = 3
D_CNT = 4
D_NEXT_PAIR = 5
D_NEXT_CODE = 6
D_MARK = 7
D_PAIR_HEADS = 8
D_CODE_HEADS = 9

COUNTER_MAX = np.iinfo(np.int64).max

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0xD6E8FEB86659FD93)


@njit(cache=True, inline="always")
def _avalanche(h):
    h = (h ^ (h >> np.uint64(30))) * _MIX1
    h = (h ^ (h >> np.uint64(27))) * _MIX2
    return h ^ (h >> np.uint64(31))


@njit(cache=True, inline="always")
def pair_hash(x, y):
    return _avalanche(np.uint64(x) * _GOLDEN + np.uint64(y))


@njit(cache=True, inline="always")
def code_hash(code):
    return _avalanche(np.uint64(code) ^ _SALT)


@njit(cache=True, inline="always")
def find_pair(D, x, y):
    """Slot holding the rule for digram (x, y), or -1."""
    meta = D[D_META]
    b = np.int64(pair_hash(x, y) & np.uint64(meta[M_MASK]))
    s = D[D_PAIR_HEADS][b]
    rx = D[D_X]
    ry = D[D_Y]
    nxt = D[D_NEXT_PAIR]
    probes = 1
    while s >= 0:
        if rx[s] == x and ry[s] == y:
            break
        s = nxt[s]
        probes += 1
    meta[M_LOOKUPS] += 1
    meta[M_PROBES] += probes
    return s


@njit(cache=True, inline="always")
def find_code(D, code):
    """Slot holding the rule whose left-hand side is ``code``, or -1."""
    b = np.int64(code_hash(code) & np.uint64(D[D_META][M_MASK]))
    s = D[D_CODE_HEADS][b]
    left = D[D_LEFT]
    nxt = D[D_NEXT_CODE]
    while s >= 0 and left[s] != code:
        s = nxt[s]
    return s


@njit(cache=True, inline="always")
def bump(D, slot, by):
    cnt = D[D_CNT]
    c = cnt[slot]
    if c > COUNTER_MAX - by:
        cnt[slot] = COUNTER_MAX
    else:
        cnt[slot] = c + by


@njit(cache=True, inline="always")
def insert_rule(D, x, y, count):
    """Create ``Z -> x y`` with counter ``count`` and return Z.

    The caller guarantees a free slot and head-room under the load limit.
    """
    meta = D[D_META]
    s = meta[M_FREE]
    if s >= 0:
        meta[M_FREE] = D[D_NEXT_PAIR][s]
    else:
        s = meta[M_HIGH]
        meta[M_HIGH] = s + 1
    z = SIGMA + meta[M_CREATED]
    meta[M_CREATED] += 1
    meta[M_TOTAL] += 1
    live = meta[M_LIVE] + 1
    meta[M_LIVE] = live
    if live > meta[M_PEAK]:
        meta[M_PEAK] = live
    D[D_LEFT][s] = z
    D[D_X][s] = x
    D[D_Y][s] = y
    D[D_CNT][s] = count
    mask = np.uint64(meta[M_MASK])
    b = np.int64(pair_hash(x, y) & mask)
    D[D_NEXT_PAIR][s] = D[D_PAIR_HEADS][b]
    D[D_PAIR_HEADS][b] = s
    b = np.int64(code_hash(z) & mask)
    D[D_NEXT_CODE][s] = D[D_CODE_HEADS][b]
    D[D_CODE_HEADS][b] = s
    return z


@njit(cache=True)
def remove_slot(D, s):
    meta = D[D_META]
    mask = np.uint64(meta[M_MASK])
    left = D[D_LEFT]
    heads = D[D_PAIR_HEADS]
    nxt = D[D_NEXT_PAIR]
    b = np.int64(pair_hash(D[D_X][s], D[D_Y][s]) & mask)
    if heads[b] == s:
        heads[b] = nxt[s]
    else:
        p = heads[b]
        while nxt[p] != s:
            p = nxt[p]
        nxt[p] = nxt[s]
    heads = D[D_CODE_HEADS]
    nxt = D[D_NEXT_CODE]
    b = np.int64(code_hash(left[s]) & mask)
    if heads[b] == s:
        heads[b] = nxt[s]
    else:
        p = heads[b]
        while nxt[p] != s:
            p = nxt[p]
        nxt[p] = nxt[s]
    left[s] = -1
    D[D_NEXT_PAIR][s] = meta[M_FREE]
    meta[M_FREE] = s
    meta[M_LIVE] -= 1


@njit(cache=True)
def clear(D):
    """Drop every rule and restart code numbering at SIGMA."""
    meta = D[D_META]
    D[D_PAIR_HEADS][:] = -1
    D[D_CODE_HEADS][:] = -1
    D[D_LEFT][: meta[M_HIGH]] = -1
    meta[M_HIGH] = 0
    meta[M_FREE] = -1
    meta[M_LIVE] = 0
    meta[M_CREATED] = 0


@njit(cache=True)
def live_slots(D):
    left = D[D_LEFT]
    high = D[D_META][M_HIGH]
    out = np.empty(D[D_META][M_LIVE], np.int64)
    n = 0
    for s in range(high):
        if left[s] >= 0:
            out[n] = s
            n += 1
    return out


@njit(cache=True)
def new_epoch(D):
    D[D_META][M_EPOCH] += 1
    return D[D_META][M_EPOCH]


@njit(cache=True)
def mark_below(D, slot, epoch, stack):
    """Mark every rule reachable from the children of ``slot``.

    Returns -1 on a broken closure (a child code with no live rule).
    """
    mark = D[D_MARK]
    rx = D[D_X]
    ry = D[D_Y]
    sp = 0
    stack[sp] = rx[slot]
    stack[sp + 1] = ry[slot]
    sp = 2
    while sp > 0:
        sp -= 1
        c = stack[sp]
        if c < SIGMA:
            continue
        s = find_code(D, c)
        if s < 0:
            return -1
        if mark[s] == epoch:
            continue
        mark[s] = epoch
        if sp + 2 > stack.shape[0]:
            return -2
        stack[sp] = rx[s]
        stack[sp + 1] = ry[s]
        sp += 2
    return 0


@njit(cache=True)
def closure(D, roots):
    """Codes of all rules reachable from ``roots``, roots included."""
    epoch = new_epoch(D)
    mark = D[D_MARK]
    rx = D[D_X]
    ry = D[D_Y]
    out = np.empty(D[D_META][M_LIVE], np.int64)
    n = 0
    stack = np.empty(2 * D[D_META][M_LIVE] + 2 * roots.shape[0] + 2, np.int64)
    sp = 0
    for r in roots:
        stack[sp] = r
        sp += 1
    while sp > 0:
        sp -= 1
        c = stack[sp]
        if c < SIGMA:
            continue
        s = find_code(D, c)
        if s < 0:
            return out[:0], c
        if mark[s] == epoch:
            continue
        mark[s] = epoch
        out[n] = c
        n += 1
        stack[sp] = rx[s]
        stack[sp + 1] = ry[s]
        sp += 2
    return out[:n], np.int64(-1)


@njit(cache=True)
def rehash(D):
    meta = D[D_META]
    mask = np.uint64(meta[M_MASK])
    D[D_PAIR_HEADS][:] = -1
    D[D_CODE_HEADS][:] = -1
    left = D[D_LEFT]
    for s in range(meta[M_HIGH]):
        if left[s] < 0:
            continue
        b = np.int64(pair_hash(D[D_X][s], D[D_Y][s]) & mask)
        D[D_NEXT_PAIR][s] = D[D_PAIR_HEADS][b]
        D[D_PAIR_HEADS][b] = s
        b = np.int64(code_hash(left[s]) & mask)
        D[D_NEXT_CODE][s] = D[D_CODE_HEADS][b]
        D[D_CODE_HEADS][b] = s
    # rebuild the free list in slot order so reuse stays deterministic
    free = np.int64(-1)
    for s in range(meta[M_HIGH] - 1, -1, -1):
        if left[s] < 0:
            D[D_NEXT_PAIR][s] = free
            free = s
    meta[M_FREE] = free


@njit(cache=True)
def digests(D):
    """Order-independent digests of the live rule set and of the counters."""
    left = D[D_LEFT]
    rules = np.uint64(0)
    counts = np.uint64(0)
    for s in range(D[D_META][M_HIGH]):
        z = left[s]
        if z < 0:
            continue
        rules += _avalanche(pair_hash(D[D_X][s], D[D_Y][s]) ^ code_hash(z))
        counts += _avalanche(code_hash(z) * _GOLDEN + np.uint64(D[D_CNT][s]))
    return np.int64(rules), np.int64(counts)


def new_state(capacity: int = 1024, buckets: int = 1024, alpha: float = 1.0):
    buckets = 1 << max(0, (buckets - 1).bit_length())
    meta = np.zeros(META_SIZE, np.int64)
    meta[M_FREE] = -1
    meta[M_MASK] = buckets - 1
    meta[M_LIMIT] = int(math.floor(alpha * buckets))
    pool = [np.full(capacity, -1, np.int64) for _ in range(7)]
    pool[D_MARK - 1][:] = 0
    heads = [np.full(buckets, -1, np.int64) for _ in range(2)]
    return (meta, *pool, *heads)


class PhraseDictionary:
    """Live rules ``Z -> X Y`` with frequency counters and a digram index.

    ``alpha`` is the load factor of the chained hash: the bucket array
    doubles whenever the entry count would exceed ``alpha * buckets``.
    """

    def __init__(self, alpha: float = 1.0, capacity: int = 1024):
        if not 0 < alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {alpha}")
        self.alpha = alpha
        buckets = max(16, int(capacity / alpha))
        self.D = new_state(capacity, buckets, alpha)

    # -- sizing ---------------------------------------------------------

    @property
    def capacity(self) -> int:
        return self.D[D_LEFT].shape[0]

    @property
    def bucket_count(self) -> int:
        return int(self.D[D_META][M_MASK]) + 1

    def reserve(self, extra: int) -> None:
        """Make room for ``extra`` more rules without any further resize."""
        meta = self.D[D_META]
        need = int(meta[M_LIVE]) + extra
        D = self.D
        if need > self.capacity:
            cap = max(2 * self.capacity, need)
            grown = [meta]
            for i in range(1, D_PAIR_HEADS):
                arr = np.full(cap, 0 if i == D_MARK else -1, np.int64)
                arr[: D[i].shape[0]] = D[i]
                grown.append(arr)
            D = self.D = (*grown, D[D_PAIR_HEADS], D[D_CODE_HEADS])
        if need > meta[M_LIMIT]:
            buckets = self.bucket_count
            while math.floor(self.alpha * buckets) < need:
                buckets *= 2
            meta[M_MASK] = buckets - 1
            meta[M_LIMIT] = int(math.floor(self.alpha * buckets))
            heads = [np.full(buckets, -1, np.int64) for _ in range(2)]
            self.D = (*D[:D_PAIR_HEADS], *heads)
            rehash(self.D)

    def room(self) -> int:
        meta = self.D[D_META]
        return int(min(self.capacity, meta[M_LIMIT]) - meta[M_LIVE])

    # -- the rule operations -------------------------------------------

    def lookup_or_create(self, x: int, y: int, init_counter: int = 1) -> tuple[int, bool]:
        """Return ``(z, created)`` for the digram ``(x, y)``.

        A hit bumps the rule's counter by one; a miss creates the next code
        with counter ``init_counter``.
        """
        s = find_pair(self.D, x, y)
        if s >= 0:
            bump(self.D, s, 1)
            return int(self.D[D_LEFT][s]), False
        self.reserve(1)
        return int(insert_rule(self.D, x, y, init_counter)), True

    def remove_rules(self, victims) -> None:
        victims = set(int(v) for v in victims)
        if not victims:
            return
        slots = {}
        for v in victims:
            s = find_code(self.D, v)
            if s < 0:
                raise KeyError(f"no live rule for code {v}")
            slots[v] = s
        for z, (x, y) in self.rules().items():
            if z in victims:
                continue
            for child in (x, y):
                if child in victims:
                    raise InvariantError(
                        f"closure violation: {z} -> {x} {y} still references removed {child}"
                    )
        for v in sorted(victims):
            remove_slot(self.D, slots[v])

    def live_closure(self, roots) -> set[int]:
        roots = np.array(sorted(int(r) for r in roots), np.int64)
        codes, missing = closure(self.D, roots)
        if missing >= 0:
            raise InvariantError(f"broken closure: code {missing} has no live rule")
        return set(codes.tolist())

    def on_hit(self, z: int, by: int = 1) -> None:
        s = find_code(self.D, z)
        if s < 0:
            raise KeyError(f"no live rule for code {z}")
        bump(self.D, s, by)

    def clear(self) -> None:
        clear(self.D)

    # -- inspection -------------------------------------------------------

    def __len__(self) -> int:
        return int(self.D[D_META][M_LIVE])

    def __contains__(self, code: int) -> bool:
        return code >= SIGMA and find_code(self.D, code) >= 0

    @property
    def created_count(self) -> int:
        return int(self.D[D_META][M_CREATED])

    @property
    def peak_live(self) -> int:
        return int(self.D[D_META][M_PEAK])

    def rule(self, z: int) -> tuple[int, int]:
        s = find_code(self.D, z)
        if s < 0:
            raise KeyError(z)
        return int(self.D[D_X][s]), int(self.D[D_Y][s])

    def rules(self) -> dict[int, tuple[int, int]]:
        slots = live_slots(self.D)
        left, rx, ry = self.D[D_LEFT][slots], self.D[D_X][slots], self.D[D_Y][slots]
        return {int(z): (int(x), int(y)) for z, x, y in sorted(zip(left, rx, ry))}

    def counters(self) -> dict[int, int]:
        slots = live_slots(self.D)
        return {int(z): int(c) for z, c in sorted(zip(self.D[D_LEFT][slots], self.D[D_CNT][slots]))}

    def reverse_entries(self) -> list[tuple[int, int, int]]:
        """Walk every bucket chain of the digram index: ``(z, x, y)`` triples."""
        D = self.D
        out = []
        for head in D[D_PAIR_HEADS]:
            s = int(head)
            while s >= 0:
                out.append((int(D[D_LEFT][s]), int(D[D_X][s]), int(D[D_Y][s])))
                s = int(D[D_NEXT_PAIR][s])
        return sorted(out)

    def mean_probes(self) -> float:
        meta = self.D[D_META]
        return float(meta[M_PROBES]) / max(1, int(meta[M_LOOKUPS]))

    def check(self) -> None:
        """Assert the bijection between both indexes and the closure invariant."""
        rules = self.rules()
        entries = self.reverse_entries()
        if entries != sorted((z, x, y) for z, (x, y) in rules.items()):
            raise InvariantError("reverse dictionary does not match the live rule set")
        if len({(x, y) for x, y in rules.values()}) != len(rules):
            raise InvariantError("duplicate digram in the dictionary")
        for z, (x, y) in rules.items():
            for child in (x, y):
                if child >= SIGMA and child not in rules:
                    raise InvariantError(f"closure violation: {z} -> {x} {y}")
                if child >= z:
                    raise InvariantError(f"rule {z} refers to younger code {child}")
        if len(self) > self.bucket_count * self.alpha:
            raise InvariantError("load factor exceeded")
