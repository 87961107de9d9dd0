"""Brute-force reference decoder, independent of the streaming kernels.

It reads events with the pure-Python :class:`~grcomp.codec.EventReader`,
builds each segment's parse tree as nested tuples, keeps every rule it has
ever seen (no counters, no pruning) and concatenates the yields.  Codes are
never reused within a numbering epoch, so keeping pruned rules around does
not change what any leaf means.  Meant for small inputs only.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..codec import (
    END_OF_STREAM,
    HEADER_SIZE,
    INTERNAL,
    SEGMENT_END,
    ContainerHeader,
    EventReader,
    label_width,
)
from ..dictionary import SIGMA
from ..errors import CorruptStreamError, MirrorDivergenceError
from ..strategies import Mode


@dataclass(frozen=True)
class SegmentAccount:
    """Bit bookkeeping for one encoded tree."""

    internals: int  # n: internal nodes, virtual node excluded
    leaves: int
    structure_bits: int  # one flag bit per leaf and internal node, plus the virtual node
    label_bits: int


@dataclass
class OracleResult:
    text: bytes
    segments: list[SegmentAccount]
    trees: list  # per segment, the root as nested tuples (code, left, right) or int
    payload_bits: int


def _yield(node, rules: dict[int, tuple[int, int]], out: bytearray) -> None:
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, tuple):
            _, left, right = n
            stack.append(right)
            stack.append(left)
        elif n < SIGMA:
            out.append(n)
        else:
            try:
                x, y = rules[n]
            except KeyError:
                raise CorruptStreamError(f"leaf {n} refers to an unknown rule") from None
            stack.append(y)
            stack.append(x)


def run_oracle(container: bytes) -> OracleResult:
    header = ContainerHeader.unpack(container)
    payload = container[HEADER_SIZE:]
    reader = EventReader(payload)
    rules: dict[int, tuple[int, int]] = {}
    digrams: dict[tuple[int, int], int] = {}
    created = 0
    out = bytearray()
    accounts: list[SegmentAccount] = []
    trees = []
    stack: list = []
    leaves = internals = label_bits = 0

    def code_of(node) -> int:
        return node[0] if isinstance(node, tuple) else node

    while True:
        ev = reader.read_event(created)
        if ev is END_OF_STREAM:
            break
        if ev is SEGMENT_END:
            root = stack.pop()
            trees.append(root)
            _yield(root, rules, out)
            accounts.append(SegmentAccount(internals, leaves, leaves + internals + 1, label_bits))
            leaves = internals = label_bits = 0
            if header.mode == Mode.BLOCK:
                rules.clear()
                digrams.clear()
                created = 0
            continue
        if ev is INTERNAL:
            right = stack.pop()
            left = stack.pop()
            pair = (code_of(left), code_of(right))
            z = SIGMA + created
            created += 1
            if pair in digrams and digrams[pair] in rules and header.mode == Mode.PLAIN:
                # in plain mode nothing is ever pruned, so a repeated digram
                # means the writer missed a dictionary hit
                raise MirrorDivergenceError(f"digram {pair} encoded twice")
            rules[z] = pair
            digrams[pair] = z
            stack.append((z, left, right))
            internals += 1
            continue
        label_bits += label_width(created)
        leaves += 1
        stack.append(ev.code)
    return OracleResult(bytes(out), accounts, trees, 8 * len(payload))


def naive_grammar_oracle(container: bytes) -> bytes:
    """Decode ``container`` by materialising every parse tree."""
    return run_oracle(container).text


def segment_accounts(container: bytes) -> list[SegmentAccount]:
    return run_oracle(container).segments
