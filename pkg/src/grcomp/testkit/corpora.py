"""Synthetic corpora: random, unary, periodic and noisy-repetitive texts."""
from __future__ import annotations

from typing import Iterator

import numpy as np

DNA = np.frombuffer(b"ACGT", np.uint8)


def generate(seed: int, base_size: int, copies: int, mutation_rate: float) -> Iterator[bytes]:
    """Yield ``copies`` independently mutated copies of a random DNA base.

    Each position of each copy is substituted with probability
    ``mutation_rate`` by one of the three other letters.
    """
    if not 0 <= mutation_rate <= 1:
        raise ValueError(f"mutation rate must be in [0, 1], got {mutation_rate}")
    if base_size < 0 or copies < 0:
        raise ValueError("base size and copies must be non-negative")
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 4, base_size, dtype=np.uint8)
    for _ in range(copies):
        copy = base.copy()
        if mutation_rate > 0:
            hit = np.flatnonzero(rng.random(base_size) < mutation_rate)
            shift = rng.integers(1, 4, hit.size, dtype=np.uint8)
            copy[hit] = (copy[hit] + shift) & 3
        yield DNA[copy].tobytes()


def noisy_repetitive(size: int, mutation_rate: float, seed: int = 0, base_size: int = 1 << 16) -> bytes:
    copies = -(-size // base_size) if size else 0
    return b"".join(generate(seed, base_size, copies, mutation_rate))[:size]


def random_bytes(size: int, seed: int = 0) -> bytes:
    return np.random.default_rng(seed).integers(0, 256, size, dtype=np.uint8).tobytes()


def unary(size: int, symbol: int = ord("a")) -> bytes:
    return bytes([symbol]) * size


def periodic(size: int, period: int, seed: int = 0) -> bytes:
    unit = random_bytes(period, seed)
    return (unit * (size // period + 1))[:size]


def matrix(size: int) -> dict[str, bytes]:
    """Named corpora of one size covering every corpus family."""
    out = {
        "random": random_bytes(size, 1),
        "unary": unary(size),
    }
    for p in (1, 2, 3, 7, 16, 64):
        out[f"periodic{p}"] = periodic(size, p, seed=p)
    for rate in (0.01, 0.05, 0.09):
        out[f"noisy{rate}"] = noisy_repetitive(size, rate, seed=int(rate * 100), base_size=max(1, size // 16))
    return out
