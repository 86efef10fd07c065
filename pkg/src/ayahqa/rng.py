"""Portable seeded randomness for sampling and shuffling.

Everything that draws random numbers in this package goes through
SplitMix64, a public 64-bit generator with a three-line state transition
(additive constant 0x9E3779B97F4A7C15, two xor-multiply mixes). It is
chosen over ``random.Random`` because its output is fully specified by the
algorithm: the same seed produces the same bytes on every platform and
Python version, which the reproducibility guarantees of the pair builder
and retriever depend on.

Streams are derived, not shared: ``stream(seed, label, ...)`` hashes the
seed together with the labels (SHA-256) into a fresh starting state, so
each question gets its own independent sequence and adding or removing one
question never perturbs another question's draws.
"""

from __future__ import annotations

import hashlib

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """Deterministic 64-bit generator; state advances by a fixed increment."""

    def __init__(self, state: int):
        self._state = state & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (2**64 // n) * n
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle, descending index order."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, population: list, k: int) -> list:
        """First k elements of a partial Fisher-Yates pass over a copy."""
        if k > len(population):
            raise ValueError("sample larger than population")
        pool = list(population)
        for i in range(k):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def stream(seed: int, *labels: str) -> SplitMix64:
    """Independent generator for (seed, labels).

    The starting state is the first 8 bytes of
    SHA-256(seed as 8 big-endian bytes || 0x1F || label1 || 0x1F || label2 ...),
    so distinct label tuples give unrelated sequences.
    """
    h = hashlib.sha256()
    h.update((seed & _MASK64).to_bytes(8, "big"))
    for label in labels:
        h.update(b"\x1f")
        h.update(label.encode("utf-8"))
    state = int.from_bytes(h.digest()[:8], "big")
    return SplitMix64(state)
