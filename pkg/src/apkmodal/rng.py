"""Deterministic RNG for split assignment and training shuffles.

splitmix64 is used instead of Python's random module so that shuffle
results can be reproduced exactly from the documented algorithm in any
language: state advances by the golden-gamma constant and each output is
the finalizer mix of the new state.
"""

import hashlib

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    """splitmix64 stream over a 64-bit state."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound) via modulo reduction.

        Modulo bias is negligible for the corpus sizes involved and keeps
        the reduction trivially portable.
        """
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound


def derive_seed(seed: int, tag: str) -> int:
    """Stable per-tag substream seed: XOR with the first 8 bytes of sha256(tag)."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return (seed ^ int.from_bytes(digest[:8], "little")) & _MASK64


def fisher_yates(items: list, rng: SplitMix64) -> None:
    """In-place Fisher-Yates shuffle drawing from the given stream."""
    for i in range(len(items) - 1, 0, -1):
        j = rng.next_below(i + 1)
        items[i], items[j] = items[j], items[i]
