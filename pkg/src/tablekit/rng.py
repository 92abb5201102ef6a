"""SplitMix64: a tiny portable PRNG so fixtures reproduce bit-exactly anywhere.

Algorithm (Steele, Lea & Flood 2014), all arithmetic mod 2**64::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Derived draws: ``random()`` is ``(next >> 11) * 2**-53``; ``randint(lo, hi)``
is ``lo + next % (hi - lo + 1)`` (inclusive; modulo bias is accepted);
``uniform(a, b)`` is ``a + (b - a) * random()``.
"""
from __future__ import annotations

ALGORITHM = "splitmix64"
_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        return lo + self.next_u64() % (hi - lo + 1)

    def choice(self, seq):
        return seq[self.randint(0, len(seq) - 1)]
