"""Counter-based pseudo-random streams.

The generator is the SplitMix64 finalizer applied to ``seed + (k+1)*GAMMA``
where ``k`` is a cursor that only ever increases. Because every output is a
pure function of ``(seed, cursor)``, any point of a run can be reproduced by
storing two integers, and a stream can be split into independent substreams
without coordination: substream ``i`` reseeds through the same finalizer,
which is a bijection on 64-bit words, so distinct indices give distinct
seeds.

All integer state is kept masked to 64 bits explicitly; Python ints would
otherwise grow without bound through the multiplications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer. Bijective on 64-bit words."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_draw(seed: int, cursor: int) -> int:
    """The ``cursor``-th output of the stream with the given seed."""
    return mix64((seed + ((cursor + 1) * GAMMA)) & MASK64)


@dataclass
class RandomStream:
    """Explicit-state uniform generator.

    ``next_u64`` advances the cursor by one; everything else is built on
    top of it and advances by exactly the number of raw draws it consumes
    (one per call for all current methods). Copying the dataclass freezes
    the stream at a point in time.
    """

    seed: int
    cursor: int = 0

    def __post_init__(self):
        self.seed &= MASK64
        if self.cursor < 0:
            raise ValueError("cursor must be non-negative")

    def next_u64(self) -> int:
        u = stream_draw(self.seed, self.cursor)
        self.cursor += 1
        return u

    def uniform01(self) -> float:
        """Uniform on [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_open01(self) -> float:
        """Uniform on the open interval (0, 1).

        Midpoint offset keeps both endpoints unreachable, which matters for
        parameters that must be strictly positive or strictly below one.
        """
        return ((self.next_u64() >> 11) + 0.5) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        if not lo < hi:
            raise ValueError(f"empty interval [{lo}, {hi})")
        return lo + (hi - lo) * self.uniform01()

    def randbelow(self, m: int) -> int:
        """Uniform integer in [0, m) by the fixed-point multiply method.

        One draw per call, no rejection loop. The induced bias is at most
        m / 2**64, which for the pair counts used here (m < 2**32) is far
        below anything observable; in exchange the draw count per simulated
        step is constant, which the counter scheme relies on.
        """
        if not 0 < m <= (1 << 32):
            raise ValueError(f"modulus {m} out of range")
        return (self.next_u64() * m) >> 64

    def substream(self, index: int) -> "RandomStream":
        """Independent stream derived from this one's seed; cursor starts at 0.

        Does not consume a draw from the parent.
        """
        if index < 0:
            raise ValueError("substream index must be non-negative")
        return RandomStream(mix64((self.seed + mix64(index + 1)) & MASK64))


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def pair_from_index(k: int, n: int) -> tuple[int, int]:
    """Decode ``k`` in [0, n(n-1)/2) to the k-th unordered pair (i, j), i < j.

    Pairs are ordered lexicographically with 1-based agent labels:
    (1,2), (1,3), ..., (1,n), (2,3), ... Closed form via the triangular
    root of the reversed index, so no loops for large n.
    """
    m = pair_count(n)
    if not 0 <= k < m:
        raise ValueError(f"pair index {k} out of range for n={n}")
    kp = m - 1 - k
    b = (math.isqrt(8 * kp + 1) - 1) // 2 + 1
    i = n - b
    j = i + 1 + (b * (b + 1) // 2 - 1 - kp)
    return i, j


def index_of_pair(i: int, j: int, n: int) -> int:
    """Inverse of :func:`pair_from_index`."""
    if not 1 <= i < j <= n:
        raise ValueError(f"({i}, {j}) is not an ordered pair of distinct labels in 1..{n}")
    return (i - 1) * n - i * (i - 1) // 2 + (j - i - 1)
