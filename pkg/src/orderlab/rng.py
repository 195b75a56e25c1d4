"""Deterministic, platform-independent PRNG used for all sampling decisions.

The generator is splitmix64 (Steele, Lea & Flood 2014): a 64-bit counter
advanced by the odd constant 0x9E3779B97F4A7C15 (the golden ratio), with a
two-round xor-shift-multiply finalizer.  It is tiny, has full 2^64 period,
and -- unlike Python's built-in ``hash`` or ``random`` -- produces the same
stream on every platform and interpreter invocation, which is what makes
variant sampling and A/B assignment byte-reproducible across runs.

Per-sentence streams are derived from ``(seed, key)`` where ``key`` is a
string identifier hashed with FNV-1a (also fixed, also platform-stable), so
parallel or out-of-order generation cannot change any sentence's sample.
"""

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(text: str) -> int:
    """FNV-1a hash of ``text`` (UTF-8), reduced to 64 bits."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


class SplitMix64:
    """splitmix64 stream seeded from an integer seed and an optional string key."""

    def __init__(self, seed: int, key: str = ""):
        state = seed & MASK64
        if key:
            state ^= fnv1a64(key)
        self._state = state

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return (z ^ (z >> 31)) & MASK64

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) without modulo bias (rejection)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = MASK64 - (MASK64 % bound)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % bound

    def choice_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices sampled uniformly from range(n), in sorted order."""
        if k > n:
            raise ValueError("cannot sample %d from %d" % (k, n))
        # partial Fisher-Yates on an index array
        idx = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return sorted(idx[:k])
