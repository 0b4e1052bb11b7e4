"""Deterministic counter-based random numbers.

Every random choice in this package flows through :class:`CounterRng` so that
a given seed produces the same stream on every platform and numpy version.
Output ``i`` of a stream is a pure function of ``(key, i)``:

    out_i = mix64((key + (i + 1) * GAMMA) mod 2**64)

where ``GAMMA = 0x9E3779B97F4A7C15`` and ``mix64`` is the SplitMix64
finalizer (all arithmetic modulo 2**64):

    z ^= z >> 30;  z *= 0xBF58476D1FD49E4E
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

Independent streams for parallel work are derived by re-keying
(:meth:`CounterRng.derive`), never by splitting counter ranges.  Fixed
output vectors are pinned in ``tests/test_rng.py``.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
# Distinct odd constant used only for deriving child stream keys.
DERIVE_GAMMA = 0xBB67AE8584CAA73B

_U = np.uint64


def mix64(value: int) -> int:
    """SplitMix64 finalizer on a plain Python integer (reference path)."""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1FD49E4E) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 finalizer; uint64 in, uint64 out."""
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1FD49E4E)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


class CounterRng:
    """Counter-mode SplitMix64 stream.

    The object is a thin (key, counter) pair; all draws advance the counter
    by a count that depends only on the requested sizes, so interleaving of
    value-dependent logic can never perturb the stream.
    """

    __slots__ = ("key", "counter")

    def __init__(self, seed: int, _key: int | None = None):
        self.key = mix64(seed) if _key is None else (_key & MASK64)
        self.counter = 0

    def derive(self, stream_id: int) -> "CounterRng":
        """Child stream with an independent key; does not advance self."""
        child_key = mix64((self.key + (stream_id + 1) * DERIVE_GAMMA) & MASK64)
        return CounterRng(0, _key=child_key)

    def _raw(self, n: int) -> np.ndarray:
        counters = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return _mix64_array(_U(self.key) + counters * _U(GAMMA))

    def uint64(self, n: int) -> np.ndarray:
        return self._raw(int(n))

    def random(self, size: int | tuple[int, ...] | None = None) -> float | np.ndarray:
        """Uniform float64 in [0, 1) using the top 53 bits."""
        if size is None:
            return float(self.uint64(1)[0] >> _U(11)) * 2.0 ** -53
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        out = (self.uint64(n) >> _U(11)).astype(np.float64) * 2.0 ** -53
        return out.reshape(shape)

    def integers(self, bound: int, size: int | tuple[int, ...] | None = None):
        """Uniform integers in [0, bound) by 64-bit modulo.

        Modulo bias is < bound / 2**64, irrelevant for the bounds used here.
        """
        if bound <= 0:
            raise ValueError("bound must be positive")
        if size is None:
            return int(self.uint64(1)[0] % _U(bound))
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        return (self.uint64(n) % _U(bound)).astype(np.int64).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic shuffle of range(n) by sorting random 64-bit keys."""
        return np.argsort(self.uint64(n), kind="stable")

    def normal(self, size: int | tuple[int, ...]) -> np.ndarray:
        """Standard normals via Box-Muller; consumes 2*ceil(n/2) counters."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        half = (n + 1) // 2
        u1 = self.random(half)
        u2 = self.random(half)
        radius = np.sqrt(-2.0 * np.log1p(-u1))  # u1 < 1 so log1p(-u1) is finite
        angle = (2.0 * math.pi) * u2
        out = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]
        return out.reshape(shape)

    def poisson(self, lam: float, size: int) -> np.ndarray:
        """Poisson counts by CDF inversion; one uniform per variate.

        Exact for lam up to ~700 (where exp(-lam) underflows); larger rates
        are out of scope and rejected.
        """
        if lam < 0.0 or not math.isfinite(lam):
            raise ValueError(f"Poisson rate must be finite and >= 0, got {lam}")
        if lam > 700.0:
            raise ValueError(f"Poisson rate {lam} too large for exact inversion")
        u = self.random(size)
        counts = np.zeros(size, dtype=np.int64)
        if lam == 0.0:
            return counts
        prob = np.full(size, math.exp(-lam))
        cum = prob.copy()
        # u < 1 guarantees termination; cap guards fp stagnation.
        cap = int(lam + 40.0 * math.sqrt(lam) + 60.0)
        for _ in range(cap):
            active = u > cum
            if not active.any():
                break
            counts[active] += 1
            prob[active] *= lam / counts[active]
            cum[active] += prob[active]
        return counts
