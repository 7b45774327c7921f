"""Seeded sampling on a SplitMix64 stream.

The generator is a fixed, documented algorithm so that (seed, call order)
fully determines every sample, independent of platform or library version:
the 64-bit state advances by the golden-ratio increment and each output is
the SplitMix64 finalizer of the advanced state. Uniform variates take the
top 53 bits of an output word; normal variates apply the Box-Muller
transform to consecutive uniform pairs. Wall-clock time is never consulted.

Blocks of variates are produced by vectorizing the counter sequence
``state + k * GOLDEN`` for k = 1..n, which yields the exact same stream as
n successive scalar calls.
"""

from __future__ import annotations

import math

import numpy as np

from .matrix import Matrix

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit word (scalar, exact)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *salts: int) -> int:
    """Hash-chain a base seed with integer salts into an independent seed."""
    s = int(seed) & MASK64
    for salt in salts:
        s = mix64(s ^ mix64((int(salt) + _GOLDEN) & MASK64))
    return s


class Rng:
    """SplitMix64 stream with uniform, normal and integer sampling."""

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & MASK64
        self._state = self.seed

    def spawn(self, salt: int) -> "Rng":
        """Independent child stream; derived from the seed, not the state."""
        return Rng(derive_seed(self.seed, salt))

    def _next_block(self, n: int) -> np.ndarray:
        # Counters state + k*GOLDEN for k=1..n, mixed elementwise.
        # uint64 array arithmetic wraps mod 2**64; scalar state stays a
        # Python int to avoid numpy scalar-overflow warnings.
        counters = np.uint64(self._state) + np.uint64(_GOLDEN) * np.arange(
            1, n + 1, dtype=np.uint64
        )
        self._state = (self._state + _GOLDEN * n) & MASK64
        z = counters
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def next_uint64(self) -> int:
        self._state = (self._state + _GOLDEN) & MASK64
        return mix64(self._state)

    def uniforms(self, n: int) -> np.ndarray:
        """n i.i.d. uniforms on [0, 1) with 53-bit resolution."""
        return (self._next_block(n) >> np.uint64(11)).astype(np.float64) * _INV53

    def uniform_range(self, n: int, lo: float, hi: float) -> np.ndarray:
        return lo + (hi - lo) * self.uniforms(n)

    def normals(self, n: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """n i.i.d. N(mean, std^2) draws via Box-Muller over uniform pairs."""
        if std < 0:
            raise ValueError(f"std must be non-negative, got {std}")
        if n == 0:
            return np.empty(0)
        npairs = (n + 1) // 2
        u = self.uniforms(2 * npairs)
        u1, u2 = u[:npairs], u[npairs:]
        r = np.sqrt(-2.0 * np.log(1.0 - u1))  # 1-u1 in (0,1], log is finite
        theta = (2.0 * math.pi) * u2
        z = np.empty(2 * npairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return mean + std * z[:n]

    def gaussian_matrix(self, rows: int, cols: int, mean: float, std: float) -> Matrix:
        return Matrix.wrap(self.normals(rows * cols, mean, std).reshape(rows, cols))

    def uniform_matrix(self, rows: int, cols: int, lo: float, hi: float) -> Matrix:
        return Matrix.wrap(self.uniform_range(rows * cols, lo, hi).reshape(rows, cols))

    def randint_below(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection on the raw 64-bit stream."""
        if n < 1:
            raise ValueError(f"randint_below needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_uint64()
            if x < limit:
                return x % n

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n): argsort of one uniform block."""
        return np.argsort(self.uniforms(n), kind="mergesort")


def sample_gaussian(rng: Rng, rows: int, cols: int, mean: float, std: float) -> Matrix:
    """Matrix of i.i.d. N(mean, std^2) entries; deterministic in (seed, call order)."""
    return rng.gaussian_matrix(rows, cols, mean, std)
