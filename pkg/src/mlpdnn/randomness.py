"""Keyed, order-independent randomness for the multilevel Picard scheme.

Every draw is a pure function of ``(seed, theta)`` where ``theta`` is a
nonempty tuple of signed integers.  The tuple is length-prefixed and hashed
with a keyed BLAKE2b together with a block counter, so no generator state is
shared between nodes and the evaluator and the network compiler see
bit-identical draws whatever order they visit nodes in.

Each node owns one uniform (time fraction) and one standard Gaussian vector
(Brownian increment).  Brownian paths are never materialized: a node's
increment over ``[s, t]`` is ``sqrt(t - s)`` times its cached Gaussian, which
is consistent because every node is only ever queried with one interval.
"""

from __future__ import annotations

import hashlib
import math
import struct
from typing import Sequence

import numpy as np

__all__ = [
    "ThetaIndex",
    "KeyedStream",
    "derive_stream",
    "RandomRealization",
    "brownian_increment",
    "sample_time_fraction",
    "time_fraction_from_uniform",
    "time_point",
    "rho_density",
    "arcsine_cdf",
]

ThetaIndex = tuple[int, ...]

_BLOCK_WORDS = 8
_TWO_POW_53 = float(2**53)


def _encode_theta(theta: Sequence[int]) -> bytes:
    theta = tuple(int(k) for k in theta)
    if not theta:
        raise ValueError("theta must be a nonempty integer sequence")
    return struct.pack(f"<I{len(theta)}q", len(theta), *theta)


def _seed_key(seed: int) -> bytes:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed.to_bytes(8, "little")


class KeyedStream:
    """Counter-based stream of open-interval uniforms for one ``(seed, theta)``."""

    __slots__ = ("_key", "_prefix")

    def __init__(self, seed: int, theta: Sequence[int]):
        self._key = _seed_key(seed)
        self._prefix = _encode_theta(theta)

    def block(self, counter: int) -> np.ndarray:
        digest = hashlib.blake2b(
            self._prefix + counter.to_bytes(8, "little"), key=self._key, digest_size=64
        ).digest()
        return np.frombuffer(digest, dtype="<u8")

    def uniforms(self, k: int) -> np.ndarray:
        """First ``k`` uniforms of the stream, each in the open interval (0, 1)."""
        n_blocks = -(-k // _BLOCK_WORDS)
        words = np.concatenate([self.block(j) for j in range(n_blocks)])[:k]
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO_POW_53

    def draws(self, d: int) -> tuple[float, np.ndarray]:
        """The node's time uniform and standard Gaussian ``d``-vector.

        Uniform 0 is the time uniform; the Gaussian comes from Box-Muller on
        uniforms ``1 .. 2*ceil(d/2)``.
        """
        u = self.uniforms(1 + 2 * (-(-d // 2)))
        u1, u2 = u[1::2], u[2::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * len(u1))
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return float(u[0]), z[:d]


def derive_stream(seed: int, theta: Sequence[int]) -> KeyedStream:
    return KeyedStream(seed, theta)


class RandomRealization:
    """A fixed sample point: all per-node draws for one seed, memoized.

    ``cache=False`` recomputes draws on every query, which gives identical
    values and bounded memory for very large recursions.
    """

    def __init__(self, seed: int, d: int, cache: bool = True):
        _seed_key(seed)
        self.seed = int(seed)
        self.d = int(d)
        self.cache = cache
        self._memo: dict[ThetaIndex, tuple[float, np.ndarray]] = {}

    def draws(self, theta: Sequence[int]) -> tuple[float, np.ndarray]:
        theta = tuple(theta)
        hit = self._memo.get(theta)
        if hit is not None:
            return hit
        u, xi = KeyedStream(self.seed, theta).draws(self.d)
        xi.flags.writeable = False
        if self.cache:
            self._memo[theta] = (u, xi)
        return u, xi

    def gaussian(self, theta: Sequence[int]) -> np.ndarray:
        return self.draws(theta)[1]

    def uniform(self, theta: Sequence[int]) -> float:
        return self.draws(theta)[0]

    def increment(self, theta: Sequence[int], s: float, t: float) -> np.ndarray:
        if not s < t:
            raise ValueError(f"increment needs s < t, got s={s}, t={t}")
        return math.sqrt(t - s) * self.gaussian(theta)

    def time_fraction(self, theta: Sequence[int]) -> float:
        return time_fraction_from_uniform(self.uniform(theta))

    def __len__(self) -> int:
        return len(self._memo)


def brownian_increment(seed: int, theta: Sequence[int], d: int, s: float, t: float) -> np.ndarray:
    """``W_t - W_s`` for the Brownian motion of node ``theta``."""
    if not s < t:
        raise ValueError(f"increment needs s < t, got s={s}, t={t}")
    return math.sqrt(t - s) * KeyedStream(seed, theta).draws(d)[1]


def time_fraction_from_uniform(u: float) -> float:
    """Inverse of the arcsine CDF ``(2/pi) arcsin(sqrt(b))``."""
    return math.sin(0.5 * math.pi * u) ** 2


def sample_time_fraction(seed: int, theta: Sequence[int]) -> float:
    return time_fraction_from_uniform(KeyedStream(seed, theta).uniforms(1)[0])


def arcsine_cdf(b):
    return 2.0 / np.pi * np.arcsin(np.sqrt(b))


def time_point(t: float, T: float, fraction: float) -> float:
    """Shift a fraction in (0, 1) to the time ``t + (T - t) * fraction``."""
    if not t < T:
        raise ValueError(f"need t < T, got t={t}, T={T}")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    return t + (T - t) * fraction


def rho_density(t: float, s: float, T: float) -> float:
    """Density of ``time_point(t, T, fraction)`` at ``s``; B(1/2, 1/2) = pi."""
    if not t < s < T:
        raise ValueError(f"need t < s < T, got t={t}, s={s}, T={T}")
    return 1.0 / (math.pi * math.sqrt((T - s) * (s - t)))
