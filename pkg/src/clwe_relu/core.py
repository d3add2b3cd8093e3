"""Scalar primitives: mod-1 reduction, the triangle wave, and seedable streams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Inputs beyond this magnitude lose all fractional bits in double precision.
MOD1_MAX_ABS = 2.0**50


def _as_finite(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _ret(arr, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def mod1(x):
    """Reduce ``x`` modulo 1 onto the representatives ``[-1/2, 1/2)``.

    Computed as ``x - rint(x)``; a remainder of exactly ``+1/2`` (ties at
    half-integers) is mapped to ``-1/2``. Accepts scalars or arrays.
    """
    arr = _as_finite(x)
    if np.any(np.abs(arr) > MOD1_MAX_ABS):
        raise ValueError("mod1 input exceeds 2**50 in magnitude")
    r = arr - np.rint(arr)
    r = np.where(r >= 0.5, r - 1.0, r)
    return _ret(r, x)


def _phi_reduced(r):
    # r in [-1/2, 1/2): x - k on the middle quarter band, reflected outside.
    return np.where(r > 0.25, 0.5 - r, np.where(r < -0.25, -0.5 - r, r))


def phi(x):
    """Triangle wave with period 1, slope +-1 and range ``[-1/4, 1/4]``.

    ``phi(x) = x - k`` on ``[k - 1/4, k + 1/4]`` and ``1/2 - (x - k)`` on
    ``[k + 1/4, k + 3/4]``. Evaluated branch-wise on ``mod1(x)``.
    """
    r = np.asarray(mod1(x), dtype=np.float64)
    return _ret(_phi_reduced(r), x)


def phi_floor(x):
    """The closed form ``|x - 3/4 - floor(x - 1/4)| - 1/4``; used as a cross-check."""
    arr = _as_finite(x)
    out = np.abs(arr - 0.75 - np.floor(arr - 0.25)) - 0.25
    return _ret(out, x)


@dataclass(frozen=True)
class RandomStream:
    """A value-like handle on a counter-based (Philox) random sequence.

    Two streams with equal ``(seed, stream_id, path)`` produce identical
    draws on every platform. ``spawn`` derives disjoint child streams.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        for v in (self.seed, self.stream_id, *self.path):
            if not 0 <= int(v) < 2**64:
                raise ValueError("stream components must be 64-bit unsigned integers")

    def spawn(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(self.stream_id), *map(int, self.path))
        )
        key = ss.generate_state(2, dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def gaussian(stream: RandomStream, n: int) -> np.ndarray:
    """``n`` standard normal draws, deterministic per stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return stream.generator().standard_normal(int(n))


def random_direction(d: int, stream: RandomStream) -> np.ndarray:
    """A uniformly random unit vector in R^d."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    g = stream.generator()
    while True:
        v = g.standard_normal(int(d))
        norm = np.linalg.norm(v)
        if norm > 0:
            break
    v = v / norm
    # one refinement step pulls the norm to within an ulp or two of 1
    return v / np.linalg.norm(v)
