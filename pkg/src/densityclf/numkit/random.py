"""Seeded random source.

Uniform variates come from numpy's PCG64 bit generator; normals are produced
from those uniforms with the Box-Muller transform so the normal stream depends
only on the seed and the uniform stream.
"""

import math

import numpy as np


class Rng:
    """Deterministic random stream. Not shareable across threads; use :meth:`spawn`."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f"Rng(seed={self.seed})"

    def uniform(self, size=None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def standard_normal(self, shape) -> np.ndarray:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = math.prod(shape)
        pairs = (n + 1) // 2
        u1 = 1.0 - self._gen.random(pairs)  # (0, 1], keeps log finite
        u2 = self._gen.random(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n].reshape(shape)

    def normal(self, loc, scale, shape) -> np.ndarray:
        return loc + scale * self.standard_normal(shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def spawn(self, n: int) -> list["Rng"]:
        """``n`` independent child streams derived from this stream's seed."""
        children = np.random.SeedSequence(self.seed).spawn(n)
        return [Rng(int(c.generate_state(1, np.uint64)[0])) for c in children]


def sample_standard_normal(rng: Rng, d: int) -> np.ndarray:
    if d < 1:
        raise ValueError("d must be >= 1")
    return rng.standard_normal(d)
