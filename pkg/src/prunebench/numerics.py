"""Seeded randomness, small vector helpers and sphere/ball samplers.

All randomness flows through :class:`Rng`, a thin wrapper over numpy's
``Generator`` driven by the PCG64 bit generator (PCG XSL RR 128/64). Streams
are therefore identical across platforms for a given seed and numpy major
version. Gaussian variates use numpy's ziggurat ``standard_normal``.

Everything is float64.
"""

from __future__ import annotations

import math

import numpy as np

from prunebench.errors import DimensionError, DomainError

CAP_RTOL = 1e-12


class Rng:
    """Seeded random stream.

    A single instance must not be shared by concurrent callers; use
    :meth:`child` to derive independent streams keyed by integers.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, *keys: int) -> "Rng":
        """Independent stream determined by ``(seed, *keys)`` only."""
        ss = np.random.SeedSequence([self.seed, *(int(k) for k in keys)])
        return Rng(int(ss.generate_state(1, dtype=np.uint64)[0]))

    def normal(self, size=None) -> np.ndarray:
        return self.gen.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        """Integers in ``[low, high)``."""
        return self.gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self.gen.choice(n, size=size, replace=replace)


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("vector contains NaN or inf")
    return arr


def dot(u, v) -> float:
    u = _as_vector(u)
    v = _as_vector(v)
    if u.shape != v.shape:
        raise DimensionError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    return float(np.dot(u, v))


def norm2(v) -> float:
    return math.sqrt(dot(v, v))


def sample_uniform_sphere(dim: int, radius: float, rng: Rng, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on the sphere of the given radius in ``dim`` dimensions.

    Normalized Gaussian construction. With ``size`` set, returns a
    ``(size, dim)`` array of independent draws.
    """
    if dim < 1:
        raise DimensionError("sphere dimension must be at least 1")
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    shape = (dim,) if size is None else (size, dim)
    g = rng.normal(shape)
    norms = np.linalg.norm(g, axis=-1, keepdims=True)
    # a zero Gaussian vector has probability 0; redraw rather than divide by it
    while np.any(norms == 0):
        bad = (norms == 0).reshape(-1)
        if size is None:
            g = rng.normal(shape)
        else:
            g[bad] = rng.normal((int(bad.sum()), dim))
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
    return radius * (g / norms)


def sample_concentrated_ball(center, spread: float, radius_cap: float, rng: Rng,
                             size: int | None = None) -> np.ndarray:
    """``center + u`` with ``u`` uniform in the ball of radius ``spread``.

    Requires ``norm2(center) + spread <= radius_cap`` so every draw lies in
    the capped ball (up to ``CAP_RTOL`` relative rounding).
    """
    center = _as_vector(center)
    if spread < 0:
        raise DomainError(f"spread must be non-negative, got {spread}")
    # one part in 1e12 of slack absorbs rounding in callers' own arithmetic
    if norm2(center) + spread > radius_cap * (1 + CAP_RTOL):
        raise DomainError(
            f"|center| + spread = {norm2(center) + spread} exceeds radius cap {radius_cap}")
    dim = center.shape[0]
    if spread == 0:
        return center.copy() if size is None else np.tile(center, (size, 1))
    direction = sample_uniform_sphere(dim, 1.0, rng, size)
    r = rng.uniform(size=None if size is None else (size, 1)) ** (1.0 / dim)
    return center + spread * r * direction
