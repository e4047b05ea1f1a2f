"""Deterministic random generation: uniform points on S^d and Gaussian noise.

Every random draw in the package flows through a SeedPath, a (master seed,
label path) pair that derives an independent substream. Substreams are pure
functions of the path, so experiment cells can run in any order, on any
number of workers, and still reproduce bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

# Well-known purpose tags used as the last path label.
TAG_POINTS = 1
TAG_NOISE = 2
TAG_AXIS = 3
TAG_MC = 4


@dataclass(frozen=True)
class SeedPath:
    """A derived random stream identified by (master_seed, path of labels)."""

    master_seed: int
    path: tuple[int, ...] = ()

    def child(self, *labels: int) -> "SeedPath":
        return SeedPath(self.master_seed, self.path + tuple(int(x) for x in labels))

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.default_rng(ss)


@dataclass(frozen=True)
class SpherePoints:
    """n points on the unit sphere S^d embedded in R^(d+1), one per row."""

    d: int
    coordinates: np.ndarray  # shape (n, d+1), unit rows

    def __post_init__(self):
        if self.coordinates.ndim != 2 or self.coordinates.shape[1] != self.d + 1:
            raise UsageError(
                f"coordinates shape {self.coordinates.shape} does not match d={self.d}"
            )

    @property
    def n(self) -> int:
        return self.coordinates.shape[0]

    def gram(self, other: "SpherePoints | None" = None) -> np.ndarray:
        """Pairwise inner products, clipped into [-1, 1]."""
        other = self if other is None else other
        if other.d != self.d:
            raise UsageError(f"dimension mismatch: {self.d} vs {other.d}")
        g = self.coordinates @ other.coordinates.T
        return np.clip(g, -1.0, 1.0)


def sample_sphere(d: int, n: int, seed: SeedPath) -> SpherePoints:
    """Draw n i.i.d. uniform points on S^d (Gaussian direction method)."""
    if d < 1:
        raise UsageError(f"sphere dimension must be >= 1, got {d}")
    if n < 1:
        raise UsageError(f"point count must be >= 1, got {n}")
    g = seed.rng().standard_normal((n, d + 1))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    return SpherePoints(d=d, coordinates=g / norms)


def sample_noise(n: int, sigma2: float, seed: SeedPath) -> np.ndarray:
    """n i.i.d. N(0, sigma2) draws; exact zeros when sigma2 == 0."""
    if n < 1:
        raise UsageError(f"noise length must be >= 1, got {n}")
    if sigma2 < 0:
        raise UsageError(f"noise variance must be >= 0, got {sigma2}")
    if sigma2 == 0:
        return np.zeros(n)
    return seed.rng().normal(0.0, math.sqrt(sigma2), n)
