"""Fibonacci sphere grid and uniform sphere sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

FULL_SPHERE = "full"
AS_WRITTEN = "as_written"
VARIANTS = (FULL_SPHERE, AS_WRITTEN)


@dataclass(frozen=True)
class SphereGrid:
    points: np.ndarray
    variant: str = FULL_SPHERE

    @property
    def N(self) -> int:
        return self.points.shape[0]


def fibonacci_grid(N: int, variant: str = FULL_SPHERE) -> SphereGrid:
    """Golden-angle lattice of ``N`` unit vectors, y running from +1 downward.

    ``"as_written"`` uses ``y_i = 1 - (i/(N-1))**2``, which only covers the
    upper hemisphere; ``"full"`` uses ``y_i = 1 - 2 i/(N-1)``.
    """
    if int(N) != N or N < 2:
        raise ValueError(f"grid size must be an integer >= 2, got {N}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown grid variant {variant!r}")
    i = np.arange(N, dtype=np.float64)
    t = i / (N - 1)
    y = 1.0 - t * t if variant == AS_WRITTEN else 1.0 - 2.0 * t
    r = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    theta = GOLDEN_ANGLE * i
    pts = np.stack([r * np.cos(theta), y, r * np.sin(theta)], axis=1)
    return SphereGrid(pts, variant)


def default_grid_size(max_vertices: int, multiple: int = 64) -> int:
    """Smallest multiple of ``multiple`` that is >= ``max_vertices`` (and >= 2)."""
    return max(multiple, -(-int(max_vertices) // multiple) * multiple)


def sample_sphere_uniform(K: int, seed) -> np.ndarray:
    """``K`` i.i.d. uniform points on the unit sphere (normalized Gaussians)."""
    if int(K) != K or K < 1:
        raise ValueError(f"sample count must be >= 1, got {K}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((int(K), 3))
    nrm = np.sqrt((g * g).sum(axis=1))
    while np.any(nrm == 0):  # pragma: no cover - probability zero
        bad = nrm == 0
        g[bad] = rng.standard_normal((int(bad.sum()), 3))
        nrm = np.sqrt((g * g).sum(axis=1))
    return g / nrm[:, None]
