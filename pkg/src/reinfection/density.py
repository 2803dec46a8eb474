"""Gaussian kernel density estimates and the squared Hellinger distance.

Both densities of a comparison are evaluated by KDE on one shared,
identically spaced grid that covers the union of their default ranges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import ndtr

from .errors import DegenerateSampleError, GridAlignmentError, ValidationError

DEFAULT_GRID_SIZE = 512
# Default grid extends this many bandwidths past the extreme samples.
CUT = 3.0

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class GridSpec:
    min: float
    max: float
    size: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if self.size < 2:
            raise ValidationError(f"grid needs at least 2 points, got {self.size}")
        if not self.max > self.min:
            raise ValidationError(f"empty grid range [{self.min}, {self.max}]")

    def points(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.size)


@dataclass(frozen=True)
class SmoothedDensity:
    """Density values on an equally spaced grid."""

    grid: np.ndarray
    values: np.ndarray
    bandwidth: float = float("nan")

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or values.shape != grid.shape:
            raise ValidationError("density grid and values must be matching 1-d arrays")
        spacing = np.diff(grid)
        if spacing.min() <= 0 or not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0):
            raise ValidationError("density grid must be equally spaced and increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValidationError("density values must be finite and non-negative")
        mass = trapezoid(values, grid)
        if not 0.99 <= mass <= 1.01:
            raise ValidationError(f"density integrates to {mass:.4f} over its grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def mass(self) -> float:
        return float(trapezoid(self.values, self.grid))


def bandwidth_nrd0(samples) -> float:
    """Rule-of-thumb bandwidth ``0.9 * min(sd, IQR / 1.34) * n ** -0.2``.

    Falls back to the standard deviation when the IQR is zero, as R's
    ``bw.nrd0`` does.  All-identical samples are rejected.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateSampleError("need at least two samples for a bandwidth")
    sd = float(np.std(x, ddof=1))
    if sd == 0 or not np.isfinite(sd):
        raise DegenerateSampleError("all samples are identical; bandwidth would be 0")
    q75, q25 = np.percentile(x, [75, 25])
    lo = min(sd, (q75 - q25) / 1.34)
    if lo <= 0:
        lo = sd
    return 0.9 * lo * x.size ** -0.2


def default_grid(samples, bandwidth: Optional[float] = None,
                 size: int = DEFAULT_GRID_SIZE) -> GridSpec:
    x = np.asarray(samples, dtype=float)
    h = bandwidth_nrd0(x) if bandwidth is None else bandwidth
    return GridSpec(float(x.min() - CUT * h), float(x.max() + CUT * h), size)


def _evaluate(x: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    """Kernel sum on ``grid``.

    Point values are exact while the grid resolves the kernel.  On a grid
    coarser than the bandwidth each point instead gets the kernel mass of
    its trapezoid cell (the end cells also take the tails) divided by the
    cell weight, so the trapezoid integral is exactly one.
    """
    out = np.zeros(grid.size)
    dx = grid[1] - grid[0]
    coarse = dx > h
    if coarse:
        edges = np.concatenate([[-np.inf], 0.5 * (grid[1:] + grid[:-1]), [np.inf]])
        weights = np.full(grid.size, dx)
        weights[[0, -1]] = 0.5 * dx
    chunk = max(1, 4_000_000 // grid.size)
    for start in range(0, x.size, chunk):
        xs = x[None, start:start + chunk]
        if coarse:
            cdf = ndtr((edges[:, None] - xs) / h)
            out += np.diff(cdf, axis=0).sum(axis=1)
        else:
            z = (grid[:, None] - xs) / h
            out += np.exp(-0.5 * z * z).sum(axis=1)
    if coarse:
        return out / (x.size * weights)
    return out / (x.size * h * _SQRT_2PI)


def kde(samples, grid_spec: Optional[GridSpec] = None,
        bandwidth: Optional[float] = None) -> SmoothedDensity:
    """Gaussian-kernel density estimate of ``samples`` on an equally spaced grid.

    The bandwidth defaults to :func:`bandwidth_nrd0`; the grid defaults to
    512 points spanning three bandwidths past the extreme samples.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2 or np.unique(x).size < 2:
        raise DegenerateSampleError("kde needs at least two distinct samples")
    h = bandwidth_nrd0(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise DegenerateSampleError(f"bandwidth must be positive, got {h}")
    if grid_spec is None:
        grid_spec = default_grid(x, h)
    grid = grid_spec.points()
    return SmoothedDensity(grid, _evaluate(x, grid, h), h)


def common_grid(sample_sets: Sequence, size: int = DEFAULT_GRID_SIZE) -> GridSpec:
    """One grid covering the default KDE range of every sample set."""
    specs = [default_grid(s, size=size) for s in sample_sets]
    return GridSpec(min(s.min for s in specs), max(s.max for s in specs), size)


def kde_pair(a, b, size: int = DEFAULT_GRID_SIZE) -> tuple[SmoothedDensity, SmoothedDensity]:
    grid = common_grid([a, b], size)
    return kde(a, grid), kde(b, grid)


def hellinger(f: SmoothedDensity, g: SmoothedDensity) -> float:
    """Squared Hellinger distance ``1 - integral sqrt(f g)`` on a shared grid.

    Each density is first rescaled to unit trapezoid mass on the grid so
    that quadrature error cannot push identical densities away from 0.
    """
    if f.grid.shape != g.grid.shape or not np.array_equal(f.grid, g.grid):
        raise GridAlignmentError(
            "densities live on different grids; evaluate both with common_grid()"
        )
    overlap = trapezoid(np.sqrt(f.values * g.values), f.grid)
    norm = np.sqrt(f.mass * g.mass)
    return float(np.clip(1.0 - overlap / norm, 0.0, 1.0))


def hellinger_samples(a, b, size: int = DEFAULT_GRID_SIZE) -> float:
    return hellinger(*kde_pair(a, b, size))


def hellinger_matrix(samples: Mapping[str, np.ndarray],
                     size: int = DEFAULT_GRID_SIZE) -> tuple[list[str], np.ndarray]:
    """Pairwise squared Hellinger distances; each pair gets its own common grid."""
    labels = list(samples)
    n = len(labels)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = hellinger_samples(samples[labels[i]],
                                                      samples[labels[j]], size)
    return labels, out
