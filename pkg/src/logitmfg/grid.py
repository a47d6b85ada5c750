"""Space-time grid, population masses, field containers and error norms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import (
    IncompatibleResolution,
    InvalidGrid,
    InvalidPopulation,
    NegativeDensity,
    ShapeMismatch,
)


@dataclass(frozen=True)
class GridSpec:
    """``n_x`` cells on [0, 1] and ``n_t`` steps on [0, horizon]."""

    n_x: int
    n_t: int
    horizon: float

    def __post_init__(self):
        for name in ("n_x", "n_t"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v <= 0:
                raise InvalidGrid(f"{name} must be a positive integer, got {v!r}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise InvalidGrid(f"horizon must be positive, got {self.horizon!r}")

    @property
    def dx(self) -> float:
        return 1.0 / self.n_x

    @property
    def dt(self) -> float:
        return self.horizon / self.n_t

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.n_x + 1) * self.dx

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t + 1) * self.dt


def make_grid(n_x: int, n_t: int, horizon_T: float) -> GridSpec:
    return GridSpec(n_x, n_t, float(horizon_T))


@dataclass(frozen=True)
class PopulationSpec:
    """Mass ``m_i`` of each player type; masses sum to one."""

    masses: tuple

    def __post_init__(self):
        masses = tuple(float(m) for m in self.masses)
        object.__setattr__(self, "masses", masses)
        if not masses:
            raise InvalidPopulation("at least one type is required")
        if any(not (m > 0) for m in masses):
            raise InvalidPopulation(f"masses must be positive, got {masses}")
        total = math.fsum(masses)
        if abs(total - 1.0) > 1e-14:
            raise InvalidPopulation(f"masses sum to {total:.15g}, expected 1")

    @property
    def n_types(self) -> int:
        return len(self.masses)

    def as_array(self) -> np.ndarray:
        return np.array(self.masses)


def _tilted(x):
    return 1.0 + 0.25 * (2.0 * x - 1.0)


Profile = Union[str, Callable[[np.ndarray], np.ndarray]]


def init_density(grid: GridSpec, pops: PopulationSpec, profile: Profile = "uniform") -> np.ndarray:
    """Initial cell masses, shape ``(I, n_x)``.

    ``profile`` is ``"uniform"``, ``"tilted"`` (density ``m_i (1 + 0.25(2x-1))``)
    or a callable giving a nonnegative density shape at the cell centers.
    Masses are sampled at the centers and rescaled so each type sums to m_i.
    """
    x = grid.centers
    if callable(profile):
        shape = np.asarray(profile(x), dtype=float)
        if shape.shape == ():
            shape = np.full_like(x, float(shape))
    elif profile == "uniform":
        shape = np.ones_like(x)
    elif profile == "tilted":
        shape = _tilted(x)
    else:
        raise ValueError(f"unknown initial profile {profile!r}")
    if shape.shape != x.shape:
        raise ShapeMismatch(f"profile returned shape {shape.shape}, expected {x.shape}")
    if np.any(~np.isfinite(shape)) or np.any(shape < 0):
        raise NegativeDensity("initial profile must be finite and nonnegative at cell centers")
    cell = shape * grid.dx
    total = cell.sum()
    if not total > 0:
        raise NegativeDensity("initial profile has zero mass")
    out = np.empty((pops.n_types, grid.n_x))
    for i, m in enumerate(pops.masses):
        out[i] = cell * (m / total)
        # absorb the last rounding residue so the sum is m_i to machine precision
        out[i] *= m / out[i].sum()
    return out


def to_density(mu, grid: GridSpec) -> np.ndarray:
    """Probability density view ``p = mu / dx``."""
    return np.asarray(mu) / grid.dx


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def max_norm_diff(a, b) -> float:
    a, b = _pair(a, b)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def avg_norm_diff(a, b) -> float:
    a, b = _pair(a, b)
    if a.size == 0:
        return 0.0
    return float(np.mean(np.abs(a - b)))


def downsample_cell_average(fine, coarse_n_x: int, mode: str = "mean") -> np.ndarray:
    """Aggregate the last axis of ``fine`` onto ``coarse_n_x`` cells.

    ``mode="mean"`` averages (density or value view), ``mode="sum"`` adds
    (mass view, exactly mass-preserving up to rounding).
    """
    fine = np.asarray(fine, dtype=float)
    n = fine.shape[-1]
    if coarse_n_x <= 0 or n % coarse_n_x:
        raise IncompatibleResolution(f"{coarse_n_x} does not divide {n}")
    r = n // coarse_n_x
    blocks = fine.reshape(fine.shape[:-1] + (coarse_n_x, r))
    if mode == "sum":
        return blocks.sum(axis=-1)
    if mode == "mean":
        return blocks.mean(axis=-1)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class DensityField:
    """Cell masses ``values[i, k, l]`` on a grid."""

    values: np.ndarray
    grid: GridSpec

    @property
    def density(self) -> np.ndarray:
        return self.values / self.grid.dx

    def masses(self) -> np.ndarray:
        """Per-(i, k) total mass."""
        return self.values.sum(axis=-1)

    def mass_deviation(self, pops: PopulationSpec) -> float:
        return float(np.max(np.abs(self.masses() - pops.as_array()[:, None])))

    def slice(self, k: int) -> np.ndarray:
        return self.values[:, k, :]


@dataclass
class ValueField:
    """Vertex values ``values[i, k, l]``; the terminal slice is zero."""

    values: np.ndarray
    grid: GridSpec

    def slice(self, k: int) -> np.ndarray:
        return self.values[:, k, :]
