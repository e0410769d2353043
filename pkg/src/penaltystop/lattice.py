"""State and time lattices, and classification of states against an open region."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable

import numpy as np


class Label(IntEnum):
    INTERIOR = 0
    BOUNDARY = 1
    EXTERIOR = 2


@dataclass(frozen=True)
class StateGrid:
    """Uniform one-dimensional grid of state coordinates."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a state grid needs at least 2 points")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise ValueError("grid points must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("grid must be uniform")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, lower: float, upper: float, spacing: float) -> "StateGrid":
        """Grid from `lower` to (approximately) `upper` with the given spacing.

        The number of cells is rounded to the nearest integer and the upper
        end is snapped so that the spacing is exact up to rounding.
        """
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        n_cells = int(round((upper - lower) / spacing))
        if n_cells < 1:
            raise ValueError("grid needs at least one cell")
        return cls(lower + spacing * np.arange(n_cells + 1))

    @property
    def spacing(self) -> float:
        return float(self.points[1] - self.points[0])

    @property
    def size(self) -> int:
        return self.points.size

    def index_of(self, x: float) -> int:
        """Index of the grid point nearest to `x`; raises if `x` is off-grid."""
        i = int(np.argmin(np.abs(self.points - x)))
        if abs(self.points[i] - x) > 1e-6 * self.spacing:
            raise ValueError(f"{x!r} is not a grid point")
        return i


@dataclass(frozen=True)
class TimeGrid:
    h: float
    slices: int | None = None
    t0: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("time step must be positive")
        if self.t0 < 0:
            raise ValueError("t0 must be non-negative")
        if self.slices is not None and self.slices < 0:
            raise ValueError("slice count must be non-negative")

    @classmethod
    def bounded(cls, horizon: float, h: float, t0: float = 0.0) -> "TimeGrid":
        n = (horizon - t0) / h
        slices = int(round(n))
        if slices < 1 or abs(n - slices) > 1e-9 * max(1.0, n):
            raise ValueError(f"horizon {horizon} is not a positive multiple of h={h}")
        return cls(h=h, slices=slices, t0=t0)

    @property
    def unbounded(self) -> bool:
        return self.slices is None

    @property
    def horizon(self) -> float | None:
        if self.slices is None:
            return None
        return self.t0 + self.slices * self.h

    def times(self) -> np.ndarray:
        if self.slices is None:
            raise ValueError("unbounded time grid has no finite list of times")
        return self.t0 + self.h * np.arange(self.slices + 1)


@dataclass(frozen=True)
class RegionGrid:
    grid: StateGrid
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.shape != (self.grid.size,):
            raise ValueError("one label per grid point required")
        if not np.isin(labels, [int(v) for v in Label]).all():
            raise ValueError("unknown label")
        if not np.any(labels == Label.INTERIOR):
            raise ValueError("region has no interior points")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def interior(self) -> np.ndarray:
        return self.labels == Label.INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.labels == Label.BOUNDARY

    @property
    def exterior(self) -> np.ndarray:
        return self.labels == Label.EXTERIOR

    def counts(self) -> dict[Label, int]:
        return {lab: int(np.sum(self.labels == lab)) for lab in Label}

    def boundary_adjacent_interior(self) -> np.ndarray:
        """Indices of interior points with a non-interior nearest neighbour."""
        inside = self.interior
        left = np.r_[True, inside[:-1]]
        right = np.r_[inside[1:], True]
        return np.flatnonzero(inside & ~(left & right))


def classify(region: RegionGrid, index: int) -> Label:
    n = region.grid.size
    if not -n <= index < n:
        raise IndexError(f"state index {index} out of range for {n} points")
    return Label(int(region.labels[index]))


def build_region(grid: StateGrid, interior_predicate: Callable[[float], bool]) -> RegionGrid:
    """Label grid points as interior, boundary or exterior.

    A point is interior when the predicate holds. A non-interior point lying
    within one spacing of an interior point is a boundary point; everything
    else is exterior.
    """
    inside = np.array([bool(interior_predicate(float(x))) for x in grid.points])
    if not inside.any():
        raise ValueError("predicate selects no interior points")
    if inside.all():
        warnings.warn("no exterior: exit time infinite", stacklevel=2)
    near = np.zeros_like(inside)
    near[:-1] |= inside[1:]
    near[1:] |= inside[:-1]
    labels = np.full(grid.size, Label.EXTERIOR, dtype=np.int8)
    labels[~inside & near] = Label.BOUNDARY
    labels[inside] = Label.INTERIOR
    return RegionGrid(grid, labels)


# Named predicates used by configs; each returns a predicate given parameters.
def below(upper: float, tol: float = 1e-9) -> Callable[[float], bool]:
    return lambda x: x < upper - tol


def above(lower: float, tol: float = 1e-9) -> Callable[[float], bool]:
    return lambda x: x > lower + tol


def interval(lower: float, upper: float, tol: float = 1e-9) -> Callable[[float], bool]:
    return lambda x: lower + tol < x < upper - tol


def everywhere() -> Callable[[float], bool]:
    return lambda x: True


PREDICATES = {
    "below": below,
    "above": above,
    "interval": interval,
    "all": everywhere,
}
