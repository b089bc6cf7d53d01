"""Uniform grids, complex fields and the quadrature that every integral reduces to.

Integrals over a transverse plane are midpoint sums: ``sum(values) * cell_measure``.
Field values carry units of amplitude per square root of area, so that
``|value|**2 * cell_measure`` is a probability weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Raised when two objects that must share a grid do not."""


class DegenerateInputError(ValueError):
    """Raised for inputs that make an operation undefined (zero norm, empty mask)."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform Cartesian grid on a 1-D or 2-D transverse plane.

    Sample ``k`` along an axis of ``n`` cells sits at ``(k - n // 2) * dx`` so the
    origin is always a grid point.
    """

    shape: tuple[int, ...]
    extent: tuple[float, ...]

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        extent = tuple(float(e) for e in np.atleast_1d(self.extent))
        if len(shape) not in (1, 2):
            raise ValueError(f"grid must be 1-D or 2-D, got {len(shape)} axes")
        if len(extent) != len(shape):
            raise ValueError("one extent per axis is required")
        if any(n < 2 for n in shape):
            raise ValueError(f"need at least 2 samples per axis, got {shape}")
        if any(not np.isfinite(e) or e <= 0 for e in extent):
            raise ValueError(f"extents must be positive and finite, got {extent}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "extent", extent)

    @classmethod
    def regular(cls, samples: int | Sequence[int], extent: float | Sequence[float], ndim: int = 1) -> "GridSpec":
        """Grid with the same sample count and extent on every axis."""
        samples = np.broadcast_to(np.atleast_1d(samples), (ndim,))
        extent = np.broadcast_to(np.atleast_1d(extent), (ndim,))
        return cls(tuple(int(s) for s in samples), tuple(float(e) for e in extent))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent, self.shape))

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, i: int) -> np.ndarray:
        n = self.shape[i]
        return (np.arange(n) - n // 2) * self.spacing[i]

    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to the full grid shape (``ij`` indexing)."""
        return tuple(np.meshgrid(*(self.axis(i) for i in range(self.ndim)), indexing="ij"))

    def radius_squared(self) -> np.ndarray:
        return sum(c**2 for c in self.coords())

    def index_of(self, position: Sequence[float]) -> tuple[tuple[int, ...], tuple[float, ...]]:
        """Nearest cell to a physical position, plus the snap offset."""
        position = np.atleast_1d(np.asarray(position, dtype=float))
        if position.shape != (self.ndim,):
            raise ValueError(f"expected {self.ndim} coordinates, got {position.tolist()}")
        idx, offset = [], []
        for i, p in enumerate(position):
            k = int(np.floor(p / self.spacing[i] + 0.5)) + self.shape[i] // 2
            if not 0 <= k < self.shape[i]:
                raise IndexError(f"position {p} lies outside axis {i} of the grid")
            idx.append(k)
            offset.append(float(p - self.axis(i)[k]))
        return tuple(idx), tuple(offset)

    def check_index(self, cell) -> tuple[int, ...]:
        cell = tuple(int(c) for c in np.atleast_1d(cell))
        if len(cell) == 1 and self.ndim == 2:
            cell = tuple(int(c) for c in np.unravel_index(cell[0], self.shape))
        if len(cell) != self.ndim or any(not 0 <= c < n for c, n in zip(cell, self.shape)):
            raise IndexError(f"cell {cell} out of range for grid {self.shape}")
        return cell

    def compatible(self, other: "GridSpec") -> bool:
        return self.shape == other.shape and np.allclose(self.extent, other.extent, rtol=1e-12, atol=0)


def require_same_grid(*grids: GridSpec) -> GridSpec:
    first = grids[0]
    for g in grids[1:]:
        if not first.compatible(g):
            raise GridMismatchError(f"grid mismatch: {first} vs {g}")
    return first


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.size != self.grid.size:
            raise GridMismatchError(f"{values.size} values for a grid of {self.grid.size} cells")
        values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ComplexField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def ones(cls, grid: GridSpec) -> "ComplexField":
        return cls(grid, np.ones(grid.shape, dtype=complex))

    @classmethod
    def delta(cls, grid: GridSpec, cell) -> "ComplexField":
        """Discrete delta: ``1 / cell_measure`` at one cell, so it integrates to one."""
        values = np.zeros(grid.shape, dtype=complex)
        values[grid.check_index(cell)] = 1.0 / grid.cell_measure
        return cls(grid, values)

    @classmethod
    def gaussian(cls, grid: GridSpec, width: float, center: Sequence[float] | float = 0.0) -> "ComplexField":
        center = np.broadcast_to(np.atleast_1d(center), (grid.ndim,))
        r2 = sum((c - c0) ** 2 for c, c0 in zip(grid.coords(), center))
        return cls(grid, np.exp(-r2 / (2.0 * width**2)))

    def norm(self) -> float:
        return float(np.sqrt(inner_product(self, self).real))

    def __add__(self, other: "ComplexField") -> "ComplexField":
        require_same_grid(self.grid, other.grid)
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        require_same_grid(self.grid, other.grid)
        return ComplexField(self.grid, self.values - other.values)

    def scale(self, c: complex) -> "ComplexField":
        return ComplexField(self.grid, c * self.values)

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.conj())


@dataclass(frozen=True, eq=False)
class DomainMask:
    grid: GridSpec
    member: np.ndarray = field(repr=False)

    def __post_init__(self):
        member = np.asarray(self.member, dtype=bool)
        if member.size != self.grid.size:
            raise GridMismatchError(f"{member.size} flags for a grid of {self.grid.size} cells")
        member = member.reshape(self.grid.shape)
        if not member.any():
            raise DegenerateInputError("domain mask must include at least one cell")
        object.__setattr__(self, "member", _frozen(member))

    @classmethod
    def full(cls, grid: GridSpec) -> "DomainMask":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def box(cls, grid: GridSpec, lo: Sequence[float] | float, hi: Sequence[float] | float) -> "DomainMask":
        """Cells whose centres satisfy ``lo <= x <= hi`` on every axis."""
        lo = np.broadcast_to(np.atleast_1d(lo), (grid.ndim,))
        hi = np.broadcast_to(np.atleast_1d(hi), (grid.ndim,))
        inside = np.ones(grid.shape, dtype=bool)
        for c, a, b in zip(grid.coords(), lo, hi):
            inside &= (c >= a) & (c <= b)
        return cls(grid, inside)

    @property
    def count(self) -> int:
        return int(self.member.sum())

    @property
    def measure(self) -> float:
        return self.count * self.grid.cell_measure

    def union(self, other: "DomainMask") -> "DomainMask":
        require_same_grid(self.grid, other.grid)
        return DomainMask(self.grid, self.member | other.member)


def inner_product(a: ComplexField, b: ComplexField, mask: DomainMask | None = None) -> complex:
    """Quadrature of ``conj(a) * b`` over the masked cells."""
    require_same_grid(a.grid, b.grid)
    prod = a.values.conj() * b.values
    if mask is not None:
        require_same_grid(a.grid, mask.grid)
        prod = prod[mask.member]
    return complex(prod.sum() * a.grid.cell_measure)


def normalize(f: ComplexField) -> ComplexField:
    norm = f.norm()
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero field")
    g = ComplexField(f.grid, f.values / norm)
    # one refinement step absorbs the rounding of the first division
    return ComplexField(g.grid, g.values / g.norm())


def pointwise_multiply(f: ComplexField, g: ComplexField) -> ComplexField:
    require_same_grid(f.grid, g.grid)
    return ComplexField(f.grid, f.values * g.values)


def restrict(f: ComplexField, mask: DomainMask) -> ComplexField:
    require_same_grid(f.grid, mask.grid)
    return ComplexField(f.grid, np.where(mask.member, f.values, 0.0))
