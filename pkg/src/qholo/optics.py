"""Linear optical systems with forward and adjoint application.

A system with impulse response ``h(x_out, x_in)`` acts on a field by quadrature,
``u_out[i] = sum_j h[i, j] u_in[j] * dA_in``. Its adjoint uses the conjugate
transposed kernel weighted by the output cell measure, which makes
``<u, H v> == <H^+ u, v>`` hold exactly under the grid inner product.

All systems accept stacks of fields: arrays of shape ``(*batch, *grid.shape)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .grid import ComplexField, GridMismatchError, GridSpec, require_same_grid

DEFAULT_DENSE_CAP = 4096


class BudgetExceededError(RuntimeError):
    """A dense materialization would exceed the configured cell cap."""


def _check_input(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    if values.shape[values.ndim - grid.ndim :] != grid.shape:
        raise GridMismatchError(f"array of shape {values.shape} does not end in grid shape {grid.shape}")
    return values


class OpticalSystem:
    """Base class. Subclasses implement ``_forward`` and ``_adjoint`` on stacked arrays."""

    input_grid: GridSpec
    output_grid: GridSpec

    def forward_array(self, values: np.ndarray) -> np.ndarray:
        return self._forward(_check_input(self.input_grid, values))

    def adjoint_array(self, values: np.ndarray) -> np.ndarray:
        return self._adjoint(_check_input(self.output_grid, values))

    def _forward(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _adjoint(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Identity(OpticalSystem):
    grid: GridSpec

    @property
    def input_grid(self):
        return self.grid

    @property
    def output_grid(self):
        return self.grid

    def _forward(self, values):
        return values.copy()

    def _adjoint(self, values):
        return values.copy()


@dataclass(frozen=True, eq=False)
class DenseKernel(OpticalSystem):
    """Explicit kernel ``matrix[out_cell, in_cell] = h(x_out, x_in)`` (flattened cells)."""

    input_grid: GridSpec
    output_grid: GridSpec
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.output_grid.size, self.input_grid.size):
            raise GridMismatchError(
                f"kernel shape {m.shape} does not match grids ({self.output_grid.size}, {self.input_grid.size})"
            )
        if not np.all(np.isfinite(m)):
            raise ValueError("kernel entries must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def _forward(self, values):
        batch = values.shape[: values.ndim - self.input_grid.ndim]
        flat = values.reshape(batch + (self.input_grid.size,))
        out = (flat @ self.matrix.T) * self.input_grid.cell_measure
        return out.reshape(batch + self.output_grid.shape)

    def _adjoint(self, values):
        batch = values.shape[: values.ndim - self.output_grid.ndim]
        flat = values.reshape(batch + (self.output_grid.size,))
        out = (flat @ self.matrix.conj()) * self.output_grid.cell_measure
        return out.reshape(batch + self.input_grid.shape)


@dataclass(frozen=True, eq=False)
class FresnelPropagation(OpticalSystem):
    """Paraxial free-space propagation over ``distance`` as a periodic convolution.

    Applied through the transfer function ``exp(-i pi wavelength distance |f|^2)``,
    which has unit modulus, so the discrete propagator is exactly unitary and its
    adjoint is propagation over ``-distance``. At critical sampling
    (``n dx**2 == wavelength * |distance|`` on every axis) the point response coincides
    with the sampled kernel ``exp(i pi |dx|^2 / (wavelength d)) / (i wavelength d)^(D/2)``.
    """

    grid: GridSpec
    wavelength: float
    distance: float

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.distance == 0 or not np.isfinite(self.distance):
            raise ValueError("Fresnel distance must be finite and nonzero; use Identity for d = 0")

    @property
    def input_grid(self):
        return self.grid

    @property
    def output_grid(self):
        return self.grid

    @cached_property
    def transfer(self) -> np.ndarray:
        freqs = np.meshgrid(
            *(np.fft.fftfreq(n, d) for n, d in zip(self.grid.shape, self.grid.spacing)), indexing="ij"
        )
        f2 = sum(f**2 for f in freqs)
        h = np.exp(-1j * np.pi * self.wavelength * self.distance * f2)
        h.setflags(write=False)
        return h

    def _apply(self, values, transfer):
        axes = tuple(range(-self.grid.ndim, 0))
        return np.fft.ifftn(np.fft.fftn(values, axes=axes) * transfer, axes=axes)

    def _forward(self, values):
        return self._apply(values, self.transfer)

    def _adjoint(self, values):
        return self._apply(values, self.transfer.conj())


def fresnel_kernel(wavelength: float, distance: float, offset_sq: np.ndarray, ndim: int) -> np.ndarray:
    """Closed-form paraxial impulse response at squared transverse offsets."""
    return np.exp(1j * np.pi * offset_sq / (wavelength * distance)) / (1j * wavelength * distance) ** (ndim / 2)


@dataclass(frozen=True, eq=False)
class Mask(OpticalSystem):
    transmittance: ComplexField

    @property
    def input_grid(self):
        return self.transmittance.grid

    @property
    def output_grid(self):
        return self.transmittance.grid

    def _forward(self, values):
        return values * self.transmittance.values

    def _adjoint(self, values):
        return values * self.transmittance.values.conj()


@dataclass(frozen=True, eq=False)
class ThinLens(OpticalSystem):
    """Thin lens of focal length ``focal``: pure phase ``exp(-i pi |x|^2 / (wavelength focal))``."""

    grid: GridSpec
    focal: float
    wavelength: float

    def __post_init__(self):
        if self.focal == 0 or not np.isfinite(self.focal):
            raise ValueError("focal length must be finite and nonzero")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @property
    def input_grid(self):
        return self.grid

    @property
    def output_grid(self):
        return self.grid

    @cached_property
    def phase(self) -> np.ndarray:
        p = np.exp(-1j * np.pi * self.grid.radius_squared() / (self.wavelength * self.focal))
        p.setflags(write=False)
        return p

    def as_mask(self) -> Mask:
        return Mask(ComplexField(self.grid, self.phase))

    def _forward(self, values):
        return values * self.phase

    def _adjoint(self, values):
        return values * self.phase.conj()


@dataclass(frozen=True, eq=False)
class Embed(OpticalSystem):
    """Zero-pad a field into a larger concentric grid with the same cell size.

    The adjoint crops. Used to connect planes of different sizes, e.g. a small
    source plane to a large wall plane.
    """

    input_grid: GridSpec
    output_grid: GridSpec

    def __post_init__(self):
        if self.input_grid.ndim != self.output_grid.ndim:
            raise GridMismatchError("embedding requires grids of equal dimensionality")
        if not np.allclose(self.input_grid.spacing, self.output_grid.spacing, rtol=1e-12, atol=0):
            raise GridMismatchError("embedding requires equal cell sizes")
        if any(a > b for a, b in zip(self.input_grid.shape, self.output_grid.shape)):
            raise GridMismatchError("input grid must fit inside the output grid")

    @property
    def window(self) -> tuple[slice, ...]:
        return tuple(
            slice(m // 2 - n // 2, m // 2 - n // 2 + n)
            for n, m in zip(self.input_grid.shape, self.output_grid.shape)
        )

    def _forward(self, values):
        batch = values.shape[: values.ndim - self.input_grid.ndim]
        out = np.zeros(batch + self.output_grid.shape, dtype=complex)
        out[(...,) + self.window] = values
        return out

    def _adjoint(self, values):
        return values[(...,) + self.window].copy()


@dataclass(frozen=True, eq=False)
class Transpose(OpticalSystem):
    """System with kernel ``h(x_in, x_out)``: the plain (unconjugated) transpose."""

    inner: OpticalSystem

    @property
    def input_grid(self):
        return self.inner.output_grid

    @property
    def output_grid(self):
        return self.inner.input_grid

    def _forward(self, values):
        return self.inner._adjoint(values.conj()).conj()

    def _adjoint(self, values):
        return self.inner._forward(values.conj()).conj()


@dataclass(frozen=True, eq=False)
class Cascade(OpticalSystem):
    """Systems applied in order: ``stages[0]`` first."""

    stages: tuple[OpticalSystem, ...]

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("a cascade needs at least one stage")
        for a, b in zip(stages, stages[1:]):
            if not a.output_grid.compatible(b.input_grid):
                raise GridMismatchError(f"cascade break between {type(a).__name__} and {type(b).__name__}")
        object.__setattr__(self, "stages", stages)

    @property
    def input_grid(self):
        return self.stages[0].input_grid

    @property
    def output_grid(self):
        return self.stages[-1].output_grid

    def _forward(self, values):
        for s in self.stages:
            values = s._forward(values)
        return values

    def _adjoint(self, values):
        for s in reversed(self.stages):
            values = s._adjoint(values)
        return values


def apply_forward(sys: OpticalSystem, f: ComplexField) -> ComplexField:
    require_same_grid(sys.input_grid, f.grid)
    return ComplexField(sys.output_grid, sys.forward_array(f.values))


def apply_adjoint(sys: OpticalSystem, g: ComplexField) -> ComplexField:
    require_same_grid(sys.output_grid, g.grid)
    return ComplexField(sys.input_grid, sys.adjoint_array(g.values))


def compose(outer: OpticalSystem, inner: OpticalSystem) -> OpticalSystem:
    """``outer`` after ``inner``. Identities drop out and adjacent masks merge."""
    if not inner.output_grid.compatible(outer.input_grid):
        raise GridMismatchError("inner output grid must equal outer input grid")
    if isinstance(outer, Identity):
        return inner
    if isinstance(inner, Identity):
        return outer
    if isinstance(outer, Mask) and isinstance(inner, Mask):
        t = outer.transmittance.values * inner.transmittance.values
        return Mask(ComplexField(inner.output_grid, t))
    stages: list[OpticalSystem] = []
    for s in (inner, outer):
        stages.extend(s.stages if isinstance(s, Cascade) else (s,))
    return Cascade(tuple(stages))


def cascade(*systems: OpticalSystem) -> OpticalSystem:
    """Compose systems listed in the order light traverses them."""
    result = systems[0]
    for s in systems[1:]:
        result = compose(s, result)
    return result


def point_response(sys: OpticalSystem, cell) -> ComplexField:
    """Output for a unit-integral delta at ``cell``: the kernel column ``h(., x_cell)``."""
    return apply_forward(sys, ComplexField.delta(sys.input_grid, cell))


def delta_stack(grid: GridSpec, cells: Sequence[int] | np.ndarray | None = None) -> np.ndarray:
    """Stack of discrete deltas at the given flat cell indices (all cells by default)."""
    cells = np.arange(grid.size) if cells is None else np.asarray(cells)
    stack = np.zeros((len(cells), grid.size), dtype=complex)
    stack[np.arange(len(cells)), cells] = 1.0 / grid.cell_measure
    return stack.reshape((len(cells),) + grid.shape)


def kernel_rows(sys: OpticalSystem, cells: Sequence[int] | np.ndarray) -> np.ndarray:
    """Rows ``h(x_cell, .)`` for flat output cells, as arrays on the input grid."""
    return sys.adjoint_array(delta_stack(sys.output_grid, cells)).conj()


def to_dense(sys: OpticalSystem, max_cells: int = DEFAULT_DENSE_CAP) -> DenseKernel:
    """Materialize the kernel by probing with every input delta."""
    if isinstance(sys, DenseKernel):
        return sys
    n_in, n_out = sys.input_grid.size, sys.output_grid.size
    if max(n_in, n_out) > max_cells:
        raise BudgetExceededError(f"dense kernel {n_out}x{n_in} exceeds cap of {max_cells} cells per plane")
    cols = sys.forward_array(delta_stack(sys.input_grid)).reshape(n_in, n_out)
    return DenseKernel(sys.input_grid, sys.output_grid, cols.T)
