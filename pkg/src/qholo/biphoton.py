"""Entangled-pair observables: joint amplitude, coincidence rate and bucket marginal.

With pump amplitude ``zeta`` on the source plane and systems ``h1`` (source to
wall) and ``h2`` (source to detector 2), the joint amplitude is

    A(x1, x2) = sum_x h1(x1, x) zeta(x) h2(x2, x) dA_src

and the coincidence rate is ``|A|**2`` with no further prefactor. Integrating the
rate over the wall domain gives the bucket marginal, which can equally be written
through the two-point kernel ``g1(x, x') = sum_{x1 in wall} conj(h1(x1, x)) h1(x1, x') dA_wall``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import ComplexField, DegenerateInputError, DomainMask, GridSpec, normalize, require_same_grid
from .hologram import Hologram, digest
from .optics import DEFAULT_DENSE_CAP, BudgetExceededError, OpticalSystem, delta_stack, kernel_rows, to_dense

# x2 cells handled per work unit; fixed so results never depend on the worker count
CHUNK = 256


@dataclass(frozen=True, eq=False)
class PumpProfile:
    field: ComplexField
    normalized: bool = False

    @classmethod
    def from_field(cls, f: ComplexField, normalize_: bool = True) -> "PumpProfile":
        if normalize_:
            return cls(normalize(f), True)
        return cls(f, False)

    @property
    def grid(self) -> GridSpec:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def digest(self) -> str:
        return digest(self.values)


@dataclass(frozen=True, eq=False)
class BiphotonAmplitude:
    """``values[x1, x2]`` over flattened wall and detector-2 cells."""

    wall_grid: GridSpec
    detector_grid: GridSpec
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class CoincidenceMap:
    wall_grid: GridSpec
    detector_grid: GridSpec
    values: np.ndarray = field(repr=False)
    scale: str = "unnormalized"


@dataclass(frozen=True, eq=False)
class CoherenceKernel:
    """``values[x, x']`` over flattened source cells."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    @classmethod
    def identity(cls, grid: GridSpec) -> "CoherenceKernel":
        return cls(grid, np.eye(grid.size, dtype=complex) / grid.cell_measure)


def _check_pair(pump: PumpProfile, h1: OpticalSystem | None, h2: OpticalSystem) -> None:
    if h1 is not None:
        require_same_grid(pump.grid, h1.input_grid)
    require_same_grid(pump.grid, h2.input_grid)


def _chunks(n: int) -> list[np.ndarray]:
    return [np.arange(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]


def _map_chunks(fn, n: int, threads: int = 1) -> np.ndarray:
    chunks = _chunks(n)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return np.concatenate(parts, axis=0)


def _amplitude_columns(pump: PumpProfile, h1: OpticalSystem, h2: OpticalSystem, cells: np.ndarray) -> np.ndarray:
    """``A(., x2)`` for the given flat x2 cells, shape ``(len(cells), *wall_shape)``."""
    rows = kernel_rows(h2, cells) * pump.values
    return h1.forward_array(rows)


def biphoton_amplitude(pump: PumpProfile, h1: OpticalSystem, h2: OpticalSystem, threads: int = 1) -> BiphotonAmplitude:
    _check_pair(pump, h1, h2)
    n2 = h2.output_grid.size
    cols = _map_chunks(lambda c: _amplitude_columns(pump, h1, h2, c).reshape(len(c), -1), n2, threads)
    return BiphotonAmplitude(h1.output_grid, h2.output_grid, cols.T.copy())


def biphoton_amplitude_by_probing(pump: PumpProfile, h1: OpticalSystem, h2: OpticalSystem) -> BiphotonAmplitude:
    """Same amplitude, evaluated source cell by source cell through point responses."""
    _check_pair(pump, h1, h2)
    src = pump.grid
    deltas = delta_stack(src)
    c1 = h1.forward_array(deltas).reshape(src.size, -1)
    c2 = h2.forward_array(deltas).reshape(src.size, -1)
    a = np.einsum("xi,x,xj->ij", c1, pump.values.ravel(), c2) * src.cell_measure
    return BiphotonAmplitude(h1.output_grid, h2.output_grid, a)


def coincidence_rate(a: BiphotonAmplitude) -> CoincidenceMap:
    return CoincidenceMap(a.wall_grid, a.detector_grid, np.abs(a.values) ** 2)


def marginal_hologram(p: CoincidenceMap, wall: DomainMask) -> Hologram:
    require_same_grid(p.wall_grid, wall.grid)
    values = p.values[wall.member.ravel()].sum(axis=0) * wall.grid.cell_measure
    return Hologram(p.detector_grid, values.reshape(p.detector_grid.shape), {"scale": p.scale})


def marginal_rate(
    pump: PumpProfile, h1: OpticalSystem, h2: OpticalSystem, wall: DomainMask, threads: int = 1
) -> Hologram:
    """Bucket marginal without storing the joint amplitude (chunked over x2)."""
    _check_pair(pump, h1, h2)
    require_same_grid(h1.output_grid, wall.grid)
    member = wall.member.ravel()

    def work(cells):
        cols = _amplitude_columns(pump, h1, h2, cells).reshape(len(cells), -1)[:, member]
        return (np.abs(cols) ** 2).sum(axis=1)

    values = _map_chunks(work, h2.output_grid.size, threads) * wall.grid.cell_measure
    meta = {"scale": "unnormalized", "pump": pump.digest(), "wall": digest(wall.member)}
    return Hologram(h2.output_grid, values.reshape(h2.output_grid.shape), meta)


def coherence_kernel(h1: OpticalSystem, wall: DomainMask, max_cells: int = DEFAULT_DENSE_CAP) -> CoherenceKernel:
    require_same_grid(h1.output_grid, wall.grid)
    k = to_dense(h1, max_cells).matrix[wall.member.ravel()]
    g = (k.conj().T @ k) * wall.grid.cell_measure
    return CoherenceKernel(h1.input_grid, g)


def marginal_via_kernel(
    pump: PumpProfile, g1: CoherenceKernel, h2: OpticalSystem, max_cells: int = DEFAULT_DENSE_CAP
) -> Hologram:
    require_same_grid(pump.grid, g1.grid)
    _check_pair(pump, None, h2)
    n2 = h2.output_grid.size
    if n2 > max_cells:
        raise BudgetExceededError(f"detector grid of {n2} cells exceeds cap {max_cells}")
    b = kernel_rows(h2, np.arange(n2)).reshape(n2, -1) * pump.values.ravel()
    values = np.einsum("ix,xy,iy->i", b.conj(), g1.values, b).real * pump.grid.cell_measure**2
    return Hologram(h2.output_grid, values.reshape(h2.output_grid.shape), {"scale": "unnormalized"})


def singles_rate_detector2(pump: PumpProfile, h2: OpticalSystem, threads: int = 1) -> Hologram:
    """Detector-2 count rate of the reduced (mixed) single-photon state."""
    _check_pair(pump, None, h2)
    weight = np.abs(pump.values) ** 2

    def work(cells):
        rows = kernel_rows(h2, cells).reshape(len(cells), -1)
        return (np.abs(rows) ** 2 * weight.ravel()).sum(axis=1)

    values = _map_chunks(work, h2.output_grid.size, threads) * pump.grid.cell_measure
    return Hologram(h2.output_grid, values.reshape(h2.output_grid.shape), {"scale": "unnormalized", "pump": pump.digest()})


def wall_singles_total(pump: PumpProfile, h1: OpticalSystem, wall: DomainMask) -> float:
    """Probability that photon 1 alone lands on the wall domain.

    On the grid the pair state ``zeta(x) delta(x - x')`` has squared norm
    ``1 / dA_source`` (the discrete ``delta(0)``); that factor is divided out here
    so a unitary ``h1`` with a full wall gives exactly 1.
    """
    require_same_grid(pump.grid, h1.input_grid)
    require_same_grid(h1.output_grid, wall.grid)
    src = pump.grid
    weight = (np.abs(pump.values) ** 2).ravel()
    support = np.flatnonzero(weight)
    member = wall.member.ravel()
    total = 0.0
    for s in range(0, len(support), CHUNK):
        cells = support[s : s + CHUNK]
        cols = h1.forward_array(delta_stack(src, cells)).reshape(len(cells), -1)[:, member]
        total += float((weight[cells] * (np.abs(cols) ** 2).sum(axis=1)).sum())
    return total * src.cell_measure**2 * wall.grid.cell_measure


def classical_factorized_marginal(
    pump: PumpProfile, h1: OpticalSystem, h2: OpticalSystem, wall: DomainMask
) -> Hologram:
    """Bucket marginal of a separable source whose joint rate is ``s1(x1) * s2(x2)``.

    Both factors are the singles rates of the entangled source, so the comparison
    isolates entanglement: the wall integral only rescales the detector-2 singles.
    """
    _check_pair(pump, h1, h2)
    s2 = singles_rate_detector2(pump, h2)
    scale = wall_singles_total(pump, h1, wall)
    return Hologram(h2.output_grid, scale * s2.values, {"scale": "unnormalized", "baseline": "separable"})


def require_positive_mass(p: CoincidenceMap, wall: DomainMask) -> float:
    mass = float(p.values[wall.member.ravel()].sum())
    if not mass > 0:
        raise DegenerateInputError("coincidence map has no mass on the wall domain")
    return mass
