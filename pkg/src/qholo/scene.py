"""Point scatterers concealed in the chamber and the hologram's three-term split.

Photon 1 reaches the wall either directly, through ``h0``, or by way of a
scatterer ``j``: illumination ``hI[j]`` to the scatterer plane, a fraction
``eta_j`` re-radiated from the scatterer cell, then ``hS[j]`` to the wall. On the
grid the two routes add as

    h1 u = h0 u + sum_j eta_j dA_j (hI[j] u)[c_j] * hS[j](., c_j)

where ``dA_j`` is the cell measure of scatterer ``j``'s plane, so ``eta_j`` stays
dimensionless. Substituting into the bucket marginal splits it exactly into

    direct        = marginal with h0 alone
    scattered     = sum_ij conj(a_i) a_j W_ij conj(q_i) q_j
    interference  = 2 Re sum_j conj(a_j) conj(q_j) r_j

with ``a_j = eta_j dA_j`` and the wall overlaps ``W_ij = <hS_i(., c_i), hS_j(., c_j)>_wall``.
``q_j`` is the scatterer cell seen from detector 2 through the source (the row
``hI[j](c_j, .)``, modulated by the pump, then through ``h2``); ``r_j`` is the same
with that row replaced by ``conj(f_j)``, where ``f_j`` is the scattered wave
restricted to the wall and carried back to the source through the adjoint of
``h0``. The diagonal ``W_jj`` is the share of scatterer ``j``'s re-radiation that
the wall collects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .biphoton import PumpProfile, marginal_rate
from .grid import (
    ComplexField,
    DomainMask,
    GridMismatchError,
    GridSpec,
    inner_product,
    pointwise_multiply,
    require_same_grid,
    restrict,
)
from .hologram import Hologram, clamp_nonnegative, digest
from .optics import (
    Embed,
    FresnelPropagation,
    Identity,
    OpticalSystem,
    ThinLens,
    apply_adjoint,
    apply_forward,
    cascade,
    kernel_rows,
    point_response,
)


@dataclass(frozen=True)
class PointScatterer:
    """A scatterer at ``transverse`` (1 or 2 coordinates) and axial ``depth``."""

    transverse: tuple[float, ...]
    depth: float
    eta: complex

    def __post_init__(self):
        object.__setattr__(self, "transverse", tuple(float(t) for t in np.atleast_1d(self.transverse)))
        object.__setattr__(self, "eta", complex(self.eta))
        if not np.isfinite(self.eta) or not np.isfinite(self.depth):
            raise ValueError("scatterer strength and depth must be finite")


@dataclass(frozen=True, eq=False)
class ScattererPath:
    """One scatterer with the systems that reach it and leave it."""

    eta: complex
    cell: tuple[int, ...]
    illumination: OpticalSystem  # source plane -> scatterer plane
    reradiation: OpticalSystem  # scatterer plane -> wall
    scatterer: PointScatterer | None = None
    snap_offset: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.illumination.output_grid.compatible(self.reradiation.input_grid):
            raise GridMismatchError("illumination must end on the plane where re-radiation starts")
        object.__setattr__(self, "cell", self.plane.check_index(self.cell))
        object.__setattr__(self, "eta", complex(self.eta))

    @property
    def plane(self) -> GridSpec:
        return self.illumination.output_grid

    @property
    def strength(self) -> complex:
        """``eta`` times the scatterer cell measure: the weight of the rank-one term."""
        return self.eta * self.plane.cell_measure

    def with_eta(self, eta: complex) -> "ScattererPath":
        return ScattererPath(eta, self.cell, self.illumination, self.reradiation, self.scatterer, self.snap_offset)


@dataclass(frozen=True, eq=False)
class ScatteringSystem(OpticalSystem):
    """Effective source-to-wall system: direct path plus one rank-one term per scatterer."""

    direct: OpticalSystem
    paths: tuple[ScattererPath, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        for p in self.paths:
            require_same_grid(self.direct.input_grid, p.illumination.input_grid)
            require_same_grid(self.direct.output_grid, p.reradiation.output_grid)

    @property
    def input_grid(self):
        return self.direct.input_grid

    @property
    def output_grid(self):
        return self.direct.output_grid

    def _responses(self):
        return [point_response(p.reradiation, p.cell).values for p in self.paths]

    def _forward(self, values):
        out = self.direct._forward(values)
        nd = self.input_grid.ndim
        for p, resp in zip(self.paths, self._responses()):
            at_cell = p.illumination._forward(values)[(...,) + p.cell]
            out = out + (p.strength * at_cell)[(...,) + (None,) * nd] * resp
        return out

    def _adjoint(self, values):
        out = self.direct._adjoint(values)
        nd = self.output_grid.ndim
        axes = tuple(range(-nd, 0))
        dA = self.output_grid.cell_measure
        for p, resp in zip(self.paths, self._responses()):
            overlap = (resp.conj() * values).sum(axis=axes) * dA
            back = apply_adjoint(p.illumination, ComplexField.delta(p.plane, p.cell)).values
            out = out + (np.conj(p.strength) * overlap)[(...,) + (None,) * nd] * back
        return out


@dataclass(frozen=True, eq=False)
class Scene:
    direct: OpticalSystem
    wall: DomainMask
    paths: tuple[ScattererPath, ...] = ()
    geometry: "ChamberGeometry | None" = None

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        require_same_grid(self.direct.output_grid, self.wall.grid)
        ScatteringSystem(self.direct, self.paths)  # validates grids

    @property
    def source_grid(self) -> GridSpec:
        return self.direct.input_grid

    @property
    def wall_grid(self) -> GridSpec:
        return self.direct.output_grid

    def with_etas(self, etas: Sequence[complex]) -> "Scene":
        if len(etas) != len(self.paths):
            raise ValueError("one eta per scatterer is required")
        return Scene(self.direct, self.wall, tuple(p.with_eta(e) for p, e in zip(self.paths, etas)), self.geometry)

    def scaled(self, c: float) -> "Scene":
        return self.with_etas([c * p.eta for p in self.paths])

    def without_scatterers(self) -> "Scene":
        return Scene(self.direct, self.wall, (), self.geometry)

    def digest(self) -> str:
        parts = [self.wall.member]
        if self.geometry is not None:
            parts.append(repr(self.geometry))
        for p in self.paths:
            parts.extend([p.eta, p.cell, None if p.scatterer is None else p.scatterer.depth])
        return digest(*parts)


@dataclass(frozen=True)
class ChamberGeometry:
    """Source plane, optional lens, free space to the chamber opening, then the chamber.

    Depths are measured from the opening. Scatterer planes and the planar wall
    segment share ``chamber_grid``; the source plane is embedded into it centrally.
    """

    wavelength: float
    source_grid: GridSpec
    chamber_grid: GridSpec
    opening_distance: float
    wall_depth: float
    lens_focal: float | None = None

    def __post_init__(self):
        if not self.opening_distance > 0 or not self.wall_depth > 0:
            raise ValueError("opening distance and wall depth must be positive")

    def entrance(self) -> OpticalSystem:
        stages: list[OpticalSystem] = []
        if self.lens_focal is not None:
            stages.append(ThinLens(self.source_grid, self.lens_focal, self.wavelength))
        stages.append(Embed(self.source_grid, self.chamber_grid))
        return cascade(*stages)

    def _propagate(self, distance: float) -> OpticalSystem:
        if distance == 0:
            return Identity(self.chamber_grid)
        return FresnelPropagation(self.chamber_grid, self.wavelength, distance)

    def direct_path(self) -> OpticalSystem:
        return cascade(self.entrance(), self._propagate(self.opening_distance + self.wall_depth))

    def illumination(self, depth: float) -> OpticalSystem:
        self.check_depth(depth)
        return cascade(self.entrance(), self._propagate(self.opening_distance + depth))

    def reradiation(self, depth: float) -> OpticalSystem:
        self.check_depth(depth)
        return self._propagate(self.wall_depth - depth)

    def check_depth(self, depth: float) -> None:
        if not 0 <= depth < self.wall_depth:
            raise ValueError(f"scatterer depth {depth} outside the chamber [0, {self.wall_depth})")


def build_scene(geometry: ChamberGeometry, scatterers: Sequence[PointScatterer], wall: DomainMask) -> Scene:
    """Derive every path system from the chamber geometry; scatterers snap to cells."""
    paths = []
    for s in scatterers:
        cell, offset = geometry.chamber_grid.index_of(s.transverse)
        paths.append(
            ScattererPath(s.eta, cell, geometry.illumination(s.depth), geometry.reradiation(s.depth), s, offset)
        )
    return Scene(geometry.direct_path(), wall, tuple(paths), geometry)


def effective_h1(scene: Scene) -> ScatteringSystem:
    return ScatteringSystem(scene.direct, scene.paths)


def _path(scene: Scene, j: int) -> ScattererPath:
    if not 0 <= j < len(scene.paths):
        raise IndexError(f"scatterer index {j} out of range for {len(scene.paths)} scatterers")
    return scene.paths[j]


def illumination_amplitude(scene: Scene, j: int, pump: PumpProfile) -> complex:
    """Pump amplitude delivered to scatterer ``j``'s cell, times that cell's measure."""
    p = _path(scene, j)
    u = apply_forward(p.illumination, pump.field)
    return complex(u.values[p.cell] * p.plane.cell_measure)


def wall_overlap(scene: Scene) -> np.ndarray:
    """``W[i, j]``: wall-domain overlap of the re-radiated waves of scatterers i and j."""
    resp = [point_response(p.reradiation, p.cell) for p in scene.paths]
    n = len(resp)
    w = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for k in range(n):
            w[i, k] = inner_product(resp[i], resp[k], scene.wall)
    return w


def q_field(scene: Scene, j: int, pump: PumpProfile, h2: OpticalSystem) -> ComplexField:
    p = _path(scene, j)
    row = kernel_rows(p.illumination, [np.ravel_multi_index(p.cell, p.plane.shape)])[0]
    return apply_forward(h2, pointwise_multiply(pump.field, ComplexField(pump.grid, row)))


def f_kernel(scene: Scene, j: int) -> ComplexField:
    p = _path(scene, j)
    scattered = restrict(point_response(p.reradiation, p.cell), scene.wall)
    return apply_adjoint(scene.direct, scattered)


def r_field(scene: Scene, j: int, pump: PumpProfile, h2: OpticalSystem) -> ComplexField:
    return apply_forward(h2, pointwise_multiply(pump.field, f_kernel(scene, j).conj()))


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    direct: Hologram
    scattered: Hologram
    interference: np.ndarray = field(repr=False)
    q: tuple[ComplexField, ...] = ()
    r: tuple[ComplexField, ...] = ()
    strengths: np.ndarray = field(default_factory=lambda: np.zeros(0, complex), repr=False)
    overlap: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), complex), repr=False)
    illumination: np.ndarray = field(default_factory=lambda: np.zeros(0, complex), repr=False)

    @property
    def wall_weights(self) -> np.ndarray:
        return np.diag(self.overlap).real.copy()

    def total(self) -> np.ndarray:
        return self.direct.values + self.scattered.values + self.interference

    def scattered_without_cross_terms(self) -> np.ndarray:
        if not self.q:
            return np.zeros_like(self.direct.values)
        qs = np.stack([f.values for f in self.q])
        w = self.wall_weights[(slice(None),) + (None,) * (qs.ndim - 1)]
        a2 = (np.abs(self.strengths) ** 2)[(slice(None),) + (None,) * (qs.ndim - 1)]
        return (a2 * w * np.abs(qs) ** 2).sum(axis=0)

    def cross_terms(self) -> np.ndarray:
        return self.scattered.values - self.scattered_without_cross_terms()


def scattered_term(strengths: np.ndarray, overlap: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``sum_ij conj(a_i) a_j W_ij conj(q_i) q_j`` for stacked ``q[j, ...]``."""
    aq = strengths[:, None] * q.reshape(len(strengths), -1)
    return np.einsum("ix,ij,jx->x", aq.conj(), overlap, aq).real.reshape(q.shape[1:])


def hologram_decomposition(
    scene: Scene, pump: PumpProfile, h2: OpticalSystem, threads: int = 1
) -> DecompositionResult:
    require_same_grid(pump.grid, scene.source_grid, h2.input_grid)
    direct = marginal_rate(pump, scene.direct, h2, scene.wall, threads)
    n = len(scene.paths)
    det = h2.output_grid
    if n == 0:
        zero = np.zeros(det.shape)
        return DecompositionResult(direct, Hologram(det, zero), zero)
    q = tuple(q_field(scene, j, pump, h2) for j in range(n))
    r = tuple(r_field(scene, j, pump, h2) for j in range(n))
    a = np.array([p.strength for p in scene.paths])
    w = wall_overlap(scene)
    qs = np.stack([f.values for f in q])
    rs = np.stack([f.values for f in r])
    scattered = scattered_term(a, w, qs)
    inter = 2.0 * (a.conj()[(slice(None),) + (None,) * det.ndim] * qs.conj() * rs).sum(axis=0).real
    illum = np.array([illumination_amplitude(scene, j, pump) for j in range(n)])
    meta = {"scale": "unnormalized", "scene": scene.digest(), "pump": pump.digest()}
    return DecompositionResult(
        direct, Hologram(det, clamp_nonnegative(scattered), meta), inter, q, r, a, w, illum
    )
