"""Recording the bucket hologram and reconstructing scatterers from it.

Seen from detector 2, a scatterer at cell ``c`` of the plane at depth ``z`` acts as
a point source whose wave reaches the detector through the illumination path
run in reverse, the pump modulation and ``h2``:

    O_z = h2 o diag(zeta) o transpose(hI(z))

and a point of the wall acts the same way through ``transpose(h0)``. With a small
bucket patch the marginal is therefore an inline hologram: reference wave from the
patch, object wave from the scatterer. Reconstruction mirrors optical viewing:
remove the background, illuminate the record with the reference wave and
back-propagate through the adjoint of ``O_z`` for every candidate depth. The twin
image comes along and is left in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .biphoton import PumpProfile, marginal_rate
from .grid import ComplexField, GridSpec, require_same_grid
from .hologram import Hologram
from .optics import Mask, OpticalSystem, Transpose, cascade, delta_stack
from .scene import ChamberGeometry, Scene, effective_h1

DC_MODES = ("none", "subtract_p0", "subtract_mean")


def record_hologram(scene: Scene, pump: PumpProfile, h2: OpticalSystem, threads: int = 1) -> Hologram:
    h = marginal_rate(pump, effective_h1(scene), h2, scene.wall, threads)
    meta = dict(h.metadata, scene=scene.digest(), scatterers=len(scene.paths))
    return Hologram(h.grid, h.values, meta)


@dataclass(frozen=True, eq=False)
class ReconstructionOptics:
    """Depth-parameterized detector-2 view of the chamber, plus the reference wave."""

    geometry: ChamberGeometry
    pump: PumpProfile
    h2: OpticalSystem
    reference_cell: tuple[int, ...]

    @classmethod
    def for_scene(cls, scene: Scene, pump: PumpProfile, h2: OpticalSystem) -> "ReconstructionOptics":
        if scene.geometry is None:
            raise ValueError("reconstruction needs a scene built from chamber geometry")
        member = np.argwhere(scene.wall.member)
        centroid = np.round(member.mean(axis=0)).astype(int)
        # snap to the wall cell nearest the centroid
        nearest = member[np.argmin(((member - centroid) ** 2).sum(axis=1))]
        return cls(scene.geometry, pump, h2, tuple(int(i) for i in nearest))

    def object_system(self, depth: float) -> OpticalSystem:
        return cascade(Transpose(self.geometry.illumination(depth)), Mask(self.pump.field), self.h2)

    def reference_wave(self) -> np.ndarray:
        view = cascade(Transpose(self.geometry.direct_path()), Mask(self.pump.field), self.h2)
        cell = np.ravel_multi_index(self.reference_cell, self.geometry.chamber_grid.shape)
        return view.forward_array(delta_stack(self.geometry.chamber_grid, [cell]))[0]


@dataclass(frozen=True)
class Peak:
    rank: int
    depth_index: int
    depth: float
    cell: tuple[int, ...]
    position: tuple[float, ...]
    magnitude: float


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    grid: GridSpec
    depths: np.ndarray = field(repr=False)
    slices: np.ndarray = field(repr=False)  # complex, (n_depths, *grid.shape)
    peaks: tuple[Peak, ...] = ()
    dc_mode: str = "none"
    oracle_assisted: bool = False
    truncated: bool = False

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.slices) ** 2

    def peak_to_background(self) -> float:
        """Strongest voxel intensity over the mean intensity of the whole volume."""
        vol = self.intensity
        mean = vol.mean()
        return float(vol.max() / mean) if mean > 0 else 0.0


def remove_dc(h: Hologram, dc_mode: str, background: Hologram | None = None) -> np.ndarray:
    if dc_mode not in DC_MODES:
        raise ValueError(f"unknown dc_mode {dc_mode!r}; expected one of {DC_MODES}")
    if dc_mode == "none":
        return h.values.copy()
    if dc_mode == "subtract_mean":
        return h.values - h.values.mean()
    if background is None:
        raise ValueError("subtract_p0 needs the direct-path hologram")
    require_same_grid(h.grid, background.grid)
    return h.values - background.values


def gabor_reconstruct(
    h: Hologram,
    family: Callable[[float], OpticalSystem],
    depths: Sequence[float],
    dc_mode: str = "subtract_p0",
    background: Hologram | None = None,
    reference: np.ndarray | None = None,
    n_peaks: int = 5,
) -> ReconstructionResult:
    """Back-propagate the DC-free record through ``family(z)`` adjoints.

    ``family(z)`` maps the scatterer plane at depth ``z`` to the detector grid.
    ``reference`` is the reference wave on the detector grid; without it the record
    is back-propagated as is.
    """
    depths = np.asarray(list(depths), dtype=float)
    if depths.size == 0:
        raise ValueError("at least one depth is required")
    t = remove_dc(h, dc_mode, background)
    if reference is not None:
        t = t * reference
    slices = []
    for z in depths:
        sys = family(float(z))
        require_same_grid(sys.output_grid, h.grid)
        slices.append(sys.adjoint_array(t))
    grid = family(float(depths[0])).input_grid
    slices = np.stack(slices)
    peaks, truncated = locate_peaks(slices, n_peaks, grid, depths)
    return ReconstructionResult(grid, depths, slices, peaks, dc_mode, dc_mode == "subtract_p0", truncated)


def reconstruct_scene(
    h: Hologram,
    scene: Scene,
    pump: PumpProfile,
    h2: OpticalSystem,
    depths: Sequence[float],
    dc_mode: str = "subtract_p0",
    n_peaks: int = 5,
    threads: int = 1,
) -> ReconstructionResult:
    """Reconstruction with the optics of a chamber scene; the objects themselves are not used."""
    optics = ReconstructionOptics.for_scene(scene, pump, h2)
    background = None
    if dc_mode == "subtract_p0":
        background = marginal_rate(pump, scene.direct, h2, scene.wall, threads)
    return gabor_reconstruct(h, optics.object_system, depths, dc_mode, background, optics.reference_wave(), n_peaks)


def locate_peaks(
    slices: np.ndarray, k: int, grid: GridSpec | None = None, depths: Sequence[float] | None = None
) -> tuple[tuple[Peak, ...], bool]:
    """The ``k`` strongest local maxima of ``|slice|^2`` over all depths.

    A voxel is a local maximum when it is positive and not below any transverse
    neighbour in its own slice. Ties go to the lower depth index, then the lower
    flat cell index. Returns the peaks and whether the list came up short of ``k``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    slices = np.asarray(slices)
    intensity = np.abs(slices) ** 2
    n_depths = intensity.shape[0]
    plane_shape = intensity.shape[1:]
    if depths is None:
        depths = np.arange(n_depths, dtype=float)
    candidates = []
    size = (1,) + (3,) * len(plane_shape)
    local = ndimage.maximum_filter(intensity, size=size, mode="nearest")
    is_peak = (intensity >= local) & (intensity > 0)
    for d, flat in zip(*np.nonzero(is_peak.reshape(n_depths, -1))):
        candidates.append((-intensity.reshape(n_depths, -1)[d, flat], int(d), int(flat)))
    candidates.sort()
    truncated = len(candidates) < k
    peaks = []
    for rank, (neg, d, flat) in enumerate(candidates[:k]):
        cell = tuple(int(i) for i in np.unravel_index(flat, plane_shape))
        pos = tuple(float(grid.axis(i)[c]) for i, c in enumerate(cell)) if grid is not None else tuple(map(float, cell))
        peaks.append(Peak(rank + 1, d, float(depths[d]), cell, pos, float(-neg)))
    return tuple(peaks), truncated
