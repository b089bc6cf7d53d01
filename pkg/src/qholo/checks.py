"""Random test instances and the self-check suite run by ``qholo oracle-check``."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

import numpy as np

from .biphoton import (
    PumpProfile,
    classical_factorized_marginal,
    coherence_kernel,
    marginal_rate,
    marginal_via_kernel,
    singles_rate_detector2,
)
from .grid import ComplexField, DomainMask, GridSpec
from .optics import (
    Cascade,
    DenseKernel,
    Embed,
    FresnelPropagation,
    Identity,
    Mask,
    OpticalSystem,
    ThinLens,
    Transpose,
    fresnel_kernel,
    point_response,
)
from .oracle import DEFAULT_BUDGET, dense_decomposition, dense_marginal
from .scene import Scene, ScattererPath, ScatteringSystem, hologram_decomposition


def random_field(grid: GridSpec, rng: np.random.Generator) -> ComplexField:
    return ComplexField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def random_dense(in_grid: GridSpec, out_grid: GridSpec, rng: np.random.Generator, scale: float = 1.0) -> DenseKernel:
    m = rng.standard_normal((out_grid.size, in_grid.size)) + 1j * rng.standard_normal((out_grid.size, in_grid.size))
    return DenseKernel(in_grid, out_grid, scale * m)


def random_unitary(grid: GridSpec, rng: np.random.Generator) -> DenseKernel:
    """Dense kernel whose operator (kernel times cell measure) is unitary."""
    z = rng.standard_normal((grid.size, grid.size)) + 1j * rng.standard_normal((grid.size, grid.size))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return DenseKernel(grid, grid, q / grid.cell_measure)


def random_wall(grid: GridSpec, rng: np.random.Generator, fraction: float = 0.5) -> DomainMask:
    member = rng.random(grid.shape) < fraction
    member.flat[rng.integers(grid.size)] = True
    return DomainMask(grid, member)


def random_dense_scene(
    rng: np.random.Generator, cells: int = 16, n_scatterers: int = 3, wall_fraction: float = 0.5, eta_scale: float = 0.3
) -> tuple[Scene, PumpProfile, DenseKernel]:
    """Scene on ``cells``-cell 1-D planes with random dense kernels everywhere."""
    src = GridSpec((cells,), (1.0,))
    wall = GridSpec((cells,), (1.3,))
    det = GridSpec((cells,), (0.7,))
    k0 = random_dense(src, wall, rng, 1.0 / cells)
    paths = []
    for _ in range(n_scatterers):
        plane = GridSpec((cells,), (float(rng.uniform(0.5, 2.0)),))
        eta = eta_scale * complex(rng.standard_normal(), rng.standard_normal())
        cell = (int(rng.integers(cells)),)
        paths.append(ScattererPath(eta, cell, random_dense(src, plane, rng), random_dense(plane, wall, rng)))
    scene = Scene(k0, random_wall(wall, rng, wall_fraction), tuple(paths))
    pump = PumpProfile.from_field(random_field(src, rng))
    return scene, pump, random_dense(src, det, rng, 1.0 / cells)


def adjoint_gap(sys: OpticalSystem, u: np.ndarray, v: np.ndarray) -> float:
    """``|<u, H v> - <H^+ u, v>|`` relative to ``|u| |H v| + |H^+ u| |v|``."""
    dAi, dAo = sys.input_grid.cell_measure, sys.output_grid.cell_measure
    hv = sys.forward_array(v)
    hu = sys.adjoint_array(u)
    lhs = np.vdot(u, hv) * dAo
    rhs = np.vdot(hu, v) * dAi
    scale = np.sqrt(np.vdot(u, u).real * np.vdot(hv, hv).real) * dAo + np.sqrt(
        np.vdot(hu, hu).real * np.vdot(v, v).real
    ) * dAi
    return float(abs(lhs - rhs) / scale) if scale > 0 else 0.0


def system_zoo(rng: np.random.Generator) -> dict[str, OpticalSystem]:
    """One instance of every system kind on small random grids."""
    g1 = GridSpec((16,), (2e-4,))
    g2 = GridSpec((8, 8), (1e-4, 1e-4))
    big = GridSpec((32,), (4e-4,))
    dense = random_dense(g1, GridSpec((12,), (1.0,)), rng)
    fres = FresnelPropagation(g2, 5e-7, 3e-3)
    scene, _, _ = random_dense_scene(rng, cells=16, n_scatterers=2)
    return {
        "identity": Identity(g2),
        "dense": dense,
        "fresnel": fres,
        "mask": Mask(random_field(g1, rng)),
        "thin_lens": ThinLens(g2, 2e-2, 5e-7),
        "embed": Embed(g1, big),
        "transpose": Transpose(dense),
        "cascade": Cascade((ThinLens(g2, 1e-2, 5e-7), fres, Mask(random_field(g2, rng)))),
        "scattering": ScatteringSystem(scene.direct, scene.paths),
    }


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def run_checks(seed: int = 0, tolerance_scale: float = 1.0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out: list[CheckResult] = []

    def record(name, tol, fn):
        t = time.perf_counter()
        res = fn()
        out.append(CheckResult(name, float(res), tol * tolerance_scale, time.perf_counter() - t))

    def adjoints():
        worst = 0.0
        for sys in system_zoo(rng).values():
            for _ in range(10):
                u = random_field(sys.output_grid, rng).values
                v = random_field(sys.input_grid, rng).values
                worst = max(worst, adjoint_gap(sys, u, v))
        return worst

    record("adjoint_identity", 1e-10, adjoints)

    def decomposition():
        worst = 0.0
        for _ in range(3):
            scene, pump, k2 = random_dense_scene(rng)
            d = hologram_decomposition(scene, pump, k2)
            full = marginal_rate(pump, ScatteringSystem(scene.direct, scene.paths), k2, scene.wall)
            worst = max(worst, _rel(d.total(), full.values))
            o = dense_decomposition(scene, pump.field, k2)
            for a, b in ((d.direct.values, o.direct), (d.scattered.values, o.scattered), (d.interference, o.interference)):
                worst = max(worst, _rel(a, b) * np.abs(b).max() / np.abs(full.values).max())
        return worst

    record("decomposition_vs_oracle", 1e-9, decomposition)

    def marginal():
        worst = 0.0
        for _ in range(5):
            scene, pump, k2 = random_dense_scene(rng, n_scatterers=1)
            h1 = ScatteringSystem(scene.direct, scene.paths)
            fast = marginal_rate(pump, h1, k2, scene.wall)
            k1 = DEFAULT_BUDGET.dense(h1)
            slow = dense_marginal(pump.field, k1, k2, scene.wall, shuffle=random.Random(int(rng.integers(1 << 30))))
            worst = max(worst, _rel(fast.values, slow.values))
        return worst

    record("marginal_vs_oracle", 1e-10, marginal)

    def zero_eta():
        scene, pump, k2 = random_dense_scene(rng)
        a = marginal_rate(pump, ScatteringSystem(scene.direct, scene.with_etas([0] * 3).paths), k2, scene.wall)
        b = marginal_rate(pump, scene.direct, k2, scene.wall)
        return _rel(a.values, b.values)

    record("zero_eta_matches_empty", 1e-12, zero_eta)

    def unitary_full_wall():
        g = GridSpec((16,), (1.0,))
        u = random_unitary(g, rng)
        g1 = coherence_kernel(u, DomainMask.full(g))
        eye = np.eye(g.size) / g.cell_measure
        pump = PumpProfile.from_field(random_field(g, rng))
        k2 = random_dense(g, g, rng)
        p = marginal_via_kernel(pump, g1, k2)
        s = singles_rate_detector2(pump, k2)
        return max(_rel(g1.values, eye), _rel(p.values, s.values))

    record("unitary_wall_gives_singles", 1e-9, unitary_full_wall)

    def baseline_invariance():
        scene, pump, k2 = random_dense_scene(rng)
        a = classical_factorized_marginal(pump, scene.direct, k2, scene.wall).normalized()
        h1 = ScatteringSystem(scene.direct, scene.paths)
        b = classical_factorized_marginal(pump, h1, k2, scene.wall).normalized()
        return float(np.abs(a - b).max())

    record("classical_baseline_invariant", 1e-12, baseline_invariance)

    def fresnel_critical():
        g = GridSpec((128,), (128 * 4e-6,))
        d = g.size * g.spacing[0] ** 2 / 5e-7
        sys = FresnelPropagation(g, 5e-7, d)
        c = (37,)
        resp = point_response(sys, c).values
        r2 = (g.axis(0) - g.axis(0)[37]) ** 2
        return _rel(resp, fresnel_kernel(5e-7, d, r2, 1))

    record("fresnel_point_response", 1e-12, fresnel_critical)
    return out
