"""Brute-force reference implementations.

Everything here is written as explicit loops over cells on dense kernels, with no
transforms and no reuse of the fast paths beyond the grid types. Each routine is
the literal midpoint quadrature of the quantity it names, so it is slow and only
meant for small planes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .grid import ComplexField, DomainMask, GridSpec
from .hologram import Hologram
from .optics import BudgetExceededError, DenseKernel, OpticalSystem, to_dense


@dataclass(frozen=True)
class OracleBudget:
    max_cells: int = 4096
    max_bytes: int = 256 * 2**20

    def __post_init__(self):
        if self.max_cells <= 0 or self.max_bytes <= 0:
            raise ValueError("oracle caps must be positive")

    def check(self, *grids: GridSpec) -> None:
        for g in grids:
            if g.size > self.max_cells:
                raise BudgetExceededError(f"plane of {g.size} cells exceeds oracle cap {self.max_cells}")
        sizes = [g.size for g in grids]
        largest = max(a * b for a in sizes for b in sizes) * 16
        if largest > self.max_bytes:
            raise BudgetExceededError(f"dense matrices of {largest} bytes exceed cap {self.max_bytes}")

    def dense(self, sys: OpticalSystem) -> DenseKernel:
        self.check(sys.input_grid, sys.output_grid)
        return to_dense(sys, self.max_cells)


DEFAULT_BUDGET = OracleBudget()


def _order(n: int, shuffle: random.Random | None) -> list[int]:
    idx = list(range(n))
    if shuffle is not None:
        shuffle.shuffle(idx)
    return idx


def _members(wall: DomainMask) -> list[int]:
    return [i for i, m in enumerate(wall.member.ravel().tolist()) if m]


def dense_amplitude(
    zeta: ComplexField, k1: DenseKernel, k2: DenseKernel, x1: int, x2: int, shuffle: random.Random | None = None
) -> complex:
    """``sum_x h1(x1, x) zeta(x) h2(x2, x) dA`` by a scalar loop."""
    z = zeta.values.ravel().tolist()
    m1, m2 = k1.matrix, k2.matrix
    acc = 0j
    for x in _order(len(z), shuffle):
        acc += complex(m1[x1, x]) * z[x] * complex(m2[x2, x])
    return acc * zeta.grid.cell_measure


def dense_marginal(
    zeta: ComplexField,
    k1: DenseKernel,
    k2: DenseKernel,
    wall: DomainMask,
    budget: OracleBudget = DEFAULT_BUDGET,
    shuffle: random.Random | None = None,
) -> Hologram:
    """Bucket marginal by the triple loop over (x2, x1 in wall, x)."""
    budget.check(zeta.grid, k1.output_grid, k2.output_grid)
    members = _members(wall)
    dA = wall.grid.cell_measure
    n2 = k2.output_grid.size
    out = np.zeros(n2)
    for x2 in range(n2):
        acc = 0.0
        for j in _order(len(members), shuffle):
            a = dense_amplitude(zeta, k1, k2, members[j], x2, shuffle)
            acc += a.real**2 + a.imag**2
        out[x2] = acc * dA
    return Hologram(k2.output_grid, out.reshape(k2.output_grid.shape), {"scale": "unnormalized", "oracle": True})


@dataclass(frozen=True, eq=False)
class DenseDecomposition:
    direct: np.ndarray
    scattered: np.ndarray
    interference: np.ndarray
    q: np.ndarray  # [j, x2]
    r: np.ndarray  # [j, x2]
    f: np.ndarray  # [j, x]
    overlap: np.ndarray  # [i, j]
    strengths: np.ndarray

    def total(self) -> np.ndarray:
        return self.direct + self.scattered + self.interference


def dense_decomposition(scene, zeta: ComplexField, k2: DenseKernel, budget: OracleBudget = DEFAULT_BUDGET) -> DenseDecomposition:
    """Direct, scattered and interference terms by literal quadrature on dense kernels.

    For every scatterer ``j`` with strength ``a_j = eta_j dA_j`` at cell ``c_j``:

        q_j(x2)  = sum_x h2(x2, x) zeta(x) hI_j(c_j, x) dA
        f_j(x)   = sum_{x1 in wall} conj(h0(x1, x)) hS_j(x1, c_j) dA_wall
        r_j(x2)  = sum_x h2(x2, x) zeta(x) conj(f_j(x)) dA
        W_ij     = sum_{x1 in wall} conj(hS_i(x1, c_i)) hS_j(x1, c_j) dA_wall
    """
    k0 = budget.dense(scene.direct)
    src = zeta.grid
    dA, dAw = src.cell_measure, scene.wall.grid.cell_measure
    members = _members(scene.wall)
    z = zeta.values.ravel().tolist()
    n_src, n2 = src.size, k2.output_grid.size
    m0, m2 = k0.matrix, k2.matrix

    direct = np.zeros(n2)
    for x2 in range(n2):
        acc = 0.0
        for x1 in members:
            a = sum(complex(m0[x1, x]) * z[x] * complex(m2[x2, x]) for x in range(n_src)) * dA
            acc += abs(a) ** 2
        direct[x2] = acc * dAw

    nj = len(scene.paths)
    q = np.zeros((nj, n2), complex)
    r = np.zeros((nj, n2), complex)
    f = np.zeros((nj, n_src), complex)
    cols = []
    strengths = np.zeros(nj, complex)
    for j, p in enumerate(scene.paths):
        ki = budget.dense(p.illumination).matrix
        ks = budget.dense(p.reradiation).matrix
        c = int(np.ravel_multi_index(p.cell, p.plane.shape))
        strengths[j] = p.eta * p.plane.cell_measure
        col = [complex(ks[x1, c]) for x1 in range(ks.shape[0])]
        cols.append(col)
        for x in range(n_src):
            f[j, x] = sum(complex(np.conj(m0[x1, x])) * col[x1] for x1 in members) * dAw
        for x2 in range(n2):
            q[j, x2] = sum(complex(m2[x2, x]) * z[x] * complex(ki[c, x]) for x in range(n_src)) * dA
            r[j, x2] = sum(complex(m2[x2, x]) * z[x] * complex(np.conj(f[j, x])) for x in range(n_src)) * dA

    overlap = np.zeros((nj, nj), complex)
    for i in range(nj):
        for j in range(nj):
            overlap[i, j] = sum(cols[i][x1].conjugate() * cols[j][x1] for x1 in members) * dAw

    scattered = np.zeros(n2)
    interference = np.zeros(n2)
    for x2 in range(n2):
        s = 0j
        for i in range(nj):
            for j in range(nj):
                s += (strengths[i] * q[i, x2]).conjugate() * overlap[i, j] * strengths[j] * q[j, x2]
        scattered[x2] = s.real
        interference[x2] = 2.0 * sum(
            (strengths[j].conjugate() * q[j, x2].conjugate() * r[j, x2]).real for j in range(nj)
        )
    shape = k2.output_grid.shape
    return DenseDecomposition(
        direct.reshape(shape), scattered.reshape(shape), interference.reshape(shape), q, r, f, overlap, strengths
    )

