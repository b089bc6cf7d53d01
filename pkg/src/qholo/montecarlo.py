"""Photon-pair event sampling and bucket histograms.

Events are drawn i.i.d. from the coincidence map restricted to the wall domain by
inverse-CDF lookup on the flattened mass function. Streams are generated in
fixed-size chunks; chunk ``k`` uses a Philox generator keyed with
``splitmix64(seed + GOLDEN * (k + 1))``, so the stream depends only on
``(seed, n)`` and never on how many workers produced it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .biphoton import CoincidenceMap, require_positive_mass
from .grid import DegenerateInputError, DomainMask, GridSpec, require_same_grid
from .hologram import Hologram

RNG_NAME = "philox4x64-splitmix64"
CHUNK_EVENTS = 1 << 20
MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """The SplitMix64 finalizer on a 64-bit integer."""
    x = (x + GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def sub_seed(seed: int, chunk: int) -> int:
    return splitmix64((seed + GOLDEN * (chunk + 1)) & MASK64)


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=sub_seed(seed, chunk)))


@dataclass(frozen=True, eq=False)
class EventStream:
    seed: int
    x1: np.ndarray = field(repr=False)  # flat wall-cell index
    x2: np.ndarray = field(repr=False)  # flat detector-cell index
    wall_grid: GridSpec | None = None
    detector_grid: GridSpec | None = None
    rng_name: str = RNG_NAME

    @property
    def n(self) -> int:
        return len(self.x1)


@dataclass(frozen=True, eq=False)
class HistogramEstimate:
    grid: GridSpec
    counts: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def estimate(self) -> np.ndarray:
        """Density estimate of the marginal shape; integrates to one over the grid."""
        return self.counts / (self.n * self.grid.cell_measure)


@dataclass(frozen=True)
class ConvergenceReport:
    n: int
    l1: float
    ks: float
    max_abs: float


def sample_pairs(
    p: CoincidenceMap, wall: DomainMask, n: int, seed: int, threads: int = 1, chunk_events: int = CHUNK_EVENTS
) -> EventStream:
    if n < 1:
        raise ValueError("need at least one event")
    require_same_grid(p.wall_grid, wall.grid)
    require_positive_mass(p, wall)
    seed = int(seed) & MASK64
    wall_cells = np.flatnonzero(wall.member.ravel())
    mass = p.values[wall_cells].ravel()
    cdf = np.cumsum(mass)
    cdf /= cdf[-1]
    n2 = p.values.shape[1]
    starts = list(range(0, n, chunk_events))

    def draw(k):
        size = min(chunk_events, n - starts[k])
        u = chunk_generator(seed, k).random(size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(draw, range(len(starts))))
    else:
        parts = [draw(k) for k in range(len(starts))]
    flat = np.concatenate(parts)
    x1 = wall_cells[flat // n2].astype(np.uint32)
    x2 = (flat % n2).astype(np.uint32)
    return EventStream(seed, x1, x2, p.wall_grid, p.detector_grid)


def bucket_histogram(s: EventStream, grid: GridSpec | None = None) -> HistogramEstimate:
    """Discard the bucket coordinate and bin photon 2."""
    grid = grid or s.detector_grid
    if grid is None:
        raise ValueError("a detector grid is required")
    counts = np.bincount(s.x2, minlength=grid.size).reshape(grid.shape)
    return HistogramEstimate(grid, counts)


def convergence_report(est: HistogramEstimate, truth: Hologram) -> ConvergenceReport:
    require_same_grid(est.grid, truth.grid)
    if est.n == 0:
        raise DegenerateInputError("empty histogram")
    a = (est.counts / est.n).ravel()
    b = truth.normalized().ravel()
    return ConvergenceReport(
        n=est.n,
        l1=float(np.abs(a - b).sum()),
        ks=float(np.abs(np.cumsum(a) - np.cumsum(b)).max()),
        max_abs=float(np.abs(a - b).max()),
    )
