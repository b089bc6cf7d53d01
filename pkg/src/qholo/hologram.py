"""The recorded bucket hologram: a nonnegative real map on the detector-2 grid."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec

NEGATIVE_FLOOR = 1e-15


def digest(*parts) -> str:
    """Short SHA-256 over arrays, strings and numbers, in order."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            a = np.ascontiguousarray(p)
            h.update(str((a.dtype.str, a.shape)).encode())
            h.update(a.tobytes())
        else:
            h.update(repr(p).encode())
    return h.hexdigest()[:16]


def clamp_nonnegative(values: np.ndarray, scale: float | None = None) -> np.ndarray:
    """Clip rounding-level negatives to zero; anything larger is a bug upstream."""
    values = np.asarray(values, dtype=float)
    if scale is None:
        scale = float(np.abs(values).max(initial=0.0))
    floor = -NEGATIVE_FLOOR * max(scale, 1.0) * 64
    if values.size and values.min() < floor:
        raise ValueError(f"hologram value {values.min()} is negative beyond rounding")
    return np.maximum(values, 0.0)


@dataclass(frozen=True, eq=False)
class Hologram:
    grid: GridSpec
    values: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"{v.size} values for a grid of {self.grid.size} cells")
        v = clamp_nonnegative(v.reshape(self.grid.shape))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def total(self) -> float:
        return float(self.values.sum() * self.grid.cell_measure)

    def normalized(self) -> np.ndarray:
        """Shape of the map as a probability mass over cells (sums to one)."""
        s = self.values.sum()
        if s == 0:
            raise ValueError("cannot normalize an all-zero hologram")
        return self.values / s
