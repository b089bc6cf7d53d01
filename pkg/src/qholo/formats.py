"""Binary and text artifact formats.

QHF1  raw complex field: ASCII header ``QHF1 <ndim> <n1> [n2] <ext1> [ext2]`` and a
      newline, then little-endian float64 (re, im) pairs in row-major order.
QHK1  dense kernel: header ``QHK1 <n_out> <n_in>``, then little-endian complex64
      entries, row-major.
QHE1  event stream: header ``QHE1 <n> <seed> <rng-name>``, then little-endian
      uint32 (x1, x2) pairs.
Text outputs use 17 significant digits.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .grid import ComplexField, GridSpec
from .hologram import Hologram
from .montecarlo import EventStream
from .optics import DenseKernel


class FormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _read_header(data: bytes, magic: str) -> tuple[list[str], bytes]:
    head, sep, body = data.partition(b"\n")
    if not sep:
        raise FormatError("missing header line")
    words = head.decode("ascii").split()
    if not words or words[0] != magic:
        raise FormatError(f"expected {magic} header, got {head[:32]!r}")
    return words[1:], body


def field_to_bytes(f: ComplexField) -> bytes:
    g = f.grid
    head = ["QHF1", str(g.ndim), *map(str, g.shape), *map(repr, g.extent)]
    body = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    return (" ".join(head) + "\n").encode("ascii") + body


def field_from_bytes(data: bytes) -> ComplexField:
    words, body = _read_header(data, "QHF1")
    ndim = int(words[0])
    if len(words) != 1 + 2 * ndim:
        raise FormatError("malformed QHF1 header")
    shape = tuple(int(w) for w in words[1 : 1 + ndim])
    extent = tuple(float(w) for w in words[1 + ndim :])
    values = np.frombuffer(body, dtype="<c16")
    if values.size != int(np.prod(shape)):
        raise FormatError(f"QHF1 body holds {values.size} values, header says {shape}")
    return ComplexField(GridSpec(shape, extent), values.reshape(shape).astype(complex))


def write_field(path: Path | str, f: ComplexField) -> None:
    Path(path).write_bytes(field_to_bytes(f))


def read_field(path: Path | str) -> ComplexField:
    return field_from_bytes(Path(path).read_bytes())


def kernel_to_bytes(k: DenseKernel) -> bytes:
    n_out, n_in = k.matrix.shape
    return f"QHK1 {n_out} {n_in}\n".encode("ascii") + np.ascontiguousarray(k.matrix, dtype="<c8").tobytes()


def kernel_from_bytes(data: bytes, input_grid: GridSpec, output_grid: GridSpec) -> DenseKernel:
    words, body = _read_header(data, "QHK1")
    n_out, n_in = int(words[0]), int(words[1])
    m = np.frombuffer(body, dtype="<c8")
    if m.size != n_out * n_in:
        raise FormatError("QHK1 body size does not match header")
    return DenseKernel(input_grid, output_grid, m.reshape(n_out, n_in).astype(complex))


def events_to_bytes(s: EventStream) -> bytes:
    pairs = np.empty((s.n, 2), dtype="<u4")
    pairs[:, 0] = s.x1
    pairs[:, 1] = s.x2
    return f"QHE1 {s.n} {s.seed} {s.rng_name}\n".encode("ascii") + pairs.tobytes()


def events_from_bytes(data: bytes) -> EventStream:
    words, body = _read_header(data, "QHE1")
    n, seed, name = int(words[0]), int(words[1]), words[2]
    pairs = np.frombuffer(body, dtype="<u4")
    if pairs.size != 2 * n:
        raise FormatError("QHE1 body size does not match header")
    pairs = pairs.reshape(n, 2)
    return EventStream(seed, pairs[:, 0].copy(), pairs[:, 1].copy(), rng_name=name)


def map_to_csv(grid: GridSpec, values: np.ndarray, header: bool = False) -> str:
    """``x2,value`` lines (``x2,y2,value`` on 2-D grids) at 17 significant digits."""
    coords = [c.ravel() for c in grid.coords()]
    values = np.asarray(values, dtype=float).ravel()
    out = io.StringIO()
    if header:
        out.write(",".join(["x2", "y2"][: grid.ndim] + ["value"]) + "\n")
    for i in range(grid.size):
        out.write(",".join([fmt(c[i]) for c in coords] + [fmt(values[i])]) + "\n")
    return out.getvalue()


def csv_to_map(text: str, ndim: int = 1) -> np.ndarray:
    rows = [line.split(",") for line in text.splitlines() if line and not line[0].isalpha()]
    return np.array([float(r[ndim]) for r in rows])


def hologram_to_qhf(h: Hologram) -> bytes:
    return field_to_bytes(ComplexField(h.grid, h.values.astype(complex)))


def pgm16(image: np.ndarray) -> tuple[bytes, float, float]:
    """Binary 16-bit PGM with linear min-max scaling; returns bytes and the range."""
    image = np.atleast_2d(np.asarray(image, dtype=float))
    lo, hi = float(image.min()), float(image.max())
    span = hi - lo
    scaled = np.zeros(image.shape) if span == 0 else (image - lo) / span * 65535.0
    pix = np.round(scaled).astype(">u2")
    h, w = image.shape
    return f"P5\n{w} {h}\n65535\n".encode("ascii") + pix.tobytes(), lo, hi


def read_pgm16(data: bytes) -> np.ndarray:
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise FormatError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 65535:
        raise FormatError("expected 16-bit PGM")
    return np.frombuffer(parts[4], dtype=">u2").reshape(h, w)
