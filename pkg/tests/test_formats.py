import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qholo.checks import random_dense, random_field
from qholo.formats import (
    FormatError,
    csv_to_map,
    events_from_bytes,
    events_to_bytes,
    field_from_bytes,
    field_to_bytes,
    fmt,
    kernel_from_bytes,
    kernel_to_bytes,
    map_to_csv,
    pgm16,
    read_pgm16,
    read_field,
    write_field,
)
from qholo.grid import GridSpec
from qholo.montecarlo import EventStream


@given(st.integers(0, 2**32 - 1), st.sampled_from([(5,), (3, 4)]), st.floats(1e-6, 1e3))
def test_qhf1_bit_exact(seed, shape, ext):
    rng = np.random.default_rng(seed)
    g = GridSpec(shape, (ext,) * len(shape))
    f = random_field(g, rng)
    data = field_to_bytes(f)
    assert data.startswith(b"QHF1 " + str(len(shape)).encode())
    back = field_from_bytes(data)
    assert back.grid == g and back.values.tobytes() == f.values.tobytes()
    assert field_to_bytes(back) == data


def test_qhf1_file_and_errors(tmp_path, rng):
    g = GridSpec((4, 4), (1.0, 2.0))
    f = random_field(g, rng)
    write_field(tmp_path / "f.qhf", f)
    assert np.array_equal(read_field(tmp_path / "f.qhf").values, f.values)
    with pytest.raises(FormatError):
        field_from_bytes(b"QHK1 1 1\n")
    with pytest.raises(FormatError):
        field_from_bytes(field_to_bytes(f)[:-16])


def test_qhk1_round_trip(rng):
    gi, go = GridSpec((3,), (1.0,)), GridSpec((5,), (1.0,))
    k = random_dense(gi, go, rng)
    data = kernel_to_bytes(k)
    assert data.startswith(b"QHK1 5 3\n") and len(data) == len(b"QHK1 5 3\n") + 15 * 8
    back = kernel_from_bytes(data, gi, go)
    assert np.allclose(back.matrix, k.matrix, rtol=1e-6)


def test_qhe1_round_trip():
    s = EventStream(42, np.array([1, 2, 3], np.uint32), np.array([7, 8, 9], np.uint32), rng_name="philox4x64-splitmix64")
    data = events_to_bytes(s)
    assert data.startswith(b"QHE1 3 42 philox4x64-splitmix64\n")
    back = events_from_bytes(data)
    assert back.seed == 42 and np.array_equal(back.x1, s.x1) and np.array_equal(back.x2, s.x2)


def test_csv_17_digits_round_trip(rng):
    g = GridSpec((6,), (1.0,))
    v = rng.random(6)
    text = map_to_csv(g, v, header=True)
    assert text.splitlines()[0] == "x2,value"
    assert np.array_equal(csv_to_map(text), v)
    assert fmt(0.1) == "0.10000000000000001"
    g2 = GridSpec((2, 3), (1.0, 1.0))
    assert map_to_csv(g2, np.zeros(6), header=True).splitlines()[0] == "x2,y2,value"


def test_pgm16(rng):
    img = rng.random((5, 7))
    data, lo, hi = pgm16(img)
    assert data.startswith(b"P5\n7 5\n65535\n")
    pix = read_pgm16(data)
    assert pix.max() == 65535 and pix.min() == 0
    assert np.allclose(lo + pix / 65535 * (hi - lo), img, atol=(hi - lo) / 65535)
    flat, lo, hi = pgm16(np.ones((2, 2)))
    assert not read_pgm16(flat).any() and lo == hi == 1.0
