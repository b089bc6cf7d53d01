import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qholo.checks import random_field
from qholo.grid import (
    ComplexField,
    DegenerateInputError,
    DomainMask,
    GridMismatchError,
    GridSpec,
    inner_product,
    normalize,
    pointwise_multiply,
    restrict,
)

G8 = GridSpec((8,), (2.0,))
G2 = GridSpec((6, 4), (3.0, 1.0))


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec((1,), (1.0,))
    with pytest.raises(ValueError):
        GridSpec((4,), (0.0,))
    with pytest.raises(ValueError):
        GridSpec((4, 4, 4), (1.0, 1.0, 1.0))
    assert G2.cell_measure == 0.5 * 0.25
    assert G8.spacing == (0.25,)


def test_axis_centred_on_middle_cell():
    ax = G8.axis(0)
    assert ax[4] == 0.0
    assert np.allclose(np.diff(ax), 0.25)


def test_index_of_snaps_and_reports_offset():
    cell, off = G8.index_of([0.3])
    assert cell == (5,)
    assert off[0] == pytest.approx(0.05)
    with pytest.raises(IndexError):
        G8.index_of([5.0])


def test_inner_product_unit_field():
    f = normalize(ComplexField.gaussian(G8, 0.5))
    assert inner_product(f, f) == pytest.approx(1.0, abs=1e-14)


def test_inner_product_disjoint_supports():
    a = ComplexField(G8, np.r_[np.ones(4), np.zeros(4)])
    b = ComplexField(G8, np.r_[np.zeros(4), np.ones(4)])
    assert inner_product(a, b) == 0


def test_inner_product_hand_sum(rng):
    a, b = random_field(G8, rng), random_field(G8, rng)
    hand = 0j
    for i in range(8):
        hand += a.values[i].conjugate() * b.values[i] * 0.25
    assert abs(inner_product(a, b) - hand) < 1e-14


def test_inner_product_mask_and_mismatch(rng):
    a, b = random_field(G8, rng), random_field(G8, rng)
    m = DomainMask(G8, np.arange(8) < 3)
    assert inner_product(a, b, m) == pytest.approx(np.sum(a.values[:3].conj() * b.values[:3]) * 0.25)
    with pytest.raises(GridMismatchError):
        inner_product(a, random_field(GridSpec((8,), (3.0,)), rng))


@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_inner_product_sesquilinear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    a, b, c = (random_field(G2, rng) for _ in range(3))
    lin = inner_product(a, ComplexField(G2, alpha * b.values + beta * c.values))
    assert abs(lin - (alpha * inner_product(a, b) + beta * inner_product(a, c))) <= 1e-12 * (1 + abs(lin)) * 50
    anti = inner_product(ComplexField(G2, alpha * b.values), a)
    assert abs(anti - np.conj(alpha) * inner_product(b, a)) <= 1e-12 * (1 + abs(anti)) * 50
    assert inner_product(a, b) == pytest.approx(np.conj(inner_product(b, a)), rel=1e-14)


def test_normalize_constant_and_idempotent():
    g = GridSpec((10,), (1.0,))
    n = normalize(ComplexField.ones(g))
    assert np.allclose(n.values, 1.0, atol=1e-15)
    again = normalize(n)
    assert np.abs(again.values - n.values).max() <= 1e-12


def test_normalize_gaussian_direct_sum():
    g = GridSpec((64,), (6.4,))
    f = normalize(ComplexField.gaussian(g, 0.7, 0.3))
    total = sum(abs(v) ** 2 for v in f.values) * g.cell_measure
    assert abs(total - 1.0) <= 1e-12
    ratio = f.values / ComplexField.gaussian(g, 0.7, 0.3).values
    assert np.allclose(ratio, ratio[0]) and ratio[0].real > 0 and ratio[0].imag == 0


def test_normalize_zero_raises():
    with pytest.raises(DegenerateInputError):
        normalize(ComplexField.zeros(G8))


def test_pointwise_multiply(rng):
    f, g = random_field(G2, rng), random_field(G2, rng)
    assert np.array_equal(pointwise_multiply(f, ComplexField.ones(G2)).values, f.values)
    assert not pointwise_multiply(f, ComplexField.zeros(G2)).values.any()
    prod = pointwise_multiply(f, g).values
    for i in range(6):
        for j in range(4):
            assert abs(prod[i, j] - f.values[i, j] * g.values[i, j]) <= 1e-15 * abs(prod[i, j])
    assert np.allclose(prod, pointwise_multiply(g, f).values, rtol=1e-15, atol=0)
    with pytest.raises(GridMismatchError):
        pointwise_multiply(f, random_field(G8, rng))


def test_restrict(rng):
    f = random_field(G2, rng)
    full = DomainMask.full(G2)
    assert np.array_equal(restrict(f, full).values, f.values)
    half = DomainMask(G2, G2.coords()[0] < 0)
    r = restrict(f, half)
    assert not r.values[~half.member].any()
    assert np.array_equal(r.values[half.member], f.values[half.member])
    assert np.array_equal(restrict(r, half).values, r.values)


def test_domain_mask_rules():
    with pytest.raises(DegenerateInputError):
        DomainMask(G8, np.zeros(8, bool))
    box = DomainMask.box(G8, -0.3, 0.3)
    assert box.count == 3 and box.measure == pytest.approx(0.75)
    assert box.union(DomainMask.full(G8)).count == 8


def test_field_rejects_non_finite():
    with pytest.raises(ValueError):
        ComplexField(G8, np.r_[np.nan, np.zeros(7)])
    with pytest.raises(ValueError):
        ComplexField(G8, np.zeros(7))


def test_delta_integrates_to_one():
    d = ComplexField.delta(G2, (2, 1))
    assert d.values.sum() * G2.cell_measure == pytest.approx(1.0)
    with pytest.raises(IndexError):
        ComplexField.delta(G2, (6, 0))
