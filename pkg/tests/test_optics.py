import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qholo.checks import adjoint_gap, random_dense, random_field, random_unitary, system_zoo
from qholo.grid import ComplexField, GridMismatchError, GridSpec, inner_product
from qholo.optics import (
    BudgetExceededError,
    Cascade,
    DenseKernel,
    Embed,
    FresnelPropagation,
    Identity,
    Mask,
    ThinLens,
    Transpose,
    apply_adjoint,
    apply_forward,
    cascade,
    compose,
    fresnel_kernel,
    kernel_rows,
    point_response,
    to_dense,
)

LAM = 5e-7
G256 = GridSpec((256,), (256 * 4e-6,))
DCRIT = 256 * (4e-6) ** 2 / LAM


def _rel(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


def explicit_fresnel_dense(grid, d):
    x = grid.axis(0)
    return DenseKernel(grid, grid, fresnel_kernel(LAM, d, (x[:, None] - x[None, :]) ** 2, 1))


def test_identity_forward_adjoint(rng):
    g = GridSpec((5, 3), (1.0, 1.0))
    f = random_field(g, rng)
    assert np.array_equal(apply_forward(Identity(g), f).values, f.values)
    assert np.array_equal(apply_adjoint(Identity(g), f).values, f.values)


def test_dense_identity_matrix_is_identity(rng):
    g = GridSpec((8,), (2.0,))
    k = DenseKernel(g, g, np.eye(8) / g.cell_measure)
    f = random_field(g, rng)
    assert np.allclose(apply_forward(k, f).values, f.values, rtol=1e-14)


@pytest.mark.parametrize("d", [DCRIT, 1.5 * DCRIT])
def test_fresnel_gaussian_matches_explicit_kernel(d):
    f = ComplexField.gaussian(G256, 40e-6, 20e-6)
    fast = apply_forward(FresnelPropagation(G256, LAM, d), f).values
    slow = apply_forward(explicit_fresnel_dense(G256, d), f).values
    assert _rel(fast, slow) <= 1e-7


def test_fresnel_adjoint_is_negative_distance(rng):
    g = GridSpec((64,), (64 * 4e-6,))
    p = FresnelPropagation(g, LAM, 1e-3)
    u = random_field(g, rng)
    back = apply_adjoint(p, u).values
    neg = apply_forward(FresnelPropagation(g, LAM, -1e-3), u).values
    assert _rel(back, neg) <= 1e-9
    # against the dense conjugate transpose of the explicit kernel at critical sampling
    dc = 64 * (4e-6) ** 2 / LAM
    k = explicit_fresnel_dense(g, dc)
    oracle = k.matrix.conj().T @ u.values * g.cell_measure
    assert _rel(apply_adjoint(FresnelPropagation(g, LAM, dc), u).values, oracle) <= 1e-9


def test_fresnel_zero_distance_rejected():
    with pytest.raises(ValueError):
        FresnelPropagation(G256, LAM, 0.0)


def test_mask_adjoint_conjugates(rng):
    g = GridSpec((7,), (1.0,))
    t, u = random_field(g, rng), random_field(g, rng)
    assert np.allclose(apply_adjoint(Mask(t), u).values, t.values.conj() * u.values, rtol=1e-15, atol=0)


def test_compose_rules(rng):
    g = GridSpec((16,), (1.0,))
    s = random_dense(g, g, rng)
    f = random_field(g, rng)
    assert _rel(apply_forward(compose(Identity(g), s), f).values, apply_forward(s, f).values) <= 1e-12
    gf = GridSpec((64,), (64 * 4e-6,))
    back = compose(FresnelPropagation(gf, LAM, -2e-3), FresnelPropagation(gf, LAM, 2e-3))
    v = random_field(gf, rng)
    assert _rel(apply_forward(back, v).values, v.values) <= 1e-9
    t1, t2 = random_field(g, rng), random_field(g, rng)
    m = compose(Mask(t2), Mask(t1))
    assert isinstance(m, Mask)
    assert np.abs(m.transmittance.values - t2.values * t1.values).max() <= 1e-12
    with pytest.raises(GridMismatchError):
        compose(s, Identity(GridSpec((8,), (1.0,))))


def test_cascade_order_and_adjoint(rng):
    g = GridSpec((12,), (1.0,))
    a, b = random_dense(g, g, rng), random_dense(g, g, rng)
    c = cascade(a, b)  # a first
    f = random_field(g, rng)
    expect = apply_forward(b, apply_forward(a, f)).values
    assert _rel(apply_forward(c, f).values, expect) <= 1e-12
    expect_adj = apply_adjoint(a, apply_adjoint(b, f)).values
    assert _rel(apply_adjoint(c, f).values, expect_adj) <= 1e-12


def test_point_response_kinds(rng):
    g = GridSpec((10,), (1.0,))
    assert np.array_equal(point_response(Identity(g), 3).values, ComplexField.delta(g, 3).values)
    k = random_dense(g, GridSpec((6,), (1.0,)), rng)
    assert np.allclose(point_response(k, 4).values, k.matrix[:, 4], rtol=1e-14)
    with pytest.raises(IndexError):
        point_response(k, 10)


def test_fresnel_point_response_is_closed_form_kernel():
    d = DCRIT
    resp = point_response(FresnelPropagation(G256, LAM, d), 100).values
    x = G256.axis(0)
    assert _rel(resp, fresnel_kernel(LAM, d, (x - x[100]) ** 2, 1)) <= 1e-7


def test_fresnel_point_response_2d():
    g = GridSpec((32, 32), (32 * 4e-6, 32 * 4e-6))
    d = 32 * (4e-6) ** 2 / LAM
    resp = point_response(FresnelPropagation(g, LAM, d), (10, 20)).values
    X, Y = g.coords()
    r2 = (X - X[10, 20]) ** 2 + (Y - Y[10, 20]) ** 2
    assert _rel(resp, fresnel_kernel(LAM, d, r2, 2)) <= 1e-7


def test_to_dense_examples(rng):
    g = GridSpec((8,), (2.0,))
    assert np.allclose(to_dense(Identity(g)).matrix, np.eye(8) / g.cell_measure)
    a, b = random_dense(g, g, rng), random_dense(g, g, rng)
    prod = to_dense(cascade(a, b)).matrix
    assert _rel(prod, b.matrix @ a.matrix * g.cell_measure) <= 1e-12
    t = random_field(g, rng)
    assert np.allclose(to_dense(Mask(t)).matrix, np.diag(t.values) / g.cell_measure)
    with pytest.raises(BudgetExceededError):
        to_dense(Identity(GridSpec((80, 80), (1.0, 1.0))))


def test_to_dense_matches_fast_paths(rng):
    for name, sys in system_zoo(rng).items():
        f = random_field(sys.input_grid, rng)
        dense = to_dense(sys)
        assert _rel(apply_forward(dense, f).values, apply_forward(sys, f).values) <= 1e-9, name


def test_kernel_rows_are_conjugate_adjoint_probes(rng):
    g = GridSpec((9,), (1.0,))
    k = random_dense(g, GridSpec((5,), (2.0,)), rng)
    rows = kernel_rows(k, [0, 3])
    assert np.allclose(rows, k.matrix[[0, 3]], rtol=1e-13)


@given(st.integers(0, 2**32 - 1))
def test_adjoint_identity_every_kind(seed):
    rng = np.random.default_rng(seed)
    for name, sys in system_zoo(rng).items():
        u = random_field(sys.output_grid, rng)
        v = random_field(sys.input_grid, rng)
        lhs = inner_product(u, apply_forward(sys, v))
        rhs = inner_product(apply_adjoint(sys, u), v)
        assert abs(lhs - rhs) <= 1e-10 * max(u.norm() * v.norm(), 1e-300) * 10 or adjoint_gap(sys, u.values, v.values) <= 1e-12, name


@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5))
def test_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    for name, sys in system_zoo(rng).items():
        f, g = random_field(sys.input_grid, rng), random_field(sys.input_grid, rng)
        lhs = apply_forward(sys, ComplexField(f.grid, alpha * f.values + beta * g.values)).values
        rhs = alpha * apply_forward(sys, f).values + beta * apply_forward(sys, g).values
        scale = (abs(alpha) + abs(beta) + 1) * (np.abs(apply_forward(sys, f).values).max() + np.abs(apply_forward(sys, g).values).max())
        assert np.abs(lhs - rhs).max() <= 1e-12 * scale, name


@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 5e-2))
def test_fresnel_unitary(seed, d):
    rng = np.random.default_rng(seed)
    g = GridSpec((16, 16), (6.4e-5, 6.4e-5))
    f = random_field(g, rng)
    out = apply_forward(FresnelPropagation(g, LAM, d), f)
    assert abs(out.norm() - f.norm()) <= 1e-10 * f.norm()


def test_thin_lens_is_pure_phase(rng):
    g = GridSpec((16, 16), (1e-4, 1e-4))
    f = random_field(g, rng)
    out = apply_forward(ThinLens(g, 1e-2, LAM), f).values
    assert np.array_equal(np.abs(out), np.abs(f.values)) or np.abs(np.abs(out) - np.abs(f.values)).max() <= 1e-15 * np.abs(f.values).max()


def test_embed_pads_and_crops(rng):
    small, big = GridSpec((4,), (4.0,)), GridSpec((8,), (8.0,))
    e = Embed(small, big)
    f = random_field(small, rng)
    out = apply_forward(e, f).values
    assert np.array_equal(out[2:6], f.values) and not out[:2].any() and not out[6:].any()
    assert np.array_equal(apply_adjoint(e, ComplexField(big, out)).values, f.values)
    with pytest.raises(GridMismatchError):
        Embed(small, GridSpec((8,), (4.0,)))


def test_transpose_swaps_kernel_indices(rng):
    k = random_dense(GridSpec((5,), (1.0,)), GridSpec((7,), (2.0,)), rng)
    t = to_dense(Transpose(k)).matrix
    assert _rel(t, k.matrix.T) <= 1e-13


def test_unitary_dense_preserves_norm(rng):
    g = GridSpec((16,), (1.0,))
    u = random_unitary(g, rng)
    f = random_field(g, rng)
    assert apply_forward(u, f).norm() == pytest.approx(f.norm(), rel=1e-12)


def test_cascade_rejects_mismatch(rng):
    with pytest.raises(GridMismatchError):
        Cascade((Identity(GridSpec((4,), (1.0,))), Identity(GridSpec((5,), (1.0,)))))
