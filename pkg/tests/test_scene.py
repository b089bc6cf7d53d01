import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qholo.biphoton import PumpProfile, marginal_rate
from qholo.checks import random_dense, random_dense_scene, random_field, random_unitary
from qholo.config import build, preset
from qholo.grid import ComplexField, DomainMask, GridSpec
from qholo.optics import FresnelPropagation, Identity, apply_forward, point_response, to_dense
from qholo.oracle import dense_decomposition
from qholo.scene import (
    ChamberGeometry,
    PointScatterer,
    Scene,
    ScattererPath,
    ScatteringSystem,
    build_scene,
    effective_h1,
    f_kernel,
    hologram_decomposition,
    illumination_amplitude,
    q_field,
    r_field,
    wall_overlap,
)

G = GridSpec((16,), (1.0,))


def _rel(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


def _identity_scene(cell=5, eta=0.3):
    path = ScattererPath(eta, (cell,), Identity(G), Identity(G))
    return Scene(Identity(G), DomainMask.full(G), (path,))


def test_effective_h1_empty_and_zero_eta(rng):
    scene, pump, _ = random_dense_scene(rng)
    f = random_field(G, rng)
    h0 = apply_forward(scene.direct, f).values
    empty = apply_forward(effective_h1(scene.without_scatterers()), f).values
    assert _rel(empty, h0) <= 1e-12
    zero = apply_forward(effective_h1(scene.with_etas([0, 0, 0])), f).values
    assert _rel(zero, h0) <= 1e-12


def test_effective_h1_rank_one_update(rng):
    scene, _, _ = random_dense_scene(rng, n_scatterers=1)
    p = scene.paths[0]
    c = p.cell[0]
    ki, ks = p.illumination.matrix, p.reradiation.matrix
    oracle = scene.direct.matrix + p.eta * p.plane.cell_measure * np.outer(ks[:, c], ki[c, :])
    assert _rel(to_dense(effective_h1(scene)).matrix, oracle) <= 1e-10


def test_scatterer_outside_plane_rejected():
    with pytest.raises(IndexError):
        ScattererPath(0.1, (16,), Identity(G), Identity(G))


def test_illumination_amplitude_examples(rng):
    scene = _identity_scene()
    delta = PumpProfile.from_field(ComplexField.delta(G, 5), normalize_=False)
    assert illumination_amplitude(scene, 0, delta) == pytest.approx(1.0)
    zero = PumpProfile.from_field(ComplexField.zeros(G), normalize_=False)
    assert illumination_amplitude(scene, 0, zero) == 0
    dense, pump, _ = random_dense_scene(rng)
    p = dense.paths[1]
    hand = sum(p.illumination.matrix[p.cell[0], x] * pump.values[x] for x in range(16)) * G.cell_measure
    assert abs(illumination_amplitude(dense, 1, pump) - hand * p.plane.cell_measure) <= 1e-12 * abs(hand * p.plane.cell_measure)
    with pytest.raises(IndexError):
        illumination_amplitude(dense, 3, pump)


def test_q_field_examples(rng):
    scene = _identity_scene()
    pump = PumpProfile.from_field(random_field(G, rng))
    q = q_field(scene, 0, pump, Identity(G)).values
    expect = np.zeros(16, complex)
    expect[5] = pump.values[5] / G.cell_measure
    assert np.allclose(q, expect, rtol=1e-13, atol=0)
    gf = GridSpec((64,), (64 * 4e-6,))
    fres = FresnelPropagation(gf, 5e-7, 1e-3)
    s = Scene(Identity(gf), DomainMask.full(gf), (ScattererPath(0.1, (20,), Identity(gf), Identity(gf)),))
    ones = PumpProfile.from_field(ComplexField.ones(gf), normalize_=False)
    assert _rel(q_field(s, 0, ones, fres).values, point_response(fres, 20).values) <= 1e-10


def test_f_kernel_examples(rng):
    f = f_kernel(_identity_scene(), 0).values
    assert np.allclose(f, ComplexField.delta(G, 5).values, rtol=1e-13)
    u = random_unitary(G, rng)
    s = Scene(u, DomainMask.full(G), (ScattererPath(0.2, (9,), Identity(G), u),))
    assert np.abs(f_kernel(s, 0).values - ComplexField.delta(G, 9).values).max() <= 1e-9 / G.cell_measure


def test_r_field_examples(rng):
    pump = PumpProfile.from_field(random_field(G, rng))
    r = r_field(_identity_scene(), 0, pump, Identity(G)).values
    expect = np.zeros(16, complex)
    expect[5] = pump.values[5] / G.cell_measure**2 * G.cell_measure
    assert np.allclose(r, expect * 1.0, rtol=1e-13, atol=0)
    zero = PumpProfile.from_field(ComplexField.zeros(G), normalize_=False)
    assert not r_field(_identity_scene(), 0, zero, Identity(G)).values.any()


def test_terms_match_dense_oracle(rng):
    scene, pump, k2 = random_dense_scene(rng, n_scatterers=2)
    d = hologram_decomposition(scene, pump, k2)
    o = dense_decomposition(scene, pump.field, k2)
    for j in range(2):
        assert _rel(d.q[j].values, o.q[j]) <= 1e-10
        assert _rel(d.r[j].values, o.r[j]) <= 1e-10
        assert _rel(f_kernel(scene, j).values, o.f[j]) <= 1e-10
    assert _rel(wall_overlap(scene), o.overlap) <= 1e-10
    assert _rel(d.direct.values, o.direct) <= 1e-10
    assert _rel(d.scattered.values, o.scattered) <= 1e-10
    assert _rel(d.interference, o.interference) <= 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_master_identity_random_dense(seed, n):
    rng = np.random.default_rng(seed)
    scene, pump, k2 = random_dense_scene(rng, n_scatterers=n)
    d = hologram_decomposition(scene, pump, k2)
    full = marginal_rate(pump, effective_h1(scene), k2, scene.wall).values
    assert np.abs(d.total() - full).max() <= 1e-9 * full.max()


@pytest.mark.parametrize("name", ["fig1", "recon2d"])
def test_master_identity_presets(name):
    cfg = preset(name)
    scene, pump, h2 = build(cfg)
    d = hologram_decomposition(scene, pump, h2)
    full = marginal_rate(pump, effective_h1(scene), h2, scene.wall).values
    assert np.abs(d.total() - full).max() <= 1e-9 * full.max()


def test_empty_scene_decomposition(rng):
    scene, pump, k2 = random_dense_scene(rng, n_scatterers=0)
    d = hologram_decomposition(scene, pump, k2)
    assert not d.scattered.values.any() and not d.interference.any()
    assert np.array_equal(d.direct.values, marginal_rate(pump, scene.direct, k2, scene.wall).values)


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_homogeneity_in_eta(rng, c):
    scene, pump, k2 = random_dense_scene(rng, n_scatterers=2)
    a = hologram_decomposition(scene, pump, k2)
    b = hologram_decomposition(scene.scaled(c), pump, k2)
    assert _rel(b.scattered.values, c**2 * a.scattered.values) <= 1e-10
    assert _rel(b.interference, c * a.interference) <= 1e-10


def test_single_scatterer_has_no_cross_terms(rng):
    scene, pump, k2 = random_dense_scene(rng, n_scatterers=1)
    d = hologram_decomposition(scene, pump, k2)
    single = np.abs(d.strengths[0]) ** 2 * d.wall_weights[0] * np.abs(d.q[0].values) ** 2
    assert _rel(d.scattered.values, single) <= 1e-12


def test_superposition_failure_is_the_cross_term(rng):
    scene, pump, k2 = random_dense_scene(rng, n_scatterers=2)
    both = hologram_decomposition(scene, pump, k2)
    singles = [
        hologram_decomposition(Scene(scene.direct, scene.wall, (p,)), pump, k2).scattered.values for p in scene.paths
    ]
    excess = both.scattered.values - sum(singles)
    assert np.abs(excess - both.cross_terms()).max() <= 1e-9 * both.scattered.values.max()
    assert np.abs(excess).max() > 1e-6 * both.scattered.values.max()


def test_rebuild_is_bitwise_deterministic():
    cfg = preset("fig1")
    a, _, _ = build(cfg)
    b, _, _ = build(cfg)
    assert np.array_equal(to_dense(effective_h1(a)).matrix, to_dense(effective_h1(b)).matrix)
    assert a.digest() == b.digest()


def test_snap_offset_recorded():
    g = GridSpec((32,), (32e-6,))
    geo = ChamberGeometry(5e-7, g, g, 1e-4, 1e-3)
    scene = build_scene(geo, [PointScatterer((3.3e-6,), 2e-4, 0.1)], DomainMask.full(g))
    p = scene.paths[0]
    assert p.cell == (19,) and p.snap_offset[0] == pytest.approx(0.3e-6)
    with pytest.raises(ValueError):
        build_scene(geo, [PointScatterer((0.0,), 2e-3, 0.1)], DomainMask.full(g))
