import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annulus_lab.grid import AnnulusSpec, Field, annulus_grid, disk_grid, sample
from annulus_lab.quantization import (EIGHT_PI, FOUR_PI, BubbleSpec, SyntheticSequence, angular_quantization_check,
                                      build_bubble_tree, bubble_on_bubble, center_and_scale, contour_energy,
                                      detect_concentration, dyadic_profile, dyadic_radii, energy_density,
                                      neck_report, omega_density, one_bubble, partition_masses, patch_grid,
                                      pohozaev_profile, pohozaev_residual, quantization_residual, radii_partition,
                                      two_bubbles, weak_l2_check)
from annulus_lab.spheremaps import bubble, equator_field, map_density, map_field, map_gradient, random_rational_map


def log_field(g):
    return sample(g, lambda x, y: 0.5 * np.log(x**2 + y**2))


def bubble_band_energy(mu, a, b):
    # int_{a<rho<b} 8 mu^2 / (mu^2 + rho^2)^2 dA
    return EIGHT_PI * mu**2 * (1 / (mu**2 + a**2) - 1 / (mu**2 + b**2))


# ---------------------------------------------------------- densities
def test_energy_and_omega_density():
    g = annulus_grid(0.1, 1.0, n_theta=32, per_octave=32)
    f = bubble(2, 0.3, 0.05)
    u, gu = map_field(f, g), map_gradient(f, g)
    e = energy_density(u, gu)
    assert np.allclose(e, map_density(f)(*g.xy()), rtol=1e-12)
    # |u| = 1 turns sum_{i != j} |u^i du^j - u^j du^i|^2 into 2 |du|^2
    assert np.allclose(omega_density(u, gu).values[0], 2 * e, rtol=1e-10)


# ------------------------------------------------------- dyadic profile
def test_dyadic_radii():
    r = dyadic_radii(1 / 16, 1.0)
    assert len(r) == 7 and r[0] == 1 / 16 and r[-1] == pytest.approx(0.5)
    assert np.allclose(np.diff(np.log2(r)), 0.5)


def test_dyadic_profile_log():
    g = annulus_grid(2.0**-8, 1.0, n_theta=64, per_octave=64)
    prof = dyadic_profile(log_field(g))
    assert np.allclose(prof.energies, 2 * np.pi * np.log(2), rtol=1e-4)
    assert prof.total == pytest.approx(2 * np.pi * 8 * np.log(2), rel=1e-4)
    # each point lies in two windows
    assert prof.energies.sum() <= prof.overlap * prof.total


def test_dyadic_profile_constant_and_errors():
    g = annulus_grid(1 / 16, 1.0, n_theta=16, per_octave=16)
    prof = dyadic_profile(Field(g, np.ones(g.shape)))
    assert np.all(prof.energies == 0) and prof.sup_e == 0
    with pytest.raises(ValueError, match=">= 4"):
        dyadic_profile(Field(g, np.ones(g.shape)), AnnulusSpec(0.25, 0.5))
    d = disk_grid(1.0, n_theta=16, per_octave=8, d_max=6)
    with pytest.raises(ValueError):
        dyadic_profile(Field(d, np.ones(d.shape)))


def test_dyadic_profile_bubble_tail():
    mu = 2.0**-6
    g = annulus_grid(mu, 1.0, n_theta=64, per_octave=64)
    f = bubble(1, mu)
    prof = dyadic_profile(map_field(f, g), grad_u=map_gradient(f, g))
    ref = [bubble_band_energy(mu, r, 2 * r) for r in prof.radii]
    # half-octave windows clip cells, so the quadrature error is a few 1e-4
    assert np.allclose(prof.energies, ref, rtol=5e-4)
    assert np.all(np.diff(prof.energies[4:]) < 0)


# -------------------------------------------------------------- weak L2
def test_weak_l2_log():
    g = annulus_grid(2.0**-8, 1.0, n_theta=64, per_octave=64)
    rep = weak_l2_check(log_field(g))
    assert rep.lhs == pytest.approx(2 * np.sqrt(np.pi), rel=0.02)
    assert rep.rhs == pytest.approx(np.sqrt(2 * np.pi * np.log(2)), rel=1e-4)
    assert rep.ratio == pytest.approx(rep.lhs / rep.rhs)


def test_weak_l2_zero():
    g = annulus_grid(1 / 16, 1.0, n_theta=16, per_octave=16)
    rep = weak_l2_check(Field(g, np.full(g.shape, 3.0)))
    assert (rep.lhs, rep.rhs, rep.ratio) == (0.0, 0.0, 0.0)


# ----------------------------------------------------- radii partition
def test_partition_zero_density():
    g = annulus_grid(1 / 16, 1.0, n_theta=16, per_octave=16)
    assert list(radii_partition(Field(g, np.zeros(g.shape)), 1 / 16, 1.0, 1.0)) == [1 / 16, 1.0]


def test_partition_uniform():
    g = annulus_grid(1 / 16, 1.0, n_theta=16, per_octave=16)
    eps0 = 1.0
    dens = Field(g, np.full(g.shape, 3.5 * eps0 / g.spec.area))
    radii = radii_partition(dens, 1 / 16, 1.0, eps0)
    m = partition_masses(dens, radii)
    assert len(m) in (4, 5)
    assert np.all(m <= eps0 * (1 + 1e-9))
    assert m.sum() == pytest.approx(3.5 * eps0, rel=1e-12)
    # uniform in area: the cut radii follow rho_i^2 = r^2 + i (R^2 - r^2) / 3.5
    ref = np.sqrt(1 / 256 + np.arange(4) * (1 - 1 / 256) / 3.5)
    assert np.allclose(radii[:4], ref, rtol=1e-10)


def test_partition_isolates_band():
    g = annulus_grid(2.0**-8, 1.0, n_theta=16, per_octave=32)
    rho = g.rho[:, None] + np.zeros(g.shape)
    bg = np.full(g.shape, 0.2 / g.spec.area)
    band = (rho > 1 / 8) & (rho < 1 / 4)
    peak = np.where(band, 5.0 / (np.pi * (1 / 16 - 1 / 64)), 0.0)
    eps0 = 1.0
    n_bg = len(radii_partition(Field(g, bg), g.spec.r_inner, 1.0, eps0)) - 1
    radii = radii_partition(Field(g, bg + peak), g.spec.r_inner, 1.0, eps0)
    n_band = int(np.sum((radii > 1 / 8) & (radii < 1 / 4)))
    assert n_band <= math.ceil(5.0 / eps0) + 2
    assert len(radii) - 1 <= n_bg + math.ceil(5.0 / eps0) + 2


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 5.0))
def test_partition_invariants(seed, eps0):
    rng = np.random.Generator(np.random.PCG64(seed))
    g = annulus_grid(2.0**-6, 1.0, n_theta=8, per_octave=8)
    vals = rng.exponential(size=g.shape) * (rng.uniform(size=(g.n_radial, 1)) < 0.5) * rng.uniform(0, 20)
    dens = Field(g, vals)
    radii = radii_partition(dens, g.spec.r_inner, 1.0, eps0)
    m = partition_masses(dens, radii)
    total = float(np.sum(vals * g.cell_area))
    assert radii[0] == g.spec.r_inner and radii[-1] == 1.0 and np.all(np.diff(radii) > 0)
    assert np.all(m <= eps0 * (1 + 1e-9))
    assert len(m) <= math.ceil(total / eps0) + 1
    # legs are maximal except the last one
    assert np.all(m[:-1] >= eps0 * (1 - 1e-9))


def test_partition_errors():
    g = annulus_grid(1 / 16, 1.0, n_theta=16, per_octave=16)
    with pytest.raises(ValueError):
        radii_partition(Field(g, np.ones(g.shape)), 1 / 16, 1.0, 0.0)
    with pytest.raises(ValueError):
        radii_partition(Field(g, np.ones(g.shape)), 1.0, 0.5, 1.0)


# --------------------------------------------------- angular / Pohozaev
def test_angular_check_radial_field():
    g = annulus_grid(2.0**-6, 1.0, n_theta=32, per_octave=32)
    u = log_field(g)
    rep = angular_quantization_check(u)
    assert rep.lhs <= 1e-20 and rep.rhs > 0 and rep.hypothesis_ok


def test_angular_check_flags_hypothesis():
    g = annulus_grid(2.0**-6, 1.0, n_theta=32, per_octave=32)
    u = equator_field(g)
    om = omega_density(u)
    rep = angular_quantization_check(u, omega=om, delta=0.1)
    assert not rep.hypothesis_ok and rep.sup_omega > 0.1
    assert rep.lhs > 0
    assert angular_quantization_check(u, omega=om, delta=100.0).hypothesis_ok


@pytest.mark.parametrize("degree", [1, 2])
def test_pohozaev_bubbles(degree):
    g = annulus_grid(2.0**-6, 1.0, n_theta=64, per_octave=32)
    f = bubble(degree, 0.1)
    rad, ang = pohozaev_profile(map_field(f, g), map_gradient(f, g))
    assert np.max(np.abs(rad - ang) / (rad + ang)) <= 1e-6


def test_pohozaev_controls():
    g = annulus_grid(2.0**-6, 1.0, n_theta=64, per_octave=32)
    r = float(g.rho[40])
    assert pohozaev_residual(log_field(g), r, signed=True) == pytest.approx(1.0, abs=1e-12)
    assert pohozaev_residual(equator_field(g), r, signed=True) == pytest.approx(-1.0, abs=1e-12)
    assert pohozaev_residual(equator_field(g), r) == pytest.approx(1.0, abs=1e-12)
    with pytest.warns(UserWarning, match="off-grid"):
        pohozaev_residual(log_field(g), r * 1.003)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pohozaev_residual(log_field(g), r)


# --------------------------------------------------- synthetic sequences
def test_synthetic_sequence_paths():
    seq = one_bubble()
    assert seq.scale(0, 5) == 2.0**-5 and seq.scale(0, 6) < seq.scale(0, 5)
    assert seq.center(0, 6) == pytest.approx(0.3 + 0.2j + (0.5 + 0.5j) * 2.0**-6)
    bb = bubble_on_bubble()
    assert bb.depth(1) == 2 and bb.scale(1, 4) == 2.0**-8
    assert bb.center(1, 4) == pytest.approx(bb.center(0, 4) + 0.5 * 2.0**-4)
    assert bb.total_degree() == 2
    with pytest.raises(ValueError):
        SyntheticSequence(bubbles=[BubbleSpec(power=0.0)])
    with pytest.raises(ValueError):
        SyntheticSequence(bubbles=[BubbleSpec(parent=0)])


def test_synthetic_sequence_is_unit():
    g = annulus_grid(0.05, 1.0, n_theta=32, per_octave=16)
    u = two_bubbles().field(6, g).values
    assert np.max(np.abs(np.sum(u**2, axis=0) - 1)) <= 1e-12


def test_remainder_vanishes_for_exact_bubble():
    # no background and one bubble: u_k is its own bubble and u_inf is constant
    seq = SyntheticSequence((0.0,), [BubbleSpec(0.1j)])
    g = annulus_grid(0.05, 1.0, n_theta=16, per_octave=8)
    assert np.max(np.abs(seq.remainder_gradient(6, g))) <= 1e-10


# -------------------------------------------------------- contour energy
def test_contour_energy_centered_bubble():
    mu = 2.0**-10
    for R in (mu / 3, mu, 0.5):
        assert contour_energy(bubble(1, mu), 0j, R) == pytest.approx(EIGHT_PI * R**2 / (mu**2 + R**2), rel=1e-12)
    # circle passing right next to the pole
    f = bubble(1, 1e-3, 0.5 + 1e-9)
    assert contour_energy(f, 0j, 0.5) < EIGHT_PI


def test_contour_energy_matches_area_quadrature(rng):
    for _ in range(5):
        f = random_rational_map(rng, inner_eps=0.2)
        c, R = complex(*rng.uniform(-0.2, 0.2, 2)), rng.uniform(0.3, 0.7)
        g = patch_grid(c, R, 1e-3, n_theta=256, per_octave=64)
        area = float(np.sum(g.cell_area * map_density(f)(*g.xy())))
        assert contour_energy(f, c, R) == pytest.approx(area, rel=2e-4)


# ------------------------------------------------------------- detection
def test_detect_nothing():
    assert detect_concentration(SyntheticSequence(), 8, FOUR_PI) == []
    with pytest.raises(ValueError):
        detect_concentration(one_bubble(), 8, 0.0)


@pytest.mark.parametrize("k", [5, 8, 11])
def test_detect_one_bubble(k):
    seq = one_bubble()
    dets = detect_concentration(seq, k, FOUR_PI)
    assert len(dets) == 1
    assert abs(dets[0][0] - seq.center(0, k)) <= 2 * seq.scale(0, k)


def test_detect_two_bubbles():
    seq = two_bubbles()
    dets = detect_concentration(seq, 8, FOUR_PI)
    assert len(dets) == 2
    for i in range(2):
        assert min(abs(c - seq.center(i, 8)) for c, _ in dets) <= 2 * seq.scale(i, 8)


# ---------------------------------------------------------- center/scale
def test_center_symmetric_bump():
    p = 0.2 - 0.1j
    dens = lambda x, y: 1e5 / np.pi * np.exp(-((x - p.real) ** 2 + (y - p.imag) ** 2) / 1e-4)
    a, lam, info = center_and_scale(dens, (p, 0.1), 2 * np.pi, np.pi, finest=1e-3)
    assert abs(a - p) <= 1e-12
    # sub-sampled ball fractions make the inside mass a fine step function of lambda
    assert info.outer_energy == pytest.approx(np.pi, rel=1e-2)
    a2, _, _ = center_and_scale(dens, (p + 0.01, 0.1), 2 * np.pi, np.pi, finest=1e-3)
    assert abs(a2 - p) <= 1e-3 * lam


def test_center_and_scale_bubble():
    mu, a0 = 2.0**-9, 0.01 + 0.02j
    f = bubble(1, mu, a0)
    a, lam, _ = center_and_scale(map_density(f), (0j, 0.25), FOUR_PI, 2 * np.pi, finest=mu)
    assert abs(a - a0) <= mu
    assert mu / 4 <= lam <= 4 * mu


def test_center_two_equal_bubbles_midpoint():
    m = 0.02 + 0.01j
    f = random_rational_map(np.random.Generator(np.random.PCG64(0)), n_poles=0)
    f.g = (0.0,)
    from annulus_lab.spheremaps import PoleTerm
    f.poles = [PoleTerm(m - 0.03, 1e-3), PoleTerm(m + 0.03, 1e-3)]
    a, lam, _ = center_and_scale(map_density(f), (m, 0.2), FOUR_PI, 2 * np.pi, finest=1e-3)
    assert abs(a - m) <= 1e-10
    assert lam > 0.03


def test_center_rejects_small_energy():
    dens = lambda x, y: np.zeros_like(x)
    with pytest.raises(ValueError, match="below"):
        center_and_scale(dens, (0j, 0.5), FOUR_PI, 2 * np.pi)


# ------------------------------------------------------------ bubble tree
def test_tree_no_bubbles():
    seq = SyntheticSequence()
    tree = build_bubble_tree(seq, 8)
    assert tree.nodes == [] and tree.depth == 0 and not tree.partial
    assert tree.thick_energy == pytest.approx(tree.total_energy, rel=1e-4)
    assert neck_report(tree, seq) == []
    d = tree.to_dict()["tree"]
    assert d["tag"] == "thick" and d["children"] == []


@pytest.mark.parametrize("k", [6, 10])
def test_tree_one_bubble(k):
    seq = one_bubble()
    tree = build_bubble_tree(seq, k)
    assert tree.depth == 1 and len(tree.nodes) == 1 and not tree.partial
    n = tree.nodes[0]
    lam_k = seq.scale(0, k)
    assert abs(n.center - seq.center(0, k)) <= 2 * lam_k
    assert lam_k / 4 <= n.scale <= 4 * lam_k
    assert tree.ledger_residual <= 1e-3
    assert quantization_residual(tree, seq) <= 5e-2
    rows = neck_report(tree, seq)
    assert len(rows) == 1 and not rows[0]["empty"]
    assert rows[0]["neck_angular"] <= rows[0]["neck_angular_raw"]


def test_tree_bubble_on_bubble():
    seq = bubble_on_bubble()
    tree = build_bubble_tree(seq, 6)
    assert tree.depth == 2
    parent = tree.nodes[0]
    child = parent.children[0]
    assert child.scale < parent.scale
    assert abs(child.center - seq.center(1, 6)) <= 2 * seq.scale(1, 6)
    assert tree.ledger_residual <= 1e-3
    d = json.loads(tree.to_json())["tree"]
    neck = d["children"][0]
    assert neck["tag"] == "neck" and neck["children"][0]["tag"] == "bubble"
    assert neck["children"][0]["children"][0]["tag"] == "neck"


def test_tree_depth_cap_flags_partial():
    tree = build_bubble_tree(bubble_on_bubble(), 6, max_depth=1)
    assert tree.partial and tree.depth == 1
    assert any("depth cap" in s for s in tree.notes)


def test_tree_two_bubbles():
    tree = build_bubble_tree(two_bubbles(), 8)
    assert len(tree.nodes) == 2 and tree.depth == 1
    a, b = tree.nodes
    # patches (and so the necks) of siblings are disjoint
    assert abs(a.patch_center - b.patch_center) >= a.patch_radius + b.patch_radius
