import numpy as np
import pytest
from hypothesis import given, strategies as st

from annulus_lab.grid import (AnnulusSpec, Field, LogPolarGrid, angular_radial_split, annulus_grid,
                              dirichlet_energy, disk_grid, from_polar, gradient, integrate, restrict_extend,
                              ring_index, sample)

from conftest import band_limited


def test_spec_rejects_bad_radii():
    with pytest.raises(ValueError):
        AnnulusSpec(1.0, 0.5)
    with pytest.raises(ValueError):
        AnnulusSpec(-0.1, 1.0)
    assert AnnulusSpec(0.0, 1.0).modulus == np.inf
    assert AnnulusSpec(0.25, 1.0).modulus == pytest.approx(np.log(4))


def test_n_theta_must_be_power_of_two():
    with pytest.raises(ValueError):
        LogPolarGrid(AnnulusSpec(0.5, 1.0), 48, 16)


@given(st.floats(1e-4, 0.5), st.sampled_from([8, 16, 64]), st.integers(8, 300))
def test_cell_areas_sum_to_annulus_area(r_in, n_theta, n_radial):
    g = LogPolarGrid(AnnulusSpec(r_in, 1.0), n_theta, n_radial)
    assert np.sum(g.cell_area) == pytest.approx(np.pi * (1 - r_in**2), rel=1e-12)
    assert np.all(np.diff(g.t) > 0)
    assert g.dtheta == pytest.approx(2 * np.pi / n_theta)


def test_disk_cell_areas_include_center():
    g = disk_grid(2.0, n_theta=16, per_octave=8, d_max=10)
    assert np.sum(g.cell_area) == pytest.approx(4 * np.pi, rel=1e-12)


def test_gradient_of_log_is_inverse_radius():
    g = annulus_grid(2.0**-10, 1.0, n_theta=64, per_octave=16)
    gv = gradient(from_polar(g, lambda r, t: np.log(r))).values
    mag = np.hypot(gv[0], gv[1])
    assert np.max(np.abs(mag * g.rho[:, None] - 1)) <= 1e-8


def test_gradient_of_x_is_constant():
    g = annulus_grid(0.1, 1.0, n_theta=64, per_octave=64)
    gv = gradient(sample(g, lambda x, y: x)).values
    assert np.max(np.abs(gv[0] - 1)) <= 1e-6
    assert np.max(np.abs(gv[1])) <= 1e-6


def test_energy_of_re_z_cubed():
    # |grad Re z^n|^2 = n^2 rho^{2n-2}, so the energy on B_1 \ B_a is n pi (1 - a^{2n})
    g = LogPolarGrid(AnnulusSpec(1 / 16, 1.0), 16, 4096)
    u = sample(g, lambda x, y: np.real((x + 1j * y) ** 3))
    assert dirichlet_energy(u) == pytest.approx(3 * np.pi * (1 - 16.0**-6), rel=1e-6)


def test_coarse_radial_grid_rejected():
    g = LogPolarGrid(AnnulusSpec(0.5, 1.0), 8, 6)
    with pytest.raises(ValueError):
        gradient(Field(g, np.zeros(g.shape)))


@given(st.integers(0, 10**6))
def test_split_is_pointwise_pythagorean(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    g = annulus_grid(0.2, 1.0, n_theta=32, per_octave=16)
    f = sample(g, band_limited(rng))
    rad, ang = angular_radial_split(f)
    tot = np.sum(gradient(f).values ** 2, axis=0)
    assert np.allclose(rad.values[0] ** 2 + ang.values[0] ** 2, tot, rtol=1e-10, atol=1e-12 * tot.max())


def test_split_of_radial_profiles(rng):
    g = annulus_grid(2.0**-6, 1.0, n_theta=64, per_octave=16)
    rad, ang = angular_radial_split(from_polar(g, lambda r, t: np.log(r)))
    assert np.max(np.abs(ang.values)) == 0.0
    assert np.allclose(rad.values[0], 1 / g.rho[:, None], rtol=1e-8)
    prof = rng.standard_normal(g.n_radial)
    _, ang = angular_radial_split(Field(g, np.repeat(prof[:, None], g.n_theta, axis=1)))
    assert np.max(np.abs(ang.values)) == 0.0


def test_split_of_re_z_is_balanced():
    g = annulus_grid(0.25, 1.0, n_theta=64, per_octave=64)
    rad, ang = angular_radial_split(sample(g, lambda x, y: x))
    er = integrate(Field(g, rad.values[0] ** 2))
    ea = integrate(Field(g, ang.values[0] ** 2))
    assert er == pytest.approx(ea, rel=1e-8)


def test_split_rejects_disks():
    g = disk_grid(1.0, n_theta=16, per_octave=8, d_max=4)
    with pytest.raises(ValueError):
        angular_radial_split(Field(g, np.zeros(g.shape)))


def test_integrate_areas():
    g = disk_grid(1.0, n_theta=128, per_octave=32, d_max=8)
    one = Field(g, np.ones(g.shape))
    assert integrate(one) == pytest.approx(np.pi, rel=1e-3)
    assert integrate(one, AnnulusSpec(0.25, 0.5)) == pytest.approx(np.pi * (1 / 4 - 1 / 16), rel=1e-3)


def test_integrate_log_gradient_energy():
    eps = 2.0**-8
    g = annulus_grid(eps, 1.0, n_theta=64, per_octave=64)
    dens = Field(g, 1 / g.rho[:, None] ** 2 + np.zeros(g.shape))
    assert integrate(dens) == pytest.approx(2 * np.pi * np.log(1 / eps), rel=1e-4)


def test_integrate_rejects_outside_region():
    g = annulus_grid(0.25, 1.0, n_theta=16, per_octave=16)
    one = Field(g, np.ones(g.shape))
    with pytest.raises(ValueError):
        integrate(one, AnnulusSpec(0.5, 2.0))
    with pytest.raises(ValueError):
        integrate(one, AnnulusSpec(0.0, 0.2, (0.3, 0.0)))


def test_off_center_disk_area():
    g = disk_grid(1.0, n_theta=256, per_octave=64, d_max=8)
    w = g.region_weights(AnnulusSpec(0.0, 0.2, (0.4, 0.1)))
    assert np.sum(w) == pytest.approx(np.pi * 0.04, rel=1e-3)


def test_ring_index_snaps():
    g = annulus_grid(0.25, 1.0, n_theta=16, per_octave=16)
    assert ring_index(g, g.rho[5]) == (5, False)
    j, snapped = ring_index(g, 0.3)
    assert snapped and abs(g.rho[j] - 0.3) <= g.rho[j] * g.dt


def test_restrict_extend_identity_and_overlap():
    g = annulus_grid(2.0**-6, 1.0, n_theta=64, per_octave=32)
    u = from_polar(g, lambda r, t: np.log(r) + r * np.cos(t))
    same = restrict_extend(u, g)
    assert np.max(np.abs(same.values - u.values)) <= 1e-6
    big = LogPolarGrid(AnnulusSpec(2.0**-12, 1.0), 64, 1 + 32 * 12)
    ext = restrict_extend(from_polar(g, lambda r, t: np.log(r)), big)
    shared = big.t >= g.t_inner - 1e-12
    assert np.allclose(ext.values[0][shared], np.log(big.rho[shared])[:, None], atol=1e-12)


def test_restrict_extend_rejects_far_extension():
    g = annulus_grid(0.25, 1.0, n_theta=16, per_octave=16)
    u = Field(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        restrict_extend(u, annulus_grid(0.01, 1.0, n_theta=16, per_octave=16))


def test_restrict_extend_energy_ratio(rng):
    # allowed constant 4; observed max 1.32 on these 50 fields, frozen as a regression bound of 1.5
    src = annulus_grid(0.25, 1.0, n_theta=32, per_octave=32)
    tgt = annulus_grid(1 / 16, 1.0, n_theta=32, per_octave=32)
    ratios = [restrict_extend(sample(src, band_limited(rng, 4)), tgt).meta["energy_ratio"] for _ in range(50)]
    assert max(ratios) <= 1.5
    assert min(ratios) >= 1.0 - 1e-6


def test_fields_are_immutable():
    g = annulus_grid(0.5, 1.0, n_theta=8, per_octave=16)
    f = Field(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        Field(g, np.full(g.shape, np.nan))
