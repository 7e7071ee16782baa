import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annulus_lab.grid import annulus_grid, dirichlet_energy, disk_grid
from annulus_lab.spheremaps import (PoleTerm, RationalMap, bubble, energy_density_pq, equator_field, lift,
                                    lift_gradient, map_density, map_field, map_gradient, random_rational_map)


def maps():
    return st.integers(0, 2**32 - 1).map(lambda s: random_rational_map(np.random.Generator(np.random.PCG64(s)),
                                                                        inner_eps=0.1))


@settings(max_examples=30)
@given(maps())
def test_lift_is_unit(f):
    g = annulus_grid(0.05, 1.0, n_theta=32, per_octave=8)
    u = map_field(f, g).values
    assert np.max(np.abs(np.sum(u**2, axis=0) - 1)) <= 1e-12


@settings(max_examples=30)
@given(maps())
def test_pq_factorization(f):
    z = np.array([0.3 + 0.1j, -0.7 + 0.2j, 0.05j])
    P, _, Q, _ = f.pq(z)
    direct = np.polynomial.polynomial.polyval(z, np.asarray(f.g)) + sum((p.mu / (z - p.a)) ** p.d for p in f.poles)
    assert np.allclose(P / Q, direct, rtol=1e-12)


@settings(max_examples=20)
@given(maps())
def test_gradient_matches_finite_differences(f):
    z = np.array([0.3 + 0.4j, -0.5 - 0.1j])
    h = 1e-6
    grad = lift_gradient(*f.pq(z))
    for k, dz in enumerate((h, 1j * h)):
        fd = (lift(*f.pq(z + dz)[::2]) - lift(*f.pq(z - dz)[::2])) / (2 * h)
        assert np.allclose(grad[k::2], fd, atol=1e-6 * (1 + np.abs(fd).max()))


@settings(max_examples=20)
@given(maps())
def test_energy_density_matches_gradient(f):
    z = np.linspace(-0.8, 0.8, 7) + 0.3j
    pq = f.pq(z)
    assert np.allclose(np.sum(lift_gradient(*pq) ** 2, axis=0), energy_density_pq(*pq), rtol=1e-10)
    assert np.allclose(map_density(f)(z.real, z.imag), energy_density_pq(*pq))


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_bubble_energy(degree):
    # B_1 is mapped d-to-1 onto the cap |w| > mu^d, whose energy share is 8 pi / (1 + mu^{2d})
    mu = 2.0**-6
    f = bubble(degree, mu)
    exact = 8 * np.pi * degree / (1 + mu ** (2 * degree))
    err = []
    for po in (32, 64):
        g = disk_grid(1.0, n_theta=64, per_octave=po, d_max=24)
        err.append(np.sum(g.cell_area * np.sum(map_gradient(f, g).values ** 2, axis=0)) / exact - 1)
    # second-order cell quadrature: 7.8e-5 then 2.0e-5
    assert abs(err[1]) <= 3e-5
    assert np.log2(err[0] / err[1]) == pytest.approx(2.0, abs=0.1)
    assert f.degree == degree


def test_degree_and_equator():
    f = RationalMap((0.0, 1.0, 2.0), [PoleTerm(0.5, 0.1, 2)])
    assert f.degree == 4
    g = annulus_grid(0.25, 1.0, n_theta=32, per_octave=128)
    e = equator_field(g).values
    assert np.allclose(np.sum(e**2, axis=0), 1.0) and np.all(e[2] == 0)
    # energy of the equator map on B_1 \ B_r is 2 pi log(1/r)
    assert dirichlet_energy(equator_field(g)) == pytest.approx(2 * np.pi * np.log(4), rel=1e-5)


def test_random_map_poles_outside_disk(rng):
    for _ in range(20):
        f = random_rational_map(rng, n_poles=3)
        assert all(1.5 <= abs(p.a) <= 3.0 for p in f.poles)
    f = random_rational_map(rng, inner_eps=0.01)
    assert abs(f.poles[-1].a) == pytest.approx(0.003)
