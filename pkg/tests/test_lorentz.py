import numpy as np
import pytest
from hypothesis import given, strategies as st

from annulus_lab.grid import AnnulusSpec, Field, LogPolarGrid, annulus_grid, disk_grid, from_polar
from annulus_lab.lorentz import (StepRearrangement, duality_bound, duality_pairing, l2_norm, l21_levelset,
                                 lorentz_norm, rearrange)

GRID = annulus_grid(0.125, 1.0, n_theta=16, per_octave=8)
seeds = st.integers(0, 2**32 - 1)


def random_field(seed, grid=GRID):
    rng = np.random.Generator(np.random.PCG64(seed))
    kind = seed % 3
    v = rng.standard_normal(grid.shape)
    if kind == 1:
        v = v * grid.rho[:, None] ** (-rng.uniform(0, 0.95))
    elif kind == 2:
        v = np.round(v * 2) / 2  # many ties
    return Field(grid, v)


def test_constant_field():
    c = 2.5
    g = GRID
    f = Field(g, np.full(g.shape, c))
    st_ = rearrange(f)
    A = np.pi * (1 - 0.125**2)
    assert st_.steps() == [(c, pytest.approx(A, rel=1e-14))]
    assert lorentz_norm(f, 2, 1).value == pytest.approx(4 * c * np.sqrt(A), rel=1e-12)
    assert l21_levelset(f).value == pytest.approx(4 * c * np.sqrt(A), rel=1e-12)


def test_indicator_of_half_disk():
    g = disk_grid(1.0, n_theta=64, per_octave=64, d_max=8)
    f = from_polar(g, lambda r, t: (r < 0.5).astype(float))
    (v1, m1), (v0, m0) = rearrange(f).steps()
    assert (v1, v0) == (1.0, 0.0)
    assert m1 == pytest.approx(np.pi / 4, rel=3e-2)
    assert m0 == pytest.approx(3 * np.pi / 4, rel=3e-2)
    assert m0 + m1 == pytest.approx(np.pi, rel=1e-12)


def test_rearrangement_of_inverse_radius():
    eps = 2.0**-8
    g = LogPolarGrid(AnnulusSpec(eps, 1.0), 256, 512)
    st_ = rearrange(from_polar(g, lambda r, t: 1 / r))
    mid = st_.cumulative - 0.5 * st_.measures
    exact = np.sqrt(np.pi / (mid + np.pi * eps**2))
    assert np.max(np.abs(st_.values / exact - 1)) <= 1e-2


def test_weak_norm_of_inverse_radius_on_disk():
    g = disk_grid(1.0, n_theta=64, per_octave=32, d_max=16)
    f = from_polar(g, lambda r, t: 1 / r)
    assert lorentz_norm(f, 2, np.inf).value == pytest.approx(2 * np.sqrt(np.pi), rel=1e-2)


def test_invalid_exponents_rejected():
    f = Field(GRID, np.ones(GRID.shape))
    with pytest.raises(ValueError):
        lorentz_norm(f, 1.0, 1)
    with pytest.raises(ValueError):
        lorentz_norm(f, 2.0, 0.5)


def test_empty_region_rejected():
    from annulus_lab.lorentz import rearrange_values
    with pytest.raises(ValueError):
        rearrange_values(np.ones(3), np.zeros(3))


@given(seeds)
def test_nesting_in_q(seed):
    f = random_field(seed)
    n1, n2, ni = (lorentz_norm(f, 2, q).value for q in (1, 2, np.inf))
    assert ni <= n2 * (1 + 1e-12)
    assert n2 <= n1 * (1 + 1e-12)


@given(seeds)
def test_l2_sandwich(seed):
    f = random_field(seed)
    l2 = l2_norm(f)
    n2 = lorentz_norm(f, 2, 2).value
    assert l2 <= n2 * (1 + 1e-12)
    assert n2 <= 2 * l2 * (1 + 1e-12)


@given(seeds, seeds)
def test_duality_inequality(s1, s2):
    f, g = random_field(s1), random_field(s2 ^ 0x5A5A)
    assert duality_pairing(f, g) <= duality_bound(f, g) * (1 + 1e-12)


@given(seeds, st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3),
       st.sampled_from([(2, 1), (2, 2), (2, np.inf), (3, 1.5), (1.5, 4)]))
def test_scaling_homogeneity(seed, c, pq):
    f = random_field(seed)
    p, q = pq
    assert lorentz_norm(f * c, p, q).value == pytest.approx(abs(c) * lorentz_norm(f, p, q).value, rel=1e-12)


@given(seeds)
def test_rearrangement_invariance(seed):
    f = random_field(seed)
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    # permute within rings, where cells have equal area
    v = np.array([row[rng.permutation(row.size)] for row in f.values[0]])
    g = Field(f.grid, v)
    for p, q in ((2, 1), (2, 2), (2, np.inf), (3, 1.5)):
        assert lorentz_norm(g, p, q).value == lorentz_norm(f, p, q).value


@given(seeds)
def test_levelset_agrees_with_maximal_function(seed):
    f = random_field(seed)
    a, b = l21_levelset(f).value, lorentz_norm(f, 2, 1).value
    assert abs(a - b) <= 1e-10 * b


def test_duality_examples():
    g = disk_grid(1.0, n_theta=32, per_octave=16, d_max=8)
    one = Field(g, np.ones(g.shape))
    assert duality_pairing(one, Field(g, np.zeros(g.shape))) == 0.0
    assert duality_pairing(one, one) == pytest.approx(np.pi, rel=1e-12)
    assert duality_bound(one, one) == pytest.approx(4 * np.pi, rel=1e-12)
    with pytest.raises(ValueError):
        duality_pairing(one, Field(GRID, np.ones(GRID.shape)))


def test_vector_fields_use_pointwise_norm(rng):
    v = rng.standard_normal((2,) + GRID.shape)
    f = Field(GRID, v)
    assert lorentz_norm(f, 2, 1).value == lorentz_norm(f.norm(), 2, 1).value


def test_staircase_csv_round_trip(tmp_path):
    st_ = rearrange(random_field(7))
    st_.to_csv(tmp_path / "s.csv")
    back = StepRearrangement.from_csv(tmp_path / "s.csv")
    assert np.array_equal(back.values, st_.values)
    assert np.allclose(back.measures, st_.measures, rtol=1e-12)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "cumulative_measure,value"


def test_staircase_invariants():
    st_ = rearrange(random_field(3))
    assert np.all(np.diff(st_.values) < 0) and np.all(st_.measures > 0)
    assert st_.total_measure == pytest.approx(np.sum(GRID.cell_area), rel=1e-14)
