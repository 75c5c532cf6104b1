from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from kpl.errors import EmptyEnsemble
from kpl.polymer import (
    EndpointDensity,
    annealed_density,
    endpoint_density,
    log_partition,
    quenched_moment,
    sample_endpoint,
    tail_mass,
    tilt_density,
)
from kpl.rng_noise import BoundaryPath, NoiseHandle, make_key, sample_boundary
from kpl.she_core import GridSpec, evolve, green_row
from util_oracles import discrete_gaussian


@pytest.fixture(scope="module")
def grid():
    return GridSpec.create(dx=0.05, half_width=10.0, t_final=1.0)


@pytest.fixture(scope="module")
def zero_noise_row(grid):
    return green_row(NoiseHandle(make_key(0, 0, "noise"), grid, zero_noise=True), grid)


@pytest.fixture(scope="module")
def flat_boundary(grid):
    return BoundaryPath(values=np.zeros(grid.n_points), drift=0.0, grid=grid)


@pytest.fixture(scope="module")
def random_environment(grid):
    noise = NoiseHandle(make_key(21, 0, "noise"), grid)
    w = sample_boundary(grid, 0.0, make_key(21, 0, "boundary"))
    return green_row(noise, grid), w


def test_zero_noise_density_is_discrete_gaussian(zero_noise_row, flat_boundary, grid):
    p = endpoint_density(zero_noise_row, flat_boundary, 0.0)
    assert np.max(np.abs(p.probs - discrete_gaussian(grid))) < 1e-10


def test_normalization(random_environment, grid):
    row, w = random_environment
    for theta in (0.0, 0.5, -1.0):
        p = endpoint_density(row, w, theta)
        assert grid.dx * p.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert (p.probs >= 0).all()


def test_tilt_matches_direct_construction(random_environment):
    row, w = random_environment
    base = endpoint_density(row, w, 0.0)
    for theta in (0.3, -0.7, 1.0):
        direct = endpoint_density(row, w, theta)
        tilted = tilt_density(base, theta)
        assert np.max(np.abs(direct.probs - tilted.probs)) < 1e-12


def test_tilt_identity_and_preconditions(random_environment):
    row, w = random_environment
    base = endpoint_density(row, w, 0.0)
    assert np.array_equal(tilt_density(base, 0.0).probs, base.probs)
    with pytest.raises(ValueError):
        tilt_density(endpoint_density(row, w, 0.5), 0.2)


def test_tilt_increases_mean_of_symmetric_density(zero_noise_row, flat_boundary):
    base = endpoint_density(zero_noise_row, flat_boundary, 0.0)
    tilted = tilt_density(base, 0.5)
    assert quenched_moment(tilted, 1) > quenched_moment(base, 1) + 0.1


def test_tilted_kernel_mean_is_theta_t(zero_noise_row, flat_boundary, grid):
    # for the lattice kernel the tilted mean is exactly computable from the kernel itself
    kern = discrete_gaussian(grid)
    tilt = kern * np.exp(grid.x)
    tilt /= grid.dx * tilt.sum()
    expected = grid.dx * np.dot(grid.x, tilt)
    p = tilt_density(endpoint_density(zero_noise_row, flat_boundary, 0.0), 1.0)
    assert quenched_moment(p, 1) == pytest.approx(expected, abs=1e-9)
    assert quenched_moment(p, 1) == pytest.approx(1.0, rel=0.02)


class TestQuenchedMoments:
    def test_symmetric_first_moment_vanishes(self, zero_noise_row, flat_boundary):
        p = endpoint_density(zero_noise_row, flat_boundary, 0.0)
        assert abs(quenched_moment(p, 1)) < 1e-12

    def test_gaussian_second_moment(self, zero_noise_row, flat_boundary):
        p = endpoint_density(zero_noise_row, flat_boundary, 0.0)
        assert quenched_moment(p, 2) == pytest.approx(1.0, rel=0.02)

    def test_half_normal_absolute_moment(self, zero_noise_row, flat_boundary):
        # quadrature oracle for the expected value of |y| under N(0,1)
        half, err = integrate.quad(lambda y: y * stats.norm.pdf(y), 0.0, np.inf)
        expected = 2.0 * half
        assert err < 1e-7
        assert expected == pytest.approx(np.sqrt(2.0 / np.pi), abs=1e-12)
        p = endpoint_density(zero_noise_row, flat_boundary, 0.0)
        assert quenched_moment(p, 1, absolute=True) == pytest.approx(expected, rel=0.02)

    def test_k_validation(self, zero_noise_row, flat_boundary):
        p = endpoint_density(zero_noise_row, flat_boundary, 0.0)
        with pytest.raises(ValueError):
            quenched_moment(p, 3)


def test_tail_mass_splits_to_one(random_environment, grid):
    row, w = random_environment
    p = endpoint_density(row, w, 0.0)
    assert tail_mass(p, 1.0, above=True) + tail_mass(p, 1.0, above=False) == pytest.approx(1.0, abs=1e-12)


class TestSampling:
    def test_point_mass(self, grid):
        probs = np.zeros(grid.n_points)
        probs[grid.origin] = 1.0 / grid.dx
        p = EndpointDensity(probs=probs, grid=grid, theta=0.0)
        assert sample_endpoint(p, make_key(1, 0, "auxiliary")) == 0.0

    def test_deterministic_per_key(self, zero_noise_row, flat_boundary):
        p = endpoint_density(zero_noise_row, flat_boundary, 0.0)
        key = make_key(2, 7, "auxiliary")
        assert sample_endpoint(p, key) == sample_endpoint(p, key)

    def test_ks_against_sampled_law(self, zero_noise_row, flat_boundary, grid):
        # the sampler's law and the empirical measure share the grid atoms, so the
        # KS distance is the max gap of the right-continuous CDFs at the atoms
        p = endpoint_density(zero_noise_row, flat_boundary, 0.0)
        n = 10_000
        draws = np.array([sample_endpoint(p, make_key(3, r, "auxiliary")) for r in range(n)])
        cdf_grid = np.cumsum(p.probs) * grid.dx
        emp = np.searchsorted(np.sort(draws), grid.x, side="right") / n
        d = float(np.max(np.abs(emp - cdf_grid)))
        assert d < 0.02


class TestAnnealed:
    def test_single_density(self, zero_noise_row, flat_boundary):
        p = endpoint_density(zero_noise_row, flat_boundary, 0.0)
        ann = annealed_density([p])
        assert np.array_equal(ann.mean_probs, p.probs)
        assert not ann.stderr_probs.any()

    def test_empty_rejected(self):
        with pytest.raises(EmptyEnsemble):
            annealed_density([])

    def test_mixed_tilts_rejected(self, zero_noise_row, flat_boundary):
        p0 = endpoint_density(zero_noise_row, flat_boundary, 0.0)
        p1 = endpoint_density(zero_noise_row, flat_boundary, 0.5)
        with pytest.raises(ValueError):
            annealed_density([p0, p1])

    def test_zero_noise_annealed_mean_is_normalized(self, zero_noise_row, grid):
        densities = []
        first_moments = []
        for r in range(200):
            w = sample_boundary(grid, 0.0, make_key(23, r, "boundary"))
            p = endpoint_density(zero_noise_row, w, 0.0)
            densities.append(p)
            first_moments.append(quenched_moment(p, 1))
        ann = annealed_density(densities)
        assert grid.dx * ann.mean_probs.sum() == pytest.approx(1.0, abs=1e-12)
        m1 = np.asarray(first_moments)
        se = m1.std(ddof=1) / np.sqrt(m1.size)
        assert abs(m1.mean()) < 3 * se
        assert grid.dx * np.dot(grid.x, ann.mean_probs) == pytest.approx(m1.mean(), abs=1e-12)


def test_log_partition_matches_forward_solve(grid):
    noise = NoiseHandle(make_key(25, 0, "noise"), grid)
    w = sample_boundary(grid, 0.0, make_key(25, 0, "boundary"))
    row = green_row(noise, grid)
    theta = 0.4
    drifted = BoundaryPath(values=w.values + theta * grid.x, drift=theta, grid=grid)
    fwd = evolve(drifted, NoiseHandle(make_key(25, 0, "noise"), grid), grid)
    assert log_partition(row, w, theta) == pytest.approx(fwd.height_at(0.0), abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), theta=st.floats(-1.5, 1.5))
def test_density_normalization_property(seed, theta):
    grid = GridSpec.create(dx=0.2, half_width=3.0, t_final=0.2)
    noise = NoiseHandle(make_key(seed, 0, "noise"), grid)
    w = sample_boundary(grid, 0.0, make_key(seed, 0, "boundary"))
    p = endpoint_density(green_row(noise, grid), w, theta)
    assert grid.dx * p.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert (p.probs >= 0.0).all()
