from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from kpl.errors import OutOfDomain
from kpl.rng_noise import NoiseHandle, make_key, sample_boundary, tilt_path
from kpl.she_core import GridSpec


@pytest.fixture(scope="module")
def grid():
    return GridSpec.create(dx=0.1, half_width=4.0, t_final=1.0)


def test_same_key_same_stream():
    a = make_key(42, 0, "noise").generator().standard_normal(100)
    b = make_key(42, 0, "noise").generator().standard_normal(100)
    assert np.array_equal(a, b)


@pytest.mark.parametrize(
    "key_b",
    [make_key(42, 1, "noise"), make_key(42, 0, "boundary"), make_key(43, 0, "noise")],
)
def test_differing_keys_are_independent(key_b):
    n = 10_000
    a = make_key(42, 0, "noise").generator().standard_normal(n)
    b = key_b.generator().standard_normal(n)
    corr = float(np.corrcoef(a, b)[0, 1])
    assert abs(corr) < 3.0 / np.sqrt(n)


def test_bad_key_fields_rejected():
    with pytest.raises(ValueError):
        make_key(1, -1, "noise")
    with pytest.raises(ValueError):
        make_key(1, 0, "nonsense")


def test_cells_identical_forward_and_reverse(grid):
    fwd = NoiseHandle(make_key(5, 3, "noise"), grid)
    rev = NoiseHandle(make_key(5, 3, "noise"), grid)
    forward = [fwd.row(n).copy() for n in range(grid.n_steps)]
    backward = [rev.row(n).copy() for n in reversed(range(grid.n_steps))]
    for n in range(grid.n_steps):
        assert np.array_equal(forward[n], backward[grid.n_steps - 1 - n])


def test_cell_indexing_and_bounds(grid):
    h = NoiseHandle(make_key(5, 3, "noise"), grid)
    assert h.cell(0, 2) == h.row(0)[2]
    with pytest.raises(IndexError):
        h.row(grid.n_steps)


def test_zero_noise_rows(grid):
    h = NoiseHandle(make_key(5, 3, "noise"), grid, zero_noise=True)
    assert not h.row(0).any()


def test_cells_are_standard_normal(grid):
    blocks = []
    total = 0
    rid = 0
    while total < 100_000:
        h = NoiseHandle(make_key(9, rid, "noise"), grid)
        block = np.concatenate([h.row(n) for n in range(grid.n_steps)])
        blocks.append(block)
        total += block.size
        rid += 1
    draws = np.concatenate(blocks)[:100_000]
    _, p = stats.kstest(draws, "norm")
    assert p > 0.01


def test_boundary_zero_at_origin_and_variance(grid):
    n_rep = 10_000
    w1 = np.empty(n_rep)
    for r in range(n_rep):
        path = sample_boundary(grid, 0.0, make_key(77, r, "boundary"))
        if r < 100:
            assert path.values[grid.origin] == 0.0
        w1[r] = path.values[grid.index_of(1.0)]
    assert abs(w1.var(ddof=1) - 1.0) < 0.03 * 3
    assert abs(w1.mean()) < 0.03


def test_boundary_drift(grid):
    n_rep = 10_000
    w1 = np.empty(n_rep)
    for r in range(n_rep):
        path = sample_boundary(grid, 2.0, make_key(78, r, "boundary"))
        w1[r] = path.values[grid.index_of(1.0)]
    assert abs(w1.mean() - 2.0) < 0.03 * 3
    assert sample_boundary(grid, 2.0, make_key(78, 0, "boundary")).values[grid.origin] == 0.0


def test_boundary_increment_law(grid):
    theta = 0.7
    incs = []
    for r in range(300):
        path = sample_boundary(grid, theta, make_key(79, r, "boundary"))
        incs.append(np.diff(path.values) / np.sqrt(grid.dx))
    pooled = np.concatenate(incs)
    _, p = stats.kstest(pooled, "norm", args=(theta * np.sqrt(grid.dx), 1.0))
    assert p > 0.01


def test_same_master_seed_reuses_brownian_base(grid):
    w0 = sample_boundary(grid, 0.0, make_key(80, 4, "boundary"))
    w2 = sample_boundary(grid, 2.0, make_key(80, 4, "boundary"))
    assert np.allclose(w2.values - 2.0 * grid.x, w0.values, atol=1e-12)


def test_tilt_zero_is_identity(grid):
    w = sample_boundary(grid, 0.0, make_key(81, 0, "boundary"))
    tl = tilt_path(w, 0.0, 2.0)
    assert np.array_equal(tl.values, w.values)
    assert tl.tilt == (0.0, 2.0)


def test_tilt_flat_shift_past_interval(grid):
    w = sample_boundary(grid, 0.0, make_key(81, 1, "boundary"))
    flat = tilt_path(type(w)(values=np.zeros(grid.n_points), drift=0.0, grid=grid), 1.0, 2.0)
    assert flat.values[grid.index_of(3.0)] == pytest.approx(2.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    slope=st.floats(0.01, 3.0),
    n=st.floats(0.2, 3.9),
    seed=st.integers(0, 2**32 - 1),
)
def test_tilt_dominates_drifted_path_below_interval_end(slope, n, seed):
    grid = GridSpec.create(dx=0.1, half_width=4.0, t_final=0.1)
    w = sample_boundary(grid, 0.0, make_key(seed, 0, "boundary"))
    tilted = tilt_path(w, slope, n)
    drifted = w.values + slope * grid.x
    below = grid.x <= n
    gap = tilted.values[below] - drifted[below]
    assert gap.min() >= 0.0
    inside = (grid.x >= 0.0) & (grid.x <= n)
    assert np.max(np.abs(tilted.values[inside] - drifted[inside])) == 0.0


def test_tilt_errors(grid):
    w = sample_boundary(grid, 0.0, make_key(82, 0, "boundary"))
    with pytest.raises(OutOfDomain):
        tilt_path(w, 1.0, grid.half_width + 1.0)
    with pytest.raises(OutOfDomain):
        tilt_path(w, 1.0, 0.0)
    with pytest.raises(ValueError):
        tilt_path(tilt_path(w, 1.0, 1.0), 1.0, 1.0)
