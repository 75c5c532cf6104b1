from __future__ import annotations

import math

import numpy as np
import pytest

from kpl.errors import BoundaryLeak
from kpl.identities import (
    build_report,
    check_burgers_density,
    check_convexity,
    check_cov_decay,
    check_cov_H_W,
    check_free_energy,
    check_gaussian_tail,
    check_guard,
    check_shear_shift,
    check_total_variance,
    check_var_decomposition,
    check_var_growth,
    check_variance_identity,
    desk_grid,
    height_stats,
    run_duality_selftest,
)
from kpl.montecarlo_stats import Estimate
from kpl.oracle import zero_noise_oracle
from kpl.polymer import endpoint_density, quenched_moment
from kpl.rng_noise import BoundaryPath, NoiseHandle, make_key
from kpl.she_core import GridSpec, green_row

FAST = GridSpec.create(dx=0.1, half_width=6.0, t_final=0.5)


def test_build_report_modes():
    a = Estimate(1.0, 0.1, 0.8, 1.2, 100)
    b = Estimate(1.05, 0.1, 0.85, 1.25, 100)
    assert build_report("x", a, b).passed
    assert not build_report("x", a, Estimate.exact(2.0)).passed
    assert build_report("x", a, b, mode="inequality").passed
    assert not build_report("x", Estimate.exact(5.0), b, mode="inequality").passed
    assert build_report("x", Estimate.exact(1e-12), Estimate.exact(0.0), mode="bound", tolerance=1e-10).passed


def test_check_guard_levels():
    stats = check_guard([1e-6] * 100)
    assert stats["guard_frac_over"] == 0.0
    check_guard([1e-6] * 99 + [2e-4])  # a single mild leaker is tolerated
    with pytest.raises(BoundaryLeak) as err:
        check_guard([1e-6] * 99 + [2e-2])
    assert err.value.replica_id == 99
    with pytest.raises(BoundaryLeak):
        check_guard([2e-4] * 100)


class TestVarianceIdentity:
    def test_small_t_passes(self):
        rep = check_variance_identity(0.5, 300, FAST, master_seed=11)
        assert rep.passed
        assert rep.lhs.mean == pytest.approx(rep.rhs.mean, abs=3 * rep.combined_sigma + rep.tolerance)

    def test_degenerate_one_step(self):
        # at t = dt both sides are O(dt/dx) (small, vanishing under refinement)
        # but carry different lattice constants: a single step cannot resolve
        # the continuum identity, so equality-within-3-sigma is not asserted
        g = GridSpec.create(dx=0.2, half_width=3.0, t_final=0.02)
        assert g.n_steps == 1
        rep = check_variance_identity(0.02, 300, g, master_seed=12)
        scale = g.dt / g.dx
        assert rep.lhs.mean < 2.0 * scale
        assert rep.rhs.mean < 2.0 * scale
        fine = GridSpec.create(dx=0.1, half_width=3.0, t_final=0.005)
        assert fine.n_steps == 1
        rep_fine = check_variance_identity(0.005, 300, fine, master_seed=12)
        assert rep_fine.lhs.mean < rep.lhs.mean
        assert rep_fine.rhs.mean < rep.rhs.mean

    def test_reports_are_reproducible(self):
        a = check_variance_identity(0.25, 60, FAST, master_seed=13)
        b = check_variance_identity(0.25, 60, FAST, master_seed=13)
        assert a.as_dict() == b.as_dict()

    def test_refinement_does_not_worsen_discrepancy(self):
        coarse = check_variance_identity(1.0, 400, desk_grid(1.0, dx=0.1), master_seed=14)
        fine = check_variance_identity(1.0, 400, desk_grid(1.0, dx=0.05), master_seed=14)
        slack = 3.0 * math.hypot(coarse.combined_sigma, fine.combined_sigma)
        assert abs(fine.discrepancy) <= abs(coarse.discrepancy) + slack


def _refinement_pair(check, *args, seed, **kw):
    coarse = check(*args, grid=desk_grid(1.0, dx=0.1), master_seed=seed, **kw)
    fine = check(*args, grid=desk_grid(1.0, dx=0.05), master_seed=seed, **kw)
    return coarse, fine


class TestcontinuumExactRefinement:
    """Exact-in-the-continuum identities: the lattice gap must not grow under dx refinement."""

    def _assert_not_worse(self, coarse, fine):
        slack = 3.0 * math.hypot(coarse.combined_sigma, fine.combined_sigma)
        assert abs(fine.discrepancy) <= abs(coarse.discrepancy) + slack

    def test_total_variance(self):
        coarse, fine = _refinement_pair(check_total_variance, 1.0, 400, seed=140)
        self._assert_not_worse(coarse, fine)

    def test_free_energy(self):
        coarse = check_free_energy(1.0, [1.0], 400, desk_grid(1.0, dx=0.1), master_seed=141)[0]
        fine = check_free_energy(1.0, [1.0], 400, desk_grid(1.0, dx=0.05), master_seed=141)[0]
        self._assert_not_worse(coarse, fine)

    def test_var_decomposition(self):
        coarse = check_var_decomposition(1.0, 1.0, 400, desk_grid(1.0, dx=0.1), master_seed=142)[0]
        fine = check_var_decomposition(1.0, 1.0, 400, desk_grid(1.0, dx=0.05), master_seed=142)[0]
        self._assert_not_worse(coarse, fine)

    def test_cov_h_w(self):
        coarse, fine = _refinement_pair(check_cov_H_W, 1.0, 0.0, 1.0, 400, seed=143)
        self._assert_not_worse(coarse, fine)


class TestTotalVariance:
    def test_zero_noise_flat_boundary_is_exact(self):
        row = green_row(NoiseHandle(make_key(0, 0, "noise"), FAST, zero_noise=True), FAST)
        flat = BoundaryPath(values=np.zeros(FAST.n_points), drift=0.0, grid=FAST)
        p = endpoint_density(row, flat, 0.0)
        qvar = quenched_moment(p, 2) - quenched_moment(p, 1) ** 2
        assert qvar == pytest.approx(FAST.t_final, abs=1e-10)
        assert quenched_moment(p, 1) == pytest.approx(0.0, abs=1e-12)

    def test_small_t_passes(self):
        rep = check_total_variance(0.5, 300, FAST, master_seed=15)
        assert rep.passed


class TestFreeEnergy:
    def test_zero_drift_shift_is_zero(self):
        rep = check_free_energy(0.5, [0.0], 50, FAST, master_seed=16)[0]
        assert rep.lhs.mean == 0.0
        assert rep.rhs.mean == 0.0
        assert rep.passed

    def test_parabola_small(self):
        reps = check_free_energy(0.5, [0.5, 1.0], 300, FAST, master_seed=17)
        for rep, expected in zip(reps, (0.0625, 0.25)):
            assert rep.rhs.mean == pytest.approx(expected, abs=1e-12)
            assert rep.passed


def test_var_growth_holds():
    rep = check_var_growth(0.5, 0.5, 300, FAST, master_seed=18)
    assert rep.passed
    rep_neg = check_var_growth(0.5, -0.5, 300, FAST, master_seed=18)
    assert rep_neg.passed
    assert rep_neg.rhs.mean == pytest.approx(rep.rhs.mean, abs=0.2)


def test_shear_shift_zero_theta_null_case():
    rep = check_shear_shift(0.5, 0.0, 300, FAST, master_seed=19)
    assert rep.passed
    assert rep.details["ks_pvalue"] >= 0.01
    assert rep.details["l1_distance"] < 3 * rep.details["l1_floor"]


def test_shear_shift_small_theta():
    rep = check_shear_shift(0.5, 0.5, 400, FAST, master_seed=20)
    assert rep.passed
    assert rep.rhs.mean == pytest.approx(0.25, abs=1e-12)


class TestConvexity:
    def test_pathwise_and_curvature(self):
        rep = check_convexity(0.5, None, 100, FAST, master_seed=21)
        assert rep.passed
        assert rep.details["frac_convex"] == 1.0
        assert rep.details["min_second_difference"] >= -1e-9

    def test_zero_noise_curvature_equals_t(self):
        g = FAST
        row = green_row(NoiseHandle(make_key(0, 0, "noise"), g, zero_noise=True), g)
        flat = BoundaryPath(values=np.zeros(g.n_points), drift=0.0, grid=g)
        dth = 0.05
        from kpl.polymer import log_partition

        d2 = (log_partition(row, flat, dth) - 2 * log_partition(row, flat) + log_partition(row, flat, -dth)) / dth**2
        assert d2 == pytest.approx(g.t_final, rel=0.02)


class TestVarDecomposition:
    def test_x_zero_is_exact(self):
        reps = check_var_decomposition(0.5, 0.0, 200, FAST, master_seed=22)
        rep = reps[0]
        assert rep.discrepancy == pytest.approx(0.0, abs=1e-12)
        assert rep.passed

    def test_interior_x(self):
        reps = check_var_decomposition(0.5, [1.0, 3.0], 300, FAST, master_seed=23)
        assert all(r.passed for r in reps)


class TestCovHW:
    def test_x_zero_both_sides_vanish(self):
        rep = check_cov_H_W(0.5, 0.0, 0.0, 100, FAST, master_seed=24)
        assert rep.rhs.mean == pytest.approx(0.0, abs=1e-12)
        assert abs(rep.lhs.mean) < 1e-12
        assert rep.passed

    def test_noise_on_small(self):
        rep = check_cov_H_W(0.5, 0.0, 1.0, 300, FAST, master_seed=25)
        assert rep.passed

    def test_zero_noise_oracle_agreement(self):
        g = GridSpec.create(dx=0.1, half_width=6.0, t_final=1.0)
        lhs = zero_noise_oracle(g, "cov_H_W_lhs", 20_000, master_seed=26, z=0.0, x=1.0)
        rhs = zero_noise_oracle(g, "cov_H_W_rhs", 20_000, master_seed=26, z=0.0, x=1.0)
        sigma = math.hypot(lhs.stderr, rhs.stderr)
        assert abs(lhs.mean - rhs.mean) < 3 * sigma

    def test_large_x_recovers_half_absolute_moment(self):
        g = GridSpec.create(dx=0.1, half_width=8.0, t_final=1.0)
        rhs = zero_noise_oracle(g, "cov_H_W_rhs", 20_000, master_seed=27, z=0.0, x=6.0)
        mabs = zero_noise_oracle(g, "mean_abs_endpoint", 20_000, master_seed=27)
        sigma = math.hypot(rhs.stderr, 0.5 * mabs.stderr)
        assert abs(rhs.mean - 0.5 * mabs.mean) < 3 * sigma + 1e-3


class TestCovDecay:
    def test_ladder(self):
        reps = check_cov_decay(0.5, [0.0, 1.0, 8.0], 300, None, master_seed=28)
        by_x = {r.config["x"]: r for r in reps}
        assert by_x[0.0].lhs.mean > 0
        assert by_x[8.0].details["decisive"]
        assert by_x[8.0].passed
        assert not by_x[1.0].details["decisive"]
        # monotone envelope: far covariance does not exceed near covariance
        slack = 3 * math.hypot(by_x[1.0].lhs.stderr, by_x[8.0].lhs.stderr)
        assert abs(by_x[8.0].lhs.mean) <= abs(by_x[1.0].lhs.mean) + slack


@pytest.fixture(scope="module")
def burgers_report():
    return check_burgers_density(0.5, 400, FAST, master_seed=29)


class TestBurgers:
    @pytest.fixture
    def report(self, burgers_report):
        return burgers_report

    def test_normalization(self, report):
        norm = report.details["normalization"]
        assert abs(norm["mean"] - 1.0) < 3 * norm["stderr"] + 0.05

    def test_symmetry(self, report):
        assert report.details["symmetry_l1"] < 3.0 * report.details["symmetry_floor"]

    def test_l1_distance_reported(self, report):
        assert report.lhs.mean >= 0
        assert len(report.details["lags"]) == len(report.details["two_point"])


def test_gaussian_tail_fast():
    rep = check_gaussian_tail(1.0, 300, desk_grid(1.0, dx=0.1), master_seed=30)
    assert rep.passed
    assert rep.details["aic_quadratic"] < rep.details["aic_linear"]
    assert rep.details["r2_quadratic"] > 0.95


def test_duality_selftest_fast():
    rep = run_duality_selftest(10, FAST, master_seed=31)
    assert rep.passed
    assert rep.lhs.mean < 1e-10


def test_height_stats_structure():
    out = height_stats(0.5, 200, FAST, master_seed=32)
    assert out["psi"].mean > 0
    assert out["psi"].n == 200
    assert math.isfinite(out["c"].mean)
