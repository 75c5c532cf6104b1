"""Numerical reenactment of the upper/lower variance-bound machinery.

Every inequality used in the two-sided t^{2/3} argument becomes a measurable
check with explicit parameters (delta, u, theta, n, lambda, M, c1, c2, c3):
the convexity/tilt tradeoff, the chained upper bound, the Chebyshev tail,
the drift-interval coupling with its exact pathwise inequality, the Girsanov
second moment, the three-way union tail split, and the assembled certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import partial
from typing import Sequence

import numpy as np

from .errors import InvalidParams, PathwiseViolation
from .identities import (
    GUARD_MARGIN,
    IdentityReport,
    _config,
    _env,
    build_report,
    check_guard,
    desk_grid,
    moments_records,
)
from .montecarlo_stats import Estimate, bootstrap_stat, estimate, run_ensemble
from .polymer import endpoint_density, log_mass_split, log_partition, tail_mass
from .rng_noise import derive_seed, make_key, tilt_path
from .she_core import GridSpec, edge_mass, evolve, green_row


@dataclass(frozen=True)
class LowerBoundParams:
    """Parameter bundle for the lower-bound construction.

    Derived quantities: theta = lam * t^{-1/3}, n = m_cap * t^{2/3},
    u = (m_cap - lam) * t^{2/3} (so n = u + theta*t exactly), and the
    threshold offsets c1 - c(t) = 2 t^{1/3} = (c2 - c(t)) + c3.
    """

    lam: float
    m_cap: float
    t: float

    def __post_init__(self):
        if self.t < 1.0:
            raise InvalidParams(f"t must be >= 1 (got {self.t})")
        if self.lam * self.lam <= 4.0:
            raise InvalidParams(f"lambda^2 > 4 required (got lambda={self.lam})")
        if self.m_cap <= self.lam:
            raise InvalidParams(f"M > lambda required (got M={self.m_cap}, lambda={self.lam})")
        if math.sqrt(self.lam) / (0.5 * self.lam**2 - 2.0) >= 1.0:
            raise InvalidParams(
                f"sqrt(lambda)/(lambda^2/2 - 2) must be < 1 (got lambda={self.lam})"
            )

    @property
    def theta(self) -> float:
        return self.lam * self.t ** (-1.0 / 3.0)

    @property
    def n(self) -> float:
        return self.m_cap * self.t ** (2.0 / 3.0)

    @property
    def u(self) -> float:
        return (self.m_cap - self.lam) * self.t ** (2.0 / 3.0)

    @property
    def c3(self) -> float:
        return self.t ** (1.0 / 3.0)

    @property
    def c1_offset(self) -> float:
        """c1 - c(t)."""
        return 2.0 * self.t ** (1.0 / 3.0)

    @property
    def c2_offset(self) -> float:
        """c2 - c(t)."""
        return self.t ** (1.0 / 3.0)

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "m_cap": self.m_cap,
            "t": self.t,
            "theta": self.theta,
            "n": self.n,
            "u": self.u,
        }


@dataclass
class CouplingSample:
    """One replica of the drift-interval coupling: mass ratio X and height gap Y."""

    replica_id: int
    x: float
    y: float


def bounds_grid(t: float, level_n: float, dx: float = 0.05) -> GridSpec:
    """Grid wide enough that the split level n and the tilted density both fit."""
    half = max(10.0, level_n + 6.0 * math.sqrt(t))
    return desk_grid(t, dx=dx, half_width=half)


# ---------------------------------------------------------------------------
# replica kernels

def _tilted_tail_replica(rid: int, *, grid: GridSpec, seed: int, theta: float, level: float) -> tuple:
    noise, w = _env(grid, seed, rid)
    row = green_row(noise, grid)
    h0 = log_partition(row, w)
    p_t = endpoint_density(row, w, theta)
    return (
        h0,
        tail_mass(p_t, level, above=True),
        edge_mass(p_t.probs, grid.dx, GUARD_MARGIN),
    )


def _coupling_replica(rid: int, *, grid: GridSpec, seed: int, theta: float, level: float) -> tuple:
    noise, w = _env(grid, seed, rid)
    # global drift: W + theta*x; interval tilt: drift on [0, level] only
    w_theta = replace(w, values=w.values + theta * grid.x, drift=theta)
    w_tilde = tilt_path(w, theta, level)
    f_theta = evolve(w_theta, noise, grid)
    f_tilde = evolve(w_tilde, noise, grid)
    h_theta = float(f_theta.heights[grid.origin])
    h_tilde = float(f_tilde.heights[grid.origin])
    y_gap = h_theta - h_tilde

    row = green_row(noise, grid)
    above, below = log_mass_split(row, w, theta, level)
    x_ratio = math.exp(above - below)
    if y_gap > math.log1p(x_ratio) + 1e-9:
        raise PathwiseViolation(
            f"Y={y_gap!r} exceeds log(1+X)={math.log1p(x_ratio)!r}; the coupling"
            " inequality is exact, so this indicates a solver bug",
            replica_id=rid,
        )
    p_t = endpoint_density(row, w, theta)
    exp_draw = -math.log(float(make_key(seed, rid, "auxiliary").generator().random()))
    return (
        x_ratio,
        y_gap,
        tail_mass(p_t, level, above=False),
        1.0 if y_gap <= exp_draw else 0.0,
        edge_mass(p_t.probs, grid.dx, GUARD_MARGIN),
    )


def _three_heights_replica(rid: int, *, grid: GridSpec, seed: int, theta: float, level: float) -> tuple:
    noise, w = _env(grid, seed, rid)
    row = green_row(noise, grid)
    w_tilde = tilt_path(w, theta, level)
    return (
        log_partition(row, w),
        log_partition(row, w, theta),
        log_partition(row, w_tilde),
        edge_mass(endpoint_density(row, w, theta).probs, grid.dx, GUARD_MARGIN),
    )


# ---------------------------------------------------------------------------
# checks

def lemma32_tradeoff(
    t: float,
    deltas: Sequence[float],
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> list[IdentityReport]:
    """||int y p||_2 <= 4/delta sqrt(Var h0) + 2 sqrt(t/delta) + delta t, for each delta."""
    grid = grid or desk_grid(t)
    rec = moments_records(grid, n_replicas, master_seed, workers)
    guard = check_guard(rec[:, 4])
    cols = rec[:, [0, 2]]  # h0, m1
    reports = []
    for j, delta in enumerate(float(d) for d in deltas):

        def gap_stat(r, d=delta):
            lhs = math.sqrt(float((r[:, 1] ** 2).mean()))
            rhs = 4.0 / d * float(np.std(r[:, 0], ddof=1)) + 2.0 * math.sqrt(t / d) + d * t
            return lhs - rhs

        lhs = bootstrap_stat(
            cols, lambda r: math.sqrt(float((r[:, 1] ** 2).mean())), boot_seed=derive_seed(master_seed, 200 + j)
        )
        rhs = bootstrap_stat(
            cols,
            lambda r, d=delta: 4.0 / d * float(np.std(r[:, 0], ddof=1)) + 2.0 * math.sqrt(t / d) + d * t,
            boot_seed=derive_seed(master_seed, 210 + j),
        )
        gap = bootstrap_stat(cols, gap_stat, boot_seed=derive_seed(master_seed, 220 + j))
        reports.append(
            build_report(
                "lemma32_tradeoff",
                lhs,
                rhs,
                mode="inequality",
                sigma=gap.stderr,
                config=_config(grid, n_replicas, master_seed, delta=delta),
                details=guard,
            )
        )
    return reports


def upper_bound_chain(
    t: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """Var h0(t,0) <= sqrt(t + E (int y p)^2), the chained upper bound."""
    grid = grid or desk_grid(t)
    rec = moments_records(grid, n_replicas, master_seed, workers)
    guard = check_guard(rec[:, 4])
    cols = rec[:, [0, 2]]
    lhs = bootstrap_stat(cols, lambda r: float(np.var(r[:, 0], ddof=1)), boot_seed=derive_seed(master_seed, 230))
    rhs = bootstrap_stat(
        cols, lambda r: math.sqrt(t + float((r[:, 1] ** 2).mean())), boot_seed=derive_seed(master_seed, 231)
    )
    gap = bootstrap_stat(
        cols,
        lambda r: float(np.var(r[:, 0], ddof=1)) - math.sqrt(t + float((r[:, 1] ** 2).mean())),
        boot_seed=derive_seed(master_seed, 232),
    )
    return build_report(
        "upper_bound_chain",
        lhs,
        rhs,
        mode="inequality",
        sigma=gap.stderr,
        config=_config(grid, n_replicas, master_seed),
        details=guard,
    )


def chebyshev_right_tail(
    t: float,
    params: LowerBoundParams,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """Annealed P_theta(B_t > n) <= Var h0(t,0) / u."""
    grid = grid or bounds_grid(t, params.n)
    rec = np.array(
        run_ensemble(
            partial(_tilted_tail_replica, grid=grid, seed=master_seed, theta=params.theta, level=params.n),
            n_replicas,
            workers,
        )
    )
    guard = check_guard(rec[:, 2])
    cols = rec[:, :2]
    lhs = estimate(rec[:, 1], boot_seed=derive_seed(master_seed, 240))
    rhs = bootstrap_stat(
        cols, lambda r: float(np.var(r[:, 0], ddof=1)) / params.u, boot_seed=derive_seed(master_seed, 241)
    )
    gap = bootstrap_stat(
        cols,
        lambda r: float(r[:, 1].mean()) - float(np.var(r[:, 0], ddof=1)) / params.u,
        boot_seed=derive_seed(master_seed, 242),
    )
    return build_report(
        "chebyshev_tail",
        lhs,
        rhs,
        mode="inequality",
        sigma=gap.stderr,
        config=_config(grid, n_replicas, master_seed, **params.as_dict()),
        details=guard,
    )


def coupling_XY(
    t: float,
    theta: float,
    level_n: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> tuple[list[CouplingSample], IdentityReport]:
    """The drift-interval coupling: pathwise Y <= log(1+X), and the tail comparison.

    Per replica, X is the mass ratio above/below the level from the
    propagator row with the drifted boundary, and Y = h_theta - h_tilde is
    the height gap between two forward solves sharing the noise (globally
    drifted vs interval-tilted boundary). The coupling inequality is exact
    algebra, so any violation beyond 1e-9 raises PathwiseViolation. The
    annealed P_theta(B_t <= n) must not exceed P(Y <= Exp(1)) by more than
    3 sigma.
    """
    grid = grid or bounds_grid(t, level_n)
    rec = np.array(
        run_ensemble(
            partial(_coupling_replica, grid=grid, seed=master_seed, theta=float(theta), level=float(level_n)),
            n_replicas,
            workers,
        )
    )
    guard = check_guard(rec[:, 4])
    samples = [CouplingSample(replica_id=i, x=float(r[0]), y=float(r[1])) for i, r in enumerate(rec)]
    lhs = estimate(rec[:, 2], boot_seed=derive_seed(master_seed, 250))
    rhs = estimate(rec[:, 3], boot_seed=derive_seed(master_seed, 251))
    gap = estimate(rec[:, 2] - rec[:, 3], boot_seed=derive_seed(master_seed, 252))
    frac_pathwise = float(np.mean(np.log1p(rec[:, 0]) - rec[:, 1] >= -1e-9))
    report = build_report(
        "coupling",
        lhs,
        rhs,
        mode="inequality",
        sigma=gap.stderr,
        passed=(gap.mean <= 3.0 * gap.stderr) and frac_pathwise == 1.0,
        config=_config(grid, n_replicas, master_seed, theta=theta, n=level_n),
        details={**guard, "frac_pathwise": frac_pathwise},
    )
    return samples, report


def girsanov_moment(theta: float, level_n: float, n_draws: int, master_seed: int = 0) -> IdentityReport:
    """Second moment of the drift-removal density G = exp(theta W(n) - theta^2 n / 2).

    E G^2 = exp(theta^2 n) exactly; only boundary sampling is involved.
    """
    gen = make_key(master_seed, 0, "boundary").generator()
    w_n = math.sqrt(level_n) * gen.standard_normal(n_draws)
    g2 = np.exp(2.0 * theta * w_n - theta * theta * level_n)
    # fewer resamples here: the draw count is large and the check has a tight runtime budget
    lhs = estimate(g2, boot_seed=derive_seed(master_seed, 260), n_boot=500)
    target = math.exp(theta * theta * level_n)
    rhs = Estimate.exact(target)
    return build_report(
        "girsanov",
        lhs,
        rhs,
        tolerance=0.05 * target,
        config={"theta": theta, "n": level_n, "draws": n_draws, "master_seed": master_seed},
    )


def tail_lemmas(
    t: float,
    params: LowerBoundParams,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> list[IdentityReport]:
    """The three tail probabilities of the union split, each against its bound.

    With c1 = c(t) + 2 t^{1/3}, c2 = c(t) + t^{1/3}, c3 = t^{1/3} (so
    c1 = c2 + c3): a left tail of the drifted height, a right tail of the
    interval-tilted height, and the exact exponential tail exp(-c3). c(t)
    and psi(t) are estimated from the same ensemble, with their uncertainty
    carried into the bootstrap sigma.
    """
    grid = grid or bounds_grid(t, params.n)
    theta = params.theta
    rec = np.array(
        run_ensemble(
            partial(_three_heights_replica, grid=grid, seed=master_seed, theta=theta, level=params.n),
            n_replicas,
            workers,
        )
    )
    guard = check_guard(rec[:, 3])
    cols = rec[:, :3]
    cfg = _config(grid, n_replicas, master_seed, **params.as_dict())

    def left_emp(r):
        c1 = r[:, 0].mean() + params.c1_offset
        return float((r[:, 1] <= c1).mean())

    def left_bound(r):
        psi = float(np.var(r[:, 0], ddof=1))
        denom = 0.5 * theta * theta * t - params.c1_offset
        return (math.sqrt(psi) + math.sqrt(theta * t)) / denom

    def right_emp(r):
        c2 = r[:, 0].mean() + params.c2_offset
        return float((r[:, 2] > c2).mean())

    def right_log_bound(r):
        psi = float(np.var(r[:, 0], ddof=1))
        return 0.5 * theta * theta * params.n + 0.5 * math.log(psi) - math.log(params.c2_offset)

    denom = 0.5 * theta * theta * t - params.c1_offset
    if denom <= 0:
        raise InvalidParams("c1 must stay below the drifted mean: lambda^2 > 4 ensures this")

    reports = []
    lhs = bootstrap_stat(cols, left_emp, boot_seed=derive_seed(master_seed, 270))
    rhs = bootstrap_stat(cols, left_bound, boot_seed=derive_seed(master_seed, 271))
    gap = bootstrap_stat(cols, lambda r: left_emp(r) - left_bound(r), boot_seed=derive_seed(master_seed, 272))
    reports.append(
        build_report("tail_left", lhs, rhs, mode="inequality", sigma=gap.stderr, config=cfg, details=guard)
    )

    log_b = right_log_bound(cols)
    bound2 = math.exp(log_b) if log_b < 700.0 else float("inf")
    lhs2 = bootstrap_stat(cols, right_emp, boot_seed=derive_seed(master_seed, 273))
    rhs2 = Estimate.exact(bound2) if math.isfinite(bound2) else Estimate.exact(float("inf"))
    passed2 = lhs2.mean <= bound2 + 3.0 * lhs2.stderr
    reports.append(
        build_report(
            "tail_right_tilted",
            lhs2,
            rhs2,
            mode="inequality",
            sigma=lhs2.stderr,
            passed=bool(passed2),
            config=cfg,
            details={**guard, "log_bound": log_b},
        )
    )

    exact = math.exp(-params.c3)
    reports.append(
        build_report(
            "tail_exponential",
            Estimate.exact(exact),
            Estimate.exact(exact),
            config=cfg,
            details={"c3": params.c3},
        )
    )
    return reports


def lower_bound_certificate(
    params: LowerBoundParams,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """The assembled inequality 1 <= a psi/t^{2/3} + b sqrt(psi/t^{2/3}) + r(lambda, t).

    a = 1/(M - lambda), b = 1/(lambda^2/2 - 2) + e^{lambda^2 M / 2} (the
    exponential coefficient is reported in log space), and
    r = sqrt(lambda)/(lambda^2/2 - 2) + e^{-t^{1/3}}. Also reports the lower
    bound on psi(t)/t^{2/3} implied by solving the quadratic, which is
    vacuous at desk-scale t; the check is structural.
    """
    t = params.t
    grid = grid or desk_grid(t)
    rec = moments_records(grid, n_replicas, master_seed, workers)
    check_guard(rec[:, 4])
    h0 = rec[:, 0]
    a = 1.0 / (params.m_cap - params.lam)
    log_exp_coef = 0.5 * params.lam**2 * params.m_cap
    b = 1.0 / (0.5 * params.lam**2 - 2.0) + (math.exp(log_exp_coef) if log_exp_coef < 700 else float("inf"))
    r_const = math.sqrt(params.lam) / (0.5 * params.lam**2 - 2.0) + math.exp(-t ** (1.0 / 3.0))

    def rhs_stat(rr):
        q = float(np.var(rr[:, 0], ddof=1)) / t ** (2.0 / 3.0)
        return a * q + b * math.sqrt(q) + r_const

    rhs = bootstrap_stat(h0[:, None], rhs_stat, boot_seed=derive_seed(master_seed, 280))
    lhs = Estimate.exact(1.0)

    c_room = 1.0 - r_const
    if c_room <= 0 or not math.isfinite(b):
        implied = 0.0
    else:
        disc = b * b + 4.0 * a * c_room
        implied = ((-b + math.sqrt(disc)) / (2.0 * a)) ** 2
    psi = float(np.var(h0, ddof=1))
    return build_report(
        "lower_bound_certificate",
        lhs,
        rhs,
        mode="inequality",
        sigma=rhs.stderr,
        config=_config(grid, n_replicas, master_seed, **params.as_dict()),
        details={
            "a": a,
            "b_log_exp_term": log_exp_coef,
            "b_finite_part": 1.0 / (0.5 * params.lam**2 - 2.0),
            "remainder": r_const,
            "implied_psi_over_t23_lower_bound": implied,
            "psi_estimate": psi,
        },
    )
