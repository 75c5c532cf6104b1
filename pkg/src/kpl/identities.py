"""One measurable check per height/polymer identity.

Every check runs an ensemble of independent environment replicas, evaluates
both sides of an identity (or inequality) on the same replicas wherever the
two sides share randomness, and returns an :class:`IdentityReport` whose
pass criterion is |lhs - rhs| <= 3 * combined_sigma + systematic_tolerance.
The systematic budget covers lattice bias; the identities themselves are
continuum statements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from .errors import BoundaryLeak, ConfigError
from .montecarlo_stats import (
    Estimate,
    bootstrap_stat,
    combined_sigma,
    estimate,
    ks_two_sample,
    run_ensemble,
    variance_estimate,
)
from .polymer import (
    endpoint_density,
    log_partition,
    quenched_moment,
    sample_endpoint,
    tilt_density,
)
from .rng_noise import NoiseHandle, derive_seed, make_key, sample_boundary
from .she_core import GridSpec, duality_check, edge_mass, evolve, green_row

#: Default absolute systematic budget for lattice bias in identity checks.
DEFAULT_TOLERANCE = 0.05
#: Edge-mass threshold and the margin (grid points) it is measured over.
GUARD_THRESHOLD = 1e-4
GUARD_MARGIN = 5


@dataclass
class IdentityReport:
    """Structured outcome of one check: two estimates and a calibrated verdict."""

    name: str
    lhs: Estimate
    rhs: Estimate
    discrepancy: float
    combined_sigma: float
    passed: bool
    mode: str
    tolerance: float
    config: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs.as_dict(),
            "rhs": self.rhs.as_dict(),
            "discrepancy": self.discrepancy,
            "combined_sigma": self.combined_sigma,
            "passed": bool(self.passed),
            "mode": self.mode,
            "tolerance": self.tolerance,
            "config": self.config,
            "details": self.details,
        }


def build_report(
    name: str,
    lhs: Estimate,
    rhs: Estimate,
    *,
    mode: str = "identity",
    tolerance: float = 0.0,
    sigma: float | None = None,
    passed: bool | None = None,
    config: dict | None = None,
    details: dict | None = None,
) -> IdentityReport:
    if sigma is None:
        sigma = combined_sigma(lhs, rhs)
    disc = lhs.mean - rhs.mean
    if passed is None:
        if mode == "identity":
            passed = abs(disc) <= 3.0 * sigma + tolerance
        elif mode == "inequality":
            passed = disc <= 3.0 * sigma + tolerance
        elif mode == "bound":
            passed = lhs.mean <= tolerance
        else:
            raise ValueError(f"unknown report mode {mode!r}")
    return IdentityReport(
        name=name,
        lhs=lhs,
        rhs=rhs,
        discrepancy=disc,
        combined_sigma=sigma,
        passed=bool(passed),
        mode=mode,
        tolerance=tolerance,
        config=config or {},
        details=details or {},
    )


def desk_grid(t: float, dx: float = 0.05, half_width: float | None = None, dt: float | None = None) -> GridSpec:
    """Default desk-scale grid: the domain widens as 6 t^{2/3} once t exceeds ~2.

    A fixed half-width of 10 lets ~4% of t=4 replicas push more than 1e-4 of
    endpoint mass against the reflecting walls (the endpoint law spreads as
    t^{2/3} and the boundary field tilts it further), so the default tracks
    the same growth rule the exponent sweep uses.
    """
    if half_width is None:
        half_width = max(10.0, 6.0 * t ** (2.0 / 3.0))
    return GridSpec.create(dx=dx, half_width=half_width, t_final=t, dt=dt)


def check_guard(guards: Sequence[float], threshold: float = GUARD_THRESHOLD) -> dict:
    """Ensemble-level truncation guard.

    A single replica may exceed the threshold slightly (the desk domain is
    sized so that happens in <1% of replicas); a systematic or gross leak
    raises BoundaryLeak naming the worst replica.
    """
    g = np.asarray(guards, dtype=float)
    worst = float(g.max())
    frac = float((g > threshold).mean())
    if worst > 100.0 * threshold or frac > 0.01:
        rid = int(g.argmax())
        raise BoundaryLeak(
            f"edge mass {worst:.3e} (fraction over threshold {frac:.3f}) exceeds the "
            f"truncation guard; widen the domain",
            replica_id=rid,
        )
    return {"guard_max": worst, "guard_frac_over": frac}


def _grid_config(grid: GridSpec) -> dict:
    return {
        "dx": grid.dx,
        "dt": grid.dt,
        "half_width": grid.half_width,
        "t": grid.t_final,
    }


def _config(grid: GridSpec, n_replicas: int, master_seed: int, **extra) -> dict:
    cfg = _grid_config(grid)
    cfg.update({"replicas": n_replicas, "master_seed": master_seed})
    cfg.update(extra)
    return cfg


# ---------------------------------------------------------------------------
# replica kernels (module level so ensembles can run in worker processes)

def _env(grid: GridSpec, seed: int, rid: int):
    noise = NoiseHandle(make_key(seed, rid, "noise"), grid)
    boundary = sample_boundary(grid, 0.0, make_key(seed, rid, "boundary"))
    return noise, boundary


def _moments_replica(rid: int, *, grid: GridSpec, seed: int) -> tuple:
    """h0(t,0) and the first/second endpoint moments of one realization."""
    noise, w = _env(grid, seed, rid)
    row = green_row(noise, grid)
    p = endpoint_density(row, w, 0.0)
    return (
        log_partition(row, w),
        quenched_moment(p, 1, absolute=True),
        quenched_moment(p, 1),
        quenched_moment(p, 2),
        edge_mass(p.probs, grid.dx, GUARD_MARGIN),
    )


_MOMENTS_CACHE: dict[tuple, np.ndarray] = {}


def moments_records(grid: GridSpec, n_replicas: int, seed: int, workers: int = 1) -> np.ndarray:
    """Memoized ensemble of (h0, E|y|, Ey, Ey^2, guard) records.

    Several checks consume the same per-replica products; the cache keeps one
    ensemble per (grid, M, seed) so a suite run does not recompute it. The
    records are a pure function of those keys (workers only affect scheduling),
    so caching cannot change any result.
    """
    key = (grid, n_replicas, seed)
    if key not in _MOMENTS_CACHE:
        if len(_MOMENTS_CACHE) >= 16:
            _MOMENTS_CACHE.pop(next(iter(_MOMENTS_CACHE)))
        task = partial(_moments_replica, grid=grid, seed=seed)
        _MOMENTS_CACHE[key] = np.array(run_ensemble(task, n_replicas, workers))
    return _MOMENTS_CACHE[key]


def _tilted_heights_replica(rid: int, *, grid: GridSpec, seed: int, thetas: tuple) -> tuple:
    noise, w = _env(grid, seed, rid)
    row = green_row(noise, grid)
    h0 = log_partition(row, w)
    hs = [log_partition(row, w, th) for th in thetas]
    worst = max(thetas, key=abs) if thetas else 0.0
    guard = edge_mass(endpoint_density(row, w, worst).probs, grid.dx, GUARD_MARGIN)
    return (h0, *hs, guard)


def _shear_replica(rid: int, *, grid: GridSpec, seed: int, theta: float) -> tuple:
    noise, w = _env(grid, seed, rid)
    row = green_row(noise, grid)
    p = endpoint_density(row, w, theta)
    draw = sample_endpoint(p, make_key(seed, rid, "auxiliary"))
    return (
        quenched_moment(p, 1),
        draw,
        edge_mass(p.probs, grid.dx, GUARD_MARGIN),
        *p.probs,
    )


def _convexity_replica(rid: int, *, grid: GridSpec, seed: int, thetas: tuple) -> tuple:
    noise, w = _env(grid, seed, rid)
    row = green_row(noise, grid)
    hs = np.array([log_partition(row, w, th) for th in thetas])
    d2 = hs[:-2] - 2.0 * hs[1:-1] + hs[2:]
    mid = len(thetas) // 2
    dth = thetas[1] - thetas[0]
    central = float(d2[mid - 1] / dth**2)
    p0 = endpoint_density(row, w, 0.0)
    p_mid = tilt_density(p0, thetas[mid]) if thetas[mid] != 0.0 else p0
    qvar = quenched_moment(p_mid, 2) - quenched_moment(p_mid, 1) ** 2
    guard = edge_mass(endpoint_density(row, w, max(thetas, key=abs)).probs, grid.dx, GUARD_MARGIN)
    return (float(d2.min()), central, qvar, guard)


def _field_replica(rid: int, *, grid: GridSpec, seed: int, xs: tuple) -> tuple:
    """Forward solve: h(t,0), and (H(t,x), W(x)) at the probe points."""
    noise, w = _env(grid, seed, rid)
    fld = evolve(w, noise, grid)
    h = fld.heights
    o = grid.origin
    out = [float(h[o])]
    for x in xs:
        i = grid.index_of(x)
        out.append(float(h[i] - w.values[i]))
        out.append(float(w.values[i]))
    return tuple(out)


def _cov_h_w_replica(rid: int, *, grid: GridSpec, seed: int, z: float, x: float) -> tuple:
    noise, w = _env(grid, seed, rid)
    fld = evolve(w, noise, grid)
    iz = grid.index_of(z)
    ix = grid.index_of(x)
    h_z = float(fld.heights[iz] - w.values[iz])
    w_x = float(w.values[ix])
    row = green_row(noise, grid)
    p = endpoint_density(row, w, 0.0)
    y = grid.x
    integrand = np.where(z + y > 0.0, np.minimum(x, z + y), 0.0)
    rhs = float(grid.dx * np.dot(integrand, p.probs)) - min(x, z)
    return (h_z, w_x, rhs, edge_mass(p.probs, grid.dx, GUARD_MARGIN))


def _burgers_replica(rid: int, *, grid: GridSpec, seed: int, n_lags: int, margin_pts: int) -> tuple:
    noise, w = _env(grid, seed, rid)
    fld = evolve(w, noise, grid)
    u = np.diff(fld.heights)[margin_pts:-margin_pts or None]
    v = np.diff(w.values)[margin_pts:-margin_pts or None]
    # full cross-correlation; entry k of the result is sum_i u_{i+k} v_i
    corr = np.correlate(u, v, mode="full")
    counts = np.minimum(np.arange(1, corr.size + 1), np.arange(corr.size, 0, -1)).astype(float)
    center = u.size - 1
    sl = slice(center - n_lags, center + n_lags + 1)
    curve = corr[sl] / counts[sl]
    row = green_row(noise, grid)
    p = endpoint_density(row, w, 0.0)
    return (*curve, *p.probs)


def _annealed_replica(rid: int, *, grid: GridSpec, seed: int) -> tuple:
    noise, w = _env(grid, seed, rid)
    row = green_row(noise, grid)
    p = endpoint_density(row, w, 0.0)
    return tuple(p.probs)


def _duality_replica(rid: int, *, grid: GridSpec, seed: int) -> tuple:
    noise, w = _env(grid, seed, rid)
    return (duality_check(noise, grid, w),)


def _height_replica(rid: int, *, grid: GridSpec, seed: int) -> tuple:
    noise, w = _env(grid, seed, rid)
    fld = evolve(w, noise, grid)
    return (float(fld.heights[grid.origin]),)


# ---------------------------------------------------------------------------
# checks

def check_variance_identity(
    t: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """Var h0(t,0) against the mean absolute endpoint displacement E int |y| p."""
    grid = grid or desk_grid(t)
    rec = moments_records(grid, n_replicas, master_seed, workers)
    guard = check_guard(rec[:, 4])
    lhs = variance_estimate(rec[:, 0], boot_seed=derive_seed(master_seed, 1))
    rhs = estimate(rec[:, 1], boot_seed=derive_seed(master_seed, 2))
    return build_report(
        "variance_identity",
        lhs,
        rhs,
        tolerance=DEFAULT_TOLERANCE * t ** (2.0 / 3.0),
        config=_config(grid, n_replicas, master_seed),
        details=guard,
    )


def check_total_variance(
    t: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """Annealed second endpoint moment against t + variance of the quenched mean."""
    grid = grid or desk_grid(t)
    rec = moments_records(grid, n_replicas, master_seed, workers)
    guard = check_guard(rec[:, 4])
    m1, m2 = rec[:, 2], rec[:, 3]
    lhs = estimate(m2, boot_seed=derive_seed(master_seed, 3))
    rhs = estimate(t + m1**2, boot_seed=derive_seed(master_seed, 4))
    paired = estimate(m2 - m1**2 - t, boot_seed=derive_seed(master_seed, 5))
    return build_report(
        "total_variance",
        lhs,
        rhs,
        sigma=paired.stderr,
        tolerance=0.05 * t,
        config=_config(grid, n_replicas, master_seed),
        details=guard,
    )


def check_free_energy(
    t: float,
    thetas: Sequence[float],
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> list[IdentityReport]:
    """Mean height shift under a drift-theta boundary against theta^2 t / 2."""
    grid = grid or desk_grid(t)
    thetas = tuple(float(th) for th in thetas)
    rec = np.array(
        run_ensemble(partial(_tilted_heights_replica, grid=grid, seed=master_seed, thetas=thetas), n_replicas, workers)
    )
    guard = check_guard(rec[:, -1])
    reports = []
    for j, th in enumerate(thetas):
        shift = rec[:, 1 + j] - rec[:, 0]
        lhs = estimate(shift, boot_seed=derive_seed(master_seed, 10 + j))
        target = 0.5 * th * th * t
        rhs = Estimate.exact(target)
        reports.append(
            build_report(
                "free_energy",
                lhs,
                rhs,
                tolerance=max(0.02, 0.02 * abs(target)),
                config=_config(grid, n_replicas, master_seed, theta=th),
                details=guard,
            )
        )
    return reports


def check_var_growth(
    t: float,
    theta: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """sqrt(Var h_theta) <= sqrt(Var h_0) + sqrt(|theta| t)."""
    grid = grid or desk_grid(t)
    rec = np.array(
        run_ensemble(
            partial(_tilted_heights_replica, grid=grid, seed=master_seed, thetas=(float(theta),)),
            n_replicas,
            workers,
        )
    )
    guard = check_guard(rec[:, -1])
    shift = math.sqrt(abs(theta) * t)
    lhs = bootstrap_stat(rec[:, 1], lambda r: float(np.std(r[:, 0], ddof=1)), boot_seed=derive_seed(master_seed, 20))
    rhs = bootstrap_stat(
        rec[:, 0], lambda r: float(np.std(r[:, 0], ddof=1)) + shift, boot_seed=derive_seed(master_seed, 21)
    )
    gap = bootstrap_stat(
        rec[:, :2],
        lambda r: float(np.std(r[:, 1], ddof=1) - np.std(r[:, 0], ddof=1) - shift),
        boot_seed=derive_seed(master_seed, 22),
    )
    return build_report(
        "var_growth",
        lhs,
        rhs,
        mode="inequality",
        sigma=gap.stderr,
        config=_config(grid, n_replicas, master_seed, theta=theta),
        details=guard,
    )


def _shifted_annealed(probs: np.ndarray, grid: GridSpec, shift: float) -> np.ndarray:
    """Annealed density of (endpoint - shift), linearly interpolated onto the grid."""
    return np.interp(grid.x + shift, grid.x, probs, left=0.0, right=0.0)


def check_shear_shift(
    t: float,
    theta: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """Drift-theta endpoint law against the untilted law shifted by theta*t.

    Three subchecks: annealed mean endpoint equals theta*t (3 sigma);
    two-sample KS on sampled endpoints not rejected at level 0.01; L1
    distance between the shifted annealed densities below 3x its noise
    floor. An independent ensemble provides the untilted side.
    """
    grid = grid or desk_grid(t)
    seed_a = derive_seed(master_seed, 30)
    seed_b = derive_seed(master_seed, 31)
    rec_a = np.array(
        run_ensemble(partial(_shear_replica, grid=grid, seed=seed_a, theta=float(theta)), n_replicas, workers)
    )
    rec_b = np.array(run_ensemble(partial(_shear_replica, grid=grid, seed=seed_b, theta=0.0), n_replicas, workers))
    guard = check_guard(np.concatenate([rec_a[:, 2], rec_b[:, 2]]))
    shift = theta * t

    lhs = estimate(rec_a[:, 0], boot_seed=derive_seed(master_seed, 32))
    rhs = Estimate.exact(shift)

    ks_stat, ks_p = ks_two_sample(rec_a[:, 1] - shift, rec_b[:, 1])

    mean_a = _shifted_annealed(rec_a[:, 3:].mean(axis=0), grid, shift)
    se_a = _shifted_annealed(rec_a[:, 3:].std(axis=0, ddof=1) / math.sqrt(n_replicas), grid, shift)
    mean_b = rec_b[:, 3:].mean(axis=0)
    se_b = rec_b[:, 3:].std(axis=0, ddof=1) / math.sqrt(n_replicas)
    l1 = float(grid.dx * np.abs(mean_a - mean_b).sum())
    # expected L1 under equality, from pointwise standard errors: E|N(0,s)| = s*sqrt(2/pi)
    floor = float(grid.dx * (math.sqrt(2.0 / math.pi) * np.hypot(se_a, se_b)).sum())

    mean_ok = abs(lhs.mean - shift) <= 3.0 * lhs.stderr
    ks_ok = ks_p >= 0.01
    l1_ok = l1 < 3.0 * floor
    return build_report(
        "shear_shift",
        lhs,
        rhs,
        passed=mean_ok and ks_ok and l1_ok,
        config=_config(grid, n_replicas, master_seed, theta=theta),
        details={
            **guard,
            "ks_stat": ks_stat,
            "ks_pvalue": ks_p,
            "l1_distance": l1,
            "l1_floor": floor,
            "mean_ok": mean_ok,
            "ks_ok": ks_ok,
            "l1_ok": l1_ok,
        },
    )


def check_convexity(
    t: float,
    theta_grid: Sequence[float] | None = None,
    n_replicas: int = 200,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """Pathwise convexity of theta -> h_theta(t,0), and its curvature.

    (a) every replica has nonnegative second differences over the theta grid
    (log-convexity of the quenched moment generating function);
    (b) the central second difference matches the quenched endpoint variance
    up to the O(dtheta^2) Taylor remainder.
    """
    grid = grid or desk_grid(t)
    if theta_grid is None:
        theta_grid = tuple(np.round(np.linspace(-0.5, 0.5, 11), 10))
    thetas = tuple(float(th) for th in theta_grid)
    if len(thetas) < 3:
        raise ValueError("theta grid needs at least 3 points")
    rec = np.array(
        run_ensemble(partial(_convexity_replica, grid=grid, seed=master_seed, thetas=thetas), n_replicas, workers)
    )
    guard = check_guard(rec[:, 3])
    min_d2 = float(rec[:, 0].min())
    frac_convex = float((rec[:, 0] >= -1e-9).mean())
    lhs = estimate(rec[:, 1], boot_seed=derive_seed(master_seed, 40))
    rhs = estimate(rec[:, 2], boot_seed=derive_seed(master_seed, 41))
    paired = estimate(rec[:, 1] - rec[:, 2], boot_seed=derive_seed(master_seed, 42))
    curvature_ok = abs(paired.mean) <= 3.0 * paired.stderr + 0.05 * abs(rhs.mean)
    return build_report(
        "convexity",
        lhs,
        rhs,
        sigma=paired.stderr,
        tolerance=0.05 * abs(rhs.mean),
        passed=(frac_convex == 1.0) and curvature_ok,
        config=_config(grid, n_replicas, master_seed, theta_grid=list(thetas)),
        details={**guard, "min_second_difference": min_d2, "frac_convex": frac_convex},
    )


def check_var_decomposition(
    t: float,
    xs: float | Sequence[float],
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> list[IdentityReport]:
    """Var h0(t,0) = Cov[H(t,0) - H(t,x), W(x)] + Cov[H(t,x), H(t,0)], any x >= 0."""
    grid = grid or desk_grid(t)
    xs = (float(xs),) if np.isscalar(xs) else tuple(float(x) for x in xs)
    rec = np.array(run_ensemble(partial(_field_replica, grid=grid, seed=master_seed, xs=xs), n_replicas, workers))
    h0 = rec[:, 0]
    lhs = variance_estimate(h0, boot_seed=derive_seed(master_seed, 50))
    reports = []
    for j, x in enumerate(xs):
        hx, wx = rec[:, 1 + 2 * j], rec[:, 2 + 2 * j]

        def rhs_stat(r):
            c1 = np.cov(r[:, 0] - r[:, 1], r[:, 2], ddof=1)[0, 1]
            c2 = np.cov(r[:, 1], r[:, 0], ddof=1)[0, 1]
            return float(c1 + c2)

        cols = np.column_stack([h0, hx, wx])
        rhs = bootstrap_stat(cols, rhs_stat, boot_seed=derive_seed(master_seed, 51 + j))
        gap = bootstrap_stat(
            cols,
            lambda r: float(np.var(r[:, 0], ddof=1) - rhs_stat(r)),
            boot_seed=derive_seed(master_seed, 60 + j),
        )
        reports.append(
            build_report(
                "var_decomposition",
                lhs,
                rhs,
                sigma=gap.stderr,
                tolerance=DEFAULT_TOLERANCE,
                config=_config(grid, n_replicas, master_seed, x=x),
            )
        )
    return reports


def check_cov_H_W(
    t: float,
    z: float,
    x: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """Cov[H(t,z), W(x)] against the endpoint-density functional

    E dx*sum_j p_j 1{z+y_j>0} min(x, z+y_j) - min(x, z).
    """
    grid = grid or desk_grid(t)
    rec = np.array(
        run_ensemble(partial(_cov_h_w_replica, grid=grid, seed=master_seed, z=float(z), x=float(x)), n_replicas, workers)
    )
    guard = check_guard(rec[:, 3])
    cols = rec[:, :3]
    lhs = bootstrap_stat(
        cols, lambda r: float(np.cov(r[:, 0], r[:, 1], ddof=1)[0, 1]), boot_seed=derive_seed(master_seed, 70)
    )
    rhs = estimate(rec[:, 2], boot_seed=derive_seed(master_seed, 71))
    gap = bootstrap_stat(
        cols,
        lambda r: float(np.cov(r[:, 0], r[:, 1], ddof=1)[0, 1] - r[:, 2].mean()),
        boot_seed=derive_seed(master_seed, 72),
    )
    return build_report(
        "cov_H_W",
        lhs,
        rhs,
        sigma=gap.stderr,
        tolerance=DEFAULT_TOLERANCE,
        config=_config(grid, n_replicas, master_seed, z=z, x=x),
        details=guard,
    )


def check_cov_decay(
    t: float,
    x_list: Sequence[float],
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> list[IdentityReport]:
    """Cov[H(t,x), H(t,0)] along a distance ladder; must vanish for x >= 10 sqrt(t)."""
    xs = tuple(float(x) for x in x_list)
    if grid is None:
        half = max(10.0, (max(xs) if xs else 0.0) + 6.0 * math.sqrt(t))
        grid = desk_grid(t, half_width=half)
    rec = np.array(run_ensemble(partial(_field_replica, grid=grid, seed=master_seed, xs=xs), n_replicas, workers))
    h0 = rec[:, 0]
    reports = []
    threshold = 10.0 * math.sqrt(t)
    for j, x in enumerate(xs):
        hx = rec[:, 1 + 2 * j]
        cols = np.column_stack([h0, hx])
        if x == 0.0:
            cov = variance_estimate(h0, boot_seed=derive_seed(master_seed, 80))
            passed = cov.mean > 0.0
        else:
            cov = bootstrap_stat(
                cols, lambda r: float(np.cov(r[:, 0], r[:, 1], ddof=1)[0, 1]), boot_seed=derive_seed(master_seed, 81 + j)
            )
            passed = abs(cov.mean) < 3.0 * cov.stderr if x >= threshold else True
        reports.append(
            build_report(
                "cov_decay",
                cov,
                Estimate.exact(0.0),
                mode="identity",
                sigma=cov.stderr,
                passed=passed,
                config=_config(grid, n_replicas, master_seed, x=x),
                details={"decisive": bool(x >= threshold or x == 0.0)},
            )
        )
    return reports


def check_burgers_density(
    t: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """Slope two-point function E[d_x h(t,x) d_x h(0,y)] against the annealed endpoint density.

    The left side is estimated from height/boundary increments, averaged over
    replicas and over interior translations (the increment field is
    stationary in x); the right side is the annealed density on the same
    lags. Compared in L1 over |y| <= 3 sqrt(t).
    """
    grid = grid or desk_grid(t)
    y_max = 3.0 * math.sqrt(t)
    margin_pts = max(GUARD_MARGIN, int(round(2.0 * math.sqrt(t) / grid.dx)))
    interior = grid.n_points - 1 - 2 * margin_pts
    n_lags = min(int(round(y_max / grid.dx)), max(1, interior - 1))
    rec = np.array(
        run_ensemble(
            partial(_burgers_replica, grid=grid, seed=master_seed, n_lags=n_lags, margin_pts=margin_pts),
            n_replicas,
            workers,
        )
    )
    k = 2 * n_lags + 1
    curves = rec[:, :k] / grid.dx**2
    probs = rec[:, k:]
    o = grid.origin
    dens_on_lags = probs[:, o - n_lags:o + n_lags + 1]

    def l1_stat(r):
        lhs_curve = r[:, :k].mean(axis=0)
        rhs_curve = r[:, k:].mean(axis=0)
        return float(grid.dx * np.abs(lhs_curve - rhs_curve).sum())

    both = np.concatenate([curves, dens_on_lags], axis=1)
    l1 = bootstrap_stat(both, l1_stat, boot_seed=derive_seed(master_seed, 90))
    norm = estimate(grid.dx * curves.sum(axis=1), boot_seed=derive_seed(master_seed, 91))
    mean_curve = curves.mean(axis=0)
    se_curve = curves.std(axis=0, ddof=1) / math.sqrt(n_replicas)
    sym = float(grid.dx * np.abs(mean_curve - mean_curve[::-1]).sum())
    # expected symmetry gap under evenness, from the pointwise standard errors
    sym_floor = float(grid.dx * (math.sqrt(2.0 / math.pi) * np.hypot(se_curve, se_curve[::-1])).sum())
    lags = (np.arange(-n_lags, n_lags + 1) * grid.dx).tolist()
    return build_report(
        "burgers_density",
        l1,
        Estimate.exact(0.0),
        mode="bound",
        tolerance=0.1,
        passed=l1.mean < 0.1,
        config=_config(grid, n_replicas, master_seed),
        details={
            "normalization": norm.as_dict(),
            "symmetry_l1": sym,
            "symmetry_floor": sym_floor,
            "lags": lags,
            "two_point": mean_curve.tolist(),
            "annealed": dens_on_lags.mean(axis=0).tolist(),
        },
    )


def check_gaussian_tail(
    t: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """The annealed density has a Gaussian tail: -log E p(t,y) is quadratic in y.

    Weighted fits of -log E p on a + b y^2 versus a + b |y| over
    |y| in [1, 3 sqrt(t)]; the quadratic must win on AIC and explain
    R^2 > 0.95.
    """
    grid = grid or desk_grid(t)
    rec = np.array(run_ensemble(partial(_annealed_replica, grid=grid, seed=master_seed), n_replicas, workers))
    mean = rec.mean(axis=0)
    se = rec.std(axis=0, ddof=1) / math.sqrt(n_replicas)
    y = grid.x
    win = (np.abs(y) >= 1.0) & (np.abs(y) <= 3.0 * math.sqrt(t)) & (mean > 3.0 * se)
    if win.sum() < 4:
        raise ConfigError(
            "too few resolvable annealed-density points in the tail window; "
            "increase replicas or widen the domain"
        )
    ly = -np.log(mean[win])
    w = (mean[win] / se[win]) ** 2  # delta-method weights for log density

    def wls(design):
        wd = design * w[:, None]
        beta = np.linalg.solve(design.T @ wd, wd.T @ ly)
        resid = ly - design @ beta
        rss = float((w * resid**2).sum())
        n = ly.size
        aic = n * math.log(rss / n) + 2 * design.shape[1]
        ss_tot = float((w * (ly - (w * ly).sum() / w.sum()) ** 2).sum())
        r2 = 1.0 - rss / ss_tot if ss_tot > 0 else 1.0
        return beta, aic, r2

    quad = np.column_stack([np.ones(ly.size), y[win] ** 2])
    lin = np.column_stack([np.ones(ly.size), np.abs(y[win])])
    _, aic_q, r2_q = wls(quad)
    _, aic_l, r2_l = wls(lin)
    passed = (aic_q < aic_l) and (r2_q > 0.95)
    return build_report(
        "gaussian_tail",
        Estimate.exact(r2_q),
        Estimate.exact(0.95),
        mode="inequality",
        passed=passed,
        config=_config(grid, n_replicas, master_seed),
        details={
            "aic_quadratic": aic_q,
            "aic_linear": aic_l,
            "r2_quadratic": r2_q,
            "r2_linear": r2_l,
            "y": y.tolist(),
            "annealed_mean": mean.tolist(),
            "annealed_stderr": se.tolist(),
        },
    )


def run_duality_selftest(
    n_seeds: int = 100,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> IdentityReport:
    """Forward solve against the transposed row pairing over fresh random environments."""
    grid = grid or desk_grid(1.0)
    rec = np.array(run_ensemble(partial(_duality_replica, grid=grid, seed=master_seed), n_seeds, workers))
    worst = float(rec[:, 0].max())
    return build_report(
        "duality_selftest",
        Estimate.exact(worst),
        Estimate.exact(0.0),
        mode="bound",
        tolerance=1e-10,
        config=_config(grid, n_seeds, master_seed),
        details={"max_residual": worst, "mean_residual": float(rec[:, 0].mean())},
    )


def height_stats(
    t: float,
    n_replicas: int,
    grid: GridSpec | None = None,
    master_seed: int = 0,
    workers: int = 1,
) -> dict[str, Estimate]:
    """psi(t) = Var h0(t,0) and c(t) = E h0(t,0) from a forward-solve ensemble."""
    grid = grid or desk_grid(t)
    rec = np.array(run_ensemble(partial(_height_replica, grid=grid, seed=master_seed), n_replicas, workers))
    h0 = rec[:, 0]
    return {
        "psi": variance_estimate(h0, boot_seed=derive_seed(master_seed, 100)),
        "c": estimate(h0, boot_seed=derive_seed(master_seed, 101)),
    }
