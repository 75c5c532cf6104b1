"""Independent ground-truth generators.

Two oracles validate the Monte Carlo pipeline without trusting it:

* an exhaustive tensor-product Gauss-Hermite quadrature over every Gaussian
  degree of freedom of a tiny lattice (all noise cells plus all boundary
  increments), sharing the exact step operator with the solver, so it
  computes the same expectations the estimators target, to quadrature
  accuracy;
* a zero-noise semianalytic oracle: with the noise switched off the
  propagator row is the deterministic lattice heat kernel, and observables
  that only involve boundary randomness reduce to cheap Monte Carlo (or
  closed forms) over boundary paths alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache, partial

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import ConfigError, TooLarge
from .montecarlo_stats import Estimate, estimate, run_ensemble, variance_estimate
from .polymer import endpoint_density, log_partition, quenched_moment
from .rng_noise import NoiseHandle, make_key, sample_boundary
from .she_core import GridSpec, apply_diffusion, green_row, noise_weights

#: Hard cap on total tensor-product quadrature nodes.
NODE_BUDGET = 10**8

OBSERVABLES = (
    "mean_h",
    "var_h",
    "mean_abs_endpoint",
    "mean_endpoint_sq",
    "mean_quenched_mean_sq",
    "free_energy_shift",
)


@dataclass(frozen=True)
class TinyInstance:
    """A lattice small enough for exhaustive quadrature.

    n_points must be odd (the grid keeps a point at x = 0) and at most 5;
    n_steps at most 3. The Gaussian dimensions are the n_steps * n_points
    noise cells plus the n_points - 1 boundary increments; switching either
    group off freezes those dimensions at zero.
    """

    n_points: int = 3
    n_steps: int = 2
    dx: float = 1.0
    quad_order: int = 12
    noise_on: bool = True
    boundary_on: bool = True

    def __post_init__(self):
        if self.n_points not in (3, 5):
            raise ConfigError("n_points must be 3 or 5 (odd, at most 5)")
        if not 1 <= self.n_steps <= 3:
            raise ConfigError("n_steps must be between 1 and 3")
        if self.quad_order < 2:
            raise ConfigError("quad_order must be at least 2")

    @property
    def dims(self) -> int:
        d = 0
        if self.noise_on:
            d += self.n_steps * self.n_points
        if self.boundary_on:
            d += self.n_points - 1
        return d

    @property
    def n_nodes(self) -> int:
        return self.quad_order**self.dims

    def grid(self) -> GridSpec:
        dt = self.dx * self.dx / 2.0
        half = (self.n_points - 1) // 2 * self.dx
        return GridSpec.create(dx=self.dx, half_width=half, t_final=self.n_steps * dt, dt=dt)


def _gh_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = hermegauss(order)
    return nodes, weights / math.sqrt(2.0 * math.pi)


def _tensor(nodes: np.ndarray, weights: np.ndarray, dims: int) -> tuple[np.ndarray, np.ndarray]:
    """All q^dims combinations as a (K, dims) array with product weights."""
    if dims == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*([nodes] * dims), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.ones(pts.shape[0])
    for g in np.meshgrid(*([weights] * dims), indexing="ij"):
        w *= g.ravel()
    return pts, w


def _boundary_from_increments(inc: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Path values on the grid from scaled standard-normal increments.

    inc has n_points - 1 columns: first the increments going right from the
    origin, then the ones going left.
    """
    n = grid.n_points
    o = grid.origin
    vals = np.zeros(inc.shape[:-1] + (n,))
    scale = math.sqrt(grid.dx)
    n_right = n - 1 - o
    vals[..., o + 1:] = np.cumsum(scale * inc[..., :n_right], axis=-1)
    left = np.cumsum(scale * inc[..., n_right:], axis=-1)
    vals[..., o - 1::-1] = left
    return vals


@lru_cache(maxsize=8)
def _sweep(instance: TinyInstance) -> dict:
    """All oracle moments in one pass over the tensor grid.

    The noise combinations index the propagator rows (one reverse recursion,
    vectorized over combinations); the boundary combinations then pair with
    every row. Observables are exact expectations of the same lattice
    functionals the Monte Carlo estimators use.
    """
    if instance.n_nodes > NODE_BUDGET:
        raise TooLarge(
            f"{instance.n_nodes} quadrature nodes exceed the {NODE_BUDGET} budget; "
            "shrink the instance or the order"
        )
    grid = instance.grid()
    n = grid.n_points
    steps = grid.n_steps
    nodes, weights = _gh_nodes(instance.quad_order)

    if instance.noise_on:
        eta_flat, w_noise = _tensor(nodes, weights, steps * n)
        eta = eta_flat.reshape(-1, steps, n)
    else:
        eta = np.zeros((1, steps, n))
        w_noise = np.ones(1)

    # reverse (transposed) recursion -> propagator rows, vectorized over combos
    rows = np.zeros((eta.shape[0], n))
    rows[:, grid.origin] = 1.0 / grid.dx
    for k in range(steps - 1, -1, -1):
        rows = apply_diffusion(grid, rows)
        if instance.noise_on:
            rows *= noise_weights(grid, eta[:, k, :])

    if instance.boundary_on:
        inc, w_bnd = _tensor(nodes, weights, n - 1)
        w_paths = _boundary_from_increments(inc, grid)
    else:
        w_paths = np.zeros((1, n))
        w_bnd = np.ones(1)

    y = grid.x
    abs_y = np.abs(y)
    acc = {k: 0.0 for k in ("h", "h2", "abs_end", "end_sq", "qmean_sq")}
    theta_acc: dict[float, float] = {}
    for b in range(w_paths.shape[0]):
        e_w = np.exp(w_paths[b])
        mass = rows @ e_w
        h = np.log(grid.dx * mass)
        p_num = rows * e_w[None, :]
        m_abs = (p_num @ abs_y) / mass
        m1 = (p_num @ y) / mass
        m2 = (p_num @ (y * y)) / mass
        wb = w_bnd[b]
        acc["h"] += wb * float(w_noise @ h)
        acc["h2"] += wb * float(w_noise @ (h * h))
        acc["abs_end"] += wb * float(w_noise @ m_abs)
        acc["end_sq"] += wb * float(w_noise @ m2)
        acc["qmean_sq"] += wb * float(w_noise @ (m1 * m1))
    acc["boundary_paths"] = w_paths
    acc["rows"] = rows
    acc["w_noise"] = w_noise
    acc["w_bnd"] = w_bnd
    acc["grid"] = grid
    return acc


def quadrature_expectation(instance: TinyInstance, observable: str, theta: float = 0.0) -> float:
    """Exact expectation (to quadrature accuracy) of a named observable."""
    if observable not in OBSERVABLES:
        raise ConfigError(f"unknown observable {observable!r}; expected one of {OBSERVABLES}")
    acc = _sweep(instance)
    if observable == "mean_h":
        return acc["h"]
    if observable == "var_h":
        return acc["h2"] - acc["h"] ** 2
    if observable == "mean_abs_endpoint":
        return acc["abs_end"]
    if observable == "mean_endpoint_sq":
        return acc["end_sq"]
    if observable == "mean_quenched_mean_sq":
        return acc["qmean_sq"]
    # free_energy_shift: E h_theta - E h_0 with the same nodes
    grid = acc["grid"]
    rows, w_noise, w_bnd = acc["rows"], acc["w_noise"], acc["w_bnd"]
    tilt = theta * grid.x
    shift = 0.0
    for b in range(acc["boundary_paths"].shape[0]):
        e_w0 = np.exp(acc["boundary_paths"][b])
        e_wt = np.exp(acc["boundary_paths"][b] + tilt)
        h0 = np.log(grid.dx * (rows @ e_w0))
        ht = np.log(grid.dx * (rows @ e_wt))
        shift += w_bnd[b] * float(w_noise @ (ht - h0))
    return shift


def _tiny_mc_replica(rid: int, *, grid: GridSpec, seed: int, theta: float) -> tuple:
    noise = NoiseHandle(make_key(seed, rid, "noise"), grid)
    w = sample_boundary(grid, 0.0, make_key(seed, rid, "boundary"))
    row = green_row(noise, grid)
    p = endpoint_density(row, w, 0.0)
    h0 = log_partition(row, w)
    h_shift = log_partition(row, w, theta) - h0 if theta != 0.0 else 0.0
    m1 = quenched_moment(p, 1)
    return (h0, quenched_moment(p, 1, absolute=True), quenched_moment(p, 2), m1 * m1, h_shift)


def tiny_mc(instance: TinyInstance, n_replicas: int, master_seed: int = 0,
            theta: float = 0.0, workers: int = 1) -> dict[str, Estimate]:
    """Monte Carlo on the tiny lattice with the production solver, for oracle comparison."""
    grid = instance.grid()
    rec = np.array(
        run_ensemble(partial(_tiny_mc_replica, grid=grid, seed=master_seed, theta=theta), n_replicas, workers)
    )
    return {
        "mean_h": estimate(rec[:, 0], boot_seed=1),
        "var_h": variance_estimate(rec[:, 0], boot_seed=2),
        "mean_abs_endpoint": estimate(rec[:, 1], boot_seed=3),
        "mean_endpoint_sq": estimate(rec[:, 2], boot_seed=4),
        "mean_quenched_mean_sq": estimate(rec[:, 3], boot_seed=5),
        "free_energy_shift": estimate(rec[:, 4], boot_seed=6),
    }


ZERO_NOISE_OBSERVABLES = (
    "mean_h",
    "var_h",
    "mean_abs_endpoint",
    "mean_first_moment",
    "normalization",
    "annealed_symmetry_l1",
    "cov_H_W_lhs",
    "cov_H_W_rhs",
)


def deterministic_kernel(grid: GridSpec, origin: int | None = None) -> np.ndarray:
    """The zero-noise propagator row: the lattice heat kernel from `origin`."""
    v = np.zeros(grid.n_points)
    v[grid.origin if origin is None else origin] = 1.0 / grid.dx
    for _ in range(grid.n_steps):
        v = apply_diffusion(grid, v)
    return v


def zero_noise_oracle(
    grid: GridSpec,
    observable: str,
    n_paths: int,
    master_seed: int = 0,
    z: float = 0.0,
    x: float = 1.0,
    block: int = 4096,
) -> Estimate:
    """Expectations with the noise off: deterministic kernel, randomness only in W.

    With n_paths == 0 the boundary is frozen at W = 0 and the value is
    deterministic. Supports the boundary-only sides of the height/boundary
    covariance identity, annealed symmetry, normalization, and the basic
    height/endpoint moments.
    """
    if observable not in ZERO_NOISE_OBSERVABLES:
        raise ConfigError(
            f"unknown zero-noise observable {observable!r}; expected one of {ZERO_NOISE_OBSERVABLES}"
        )
    kern = deterministic_kernel(grid)
    log_kern = np.where(kern > 0, np.log(np.where(kern > 0, kern, 1.0)), -np.inf)
    y = grid.x
    iz = grid.index_of(z)
    kern_z = deterministic_kernel(grid, origin=iz) if iz != grid.origin else kern
    log_kern_z = np.where(kern_z > 0, np.log(np.where(kern_z > 0, kern_z, 1.0)), -np.inf)

    if n_paths == 0:
        w_all = np.zeros((1, grid.n_points))
    else:
        gen = make_key(master_seed, 0, "boundary").generator()
        w_all = None  # generated per block below

    def batch_values(w_mat: np.ndarray) -> np.ndarray:
        logits = log_kern[None, :] + w_mat
        m = logits.max(axis=1, keepdims=True)
        p = np.exp(logits - m)
        norm = p.sum(axis=1)
        if observable == "mean_h":
            return m[:, 0] + np.log(norm) + math.log(grid.dx)
        if observable == "var_h":
            return m[:, 0] + np.log(norm) + math.log(grid.dx)
        if observable == "mean_abs_endpoint":
            return (p @ np.abs(y)) / norm
        if observable == "mean_first_moment":
            return (p @ y) / norm
        if observable == "normalization":
            return grid.dx * (p / (grid.dx * norm[:, None])).sum(axis=1)
        if observable == "cov_H_W_lhs":
            logits_z = log_kern_z[None, :] + w_mat - w_mat[:, iz:iz + 1]
            mz = logits_z.max(axis=1, keepdims=True)
            h_z = mz[:, 0] + np.log(np.exp(logits_z - mz).sum(axis=1)) + math.log(grid.dx)
            return np.stack([h_z, w_mat[:, grid.index_of(x)]], axis=1)
        if observable == "cov_H_W_rhs":
            integrand = np.where(z + y > 0.0, np.minimum(x, z + y), 0.0)
            return (p @ integrand) / norm - min(x, z)
        raise AssertionError(observable)

    if observable == "annealed_symmetry_l1":
        # L1 distance between the annealed density and its reflection
        if n_paths == 0:
            return Estimate.exact(0.0)
        total = np.zeros(grid.n_points)
        done = 0
        while done < n_paths:
            take = min(block, n_paths - done)
            inc = gen.standard_normal((take, grid.n_points - 1))
            w_mat = _boundary_from_increments(inc, grid)
            logits = log_kern[None, :] + w_mat
            m = logits.max(axis=1, keepdims=True)
            p = np.exp(logits - m)
            p /= grid.dx * p.sum(axis=1, keepdims=True)
            total += p.sum(axis=0)
            done += take
        mean_p = total / n_paths
        l1 = float(grid.dx * np.abs(mean_p - mean_p[::-1]).sum())
        return Estimate(mean=l1, stderr=0.0, ci_low=l1, ci_high=l1, n=n_paths)

    values = []
    if n_paths == 0:
        values.append(batch_values(w_all))
    else:
        done = 0
        while done < n_paths:
            take = min(block, n_paths - done)
            inc = gen.standard_normal((take, grid.n_points - 1))
            values.append(batch_values(_boundary_from_increments(inc, grid)))
            done += take
    vals = np.concatenate(values, axis=0)

    if observable == "var_h":
        if vals.shape[0] == 1:
            return Estimate.exact(0.0)
        return variance_estimate(vals, boot_seed=11)
    if observable == "cov_H_W_lhs":
        if vals.shape[0] == 1:
            return Estimate.exact(0.0)
        from .montecarlo_stats import bootstrap_stat

        return bootstrap_stat(
            vals, lambda r: float(np.cov(r[:, 0], r[:, 1], ddof=1)[0, 1]), boot_seed=12
        )
    if vals.shape[0] == 1:
        return Estimate.exact(float(vals[0]))
    return estimate(vals, boot_seed=13)
