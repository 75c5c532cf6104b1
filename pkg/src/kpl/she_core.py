"""Lattice stochastic heat equation with multiplicative noise, in log-stabilized form.

The field evolves by a positivity-preserving exponential Euler scheme,

    Z_{n+1} = A (Z_n * w_n),   w_{n,i} = exp(sigma * eta_{n,i} - sigma^2 / 2),

with sigma = sqrt(dt/dx), eta i.i.d. standard normals, and A = I + (dt/2) L
the explicit heat operator with reflecting (Neumann) boundary rows. A is
symmetric with unit row and column sums, so constants and total mass are
both preserved exactly and the Green's-function row at the origin can be
extracted by running the same recursion transposed (reverse in time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, Overflow
from .rng_noise import BoundaryPath, NoiseHandle

#: Renormalization window; the log-offset absorbs the scale whenever the
#: max weight leaves it. h grows linearly in t, raw Z would overflow.
_RENORM_HI = 2.0**64
_RENORM_LO = 2.0**-64


@dataclass(frozen=True)
class GridSpec:
    """Space/time lattice: domain [-L, L] with step dx, horizon t_final with step dt.

    x = 0 always falls on a grid point and t_final = n_steps * dt exactly
    (dt is adjusted at construction). Positivity of the scheme requires
    dt <= dx^2; the default dt is dx^2 / 2.
    """

    dx: float
    dt: float
    half_width: float
    t_final: float
    n_points: int
    n_steps: int
    origin: int

    @classmethod
    def create(
        cls,
        dx: float = 0.05,
        half_width: float = 10.0,
        t_final: float = 1.0,
        dt: float | None = None,
    ) -> "GridSpec":
        if dx <= 0 or half_width <= 0 or t_final <= 0:
            raise ConfigError("dx, half_width and t_final must all be positive")
        if dt is None:
            dt = dx * dx / 2.0
        if dt <= 0:
            raise ConfigError("dt must be positive")
        if dt > dx * dx * (1 + 1e-12):
            raise ConfigError(
                f"stability requires dt <= dx^2 (got dt={dt}, dx^2={dx * dx}): "
                "the diffusion operator diagonal would turn negative"
            )
        n_half = round(half_width / dx)
        if n_half < 1:
            raise ConfigError("half_width must cover at least one grid step")
        n_steps = max(1, round(t_final / dt))
        dt_adj = t_final / n_steps
        if dt_adj > dx * dx * (1 + 1e-12):
            raise ConfigError(
                f"adjusted dt={dt_adj} violates dt <= dx^2; refine dt or t_final"
            )
        return cls(
            dx=dx,
            dt=dt_adj,
            half_width=n_half * dx,
            t_final=t_final,
            n_points=2 * n_half + 1,
            n_steps=n_steps,
            origin=n_half,
        )

    @cached_property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.origin) * self.dx

    @property
    def diffusion_number(self) -> float:
        """dt / (2 dx^2), the off-diagonal entry of A."""
        return self.dt / (2.0 * self.dx * self.dx)

    @property
    def noise_scale(self) -> float:
        """sqrt(dt/dx): std of the cell-averaged spacetime noise over one step."""
        return math.sqrt(self.dt / self.dx)

    def index_of(self, x: float) -> int:
        i = self.origin + round(x / self.dx)
        if not 0 <= i < self.n_points:
            raise ConfigError(f"x={x} outside the domain [-{self.half_width}, {self.half_width}]")
        return i


@dataclass
class HeightField:
    """Positive field in split representation: Z(x_i) = weights_i * exp(log_offset)."""

    weights: np.ndarray
    log_offset: float
    grid: GridSpec
    time_index: int

    @property
    def heights(self) -> np.ndarray:
        """h(x_i) = log Z(x_i)."""
        with np.errstate(divide="ignore"):
            return np.log(self.weights) + self.log_offset

    def height_at(self, x: float) -> float:
        i = self.grid.index_of(x)
        return float(math.log(self.weights[i]) + self.log_offset)


@dataclass
class PropagatorRow:
    """The Green's-function row Z_t(x_origin, y_j) in split representation."""

    weights: np.ndarray
    log_offset: float
    origin: int
    grid: GridSpec

    @property
    def t_final(self) -> float:
        return self.grid.t_final

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def log_mass(self) -> float:
        return self.log_offset + math.log(self.grid.dx * float(self.weights.sum()))


def logsumexp(a: np.ndarray) -> float:
    m = float(np.max(a))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.exp(a - m).sum()))


def apply_diffusion(grid: GridSpec, values: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """A @ values on the last axis, with reflecting boundary rows."""
    r = grid.diffusion_number
    if out is None:
        out = np.empty_like(values)
    out[..., 1:-1] = values[..., 1:-1] + r * (
        values[..., :-2] - 2.0 * values[..., 1:-1] + values[..., 2:]
    )
    out[..., 0] = values[..., 0] + r * (values[..., 1] - values[..., 0])
    out[..., -1] = values[..., -1] + r * (values[..., -2] - values[..., -1])
    return out


def noise_weights(grid: GridSpec, eta: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Unit-mean lognormal step weights exp(sigma*eta - sigma^2/2)."""
    sig = grid.noise_scale
    out = np.multiply(eta, sig, out=out)
    out -= 0.5 * sig * sig
    return np.exp(out, out=out)


def _renormalize(weights: np.ndarray, log_offset: float, step: int) -> float:
    m = float(weights.max())
    if not math.isfinite(m) or m <= 0.0:
        raise Overflow(
            f"field weights left the finite range at step {step}; check dt <= dx^2",
            step=step,
        )
    if m > _RENORM_HI or m < _RENORM_LO:
        log_offset += math.log(m)
        weights /= m
    return log_offset


def step(field: HeightField, noise: NoiseHandle, n: int) -> HeightField:
    """One scheme step from time index n; returns a new field at n + 1."""
    if field.time_index != n:
        raise ValueError(f"field is at time index {field.time_index}, expected {n}")
    if noise.zero_noise:
        y = field.weights
    else:
        y = field.weights * noise_weights(field.grid, noise.row(n))
    weights = apply_diffusion(field.grid, y)
    log_offset = _renormalize(weights, field.log_offset, n)
    return HeightField(weights=weights, log_offset=log_offset, grid=field.grid, time_index=n + 1)


def evolve(init: BoundaryPath, noise: NoiseHandle, grid: GridSpec) -> HeightField:
    """Run the full horizon from Z(0, x) = exp(init(x)); returns the field at t_final."""
    if init.grid is not grid and init.grid != grid:
        raise ValueError("initial data lives on a different grid")
    off = float(init.values.max())
    cur = np.exp(init.values - off)
    mid = np.empty_like(cur)
    nxt = np.empty_like(cur)
    w = None if noise.zero_noise else np.empty_like(cur)
    for n in range(grid.n_steps):
        if noise.zero_noise:
            y = cur
        else:
            noise_weights(grid, noise.row(n), out=w)
            y = np.multiply(cur, w, out=mid)
        apply_diffusion(grid, y, out=nxt)
        off = _renormalize(nxt, off, n)
        cur, nxt = nxt, cur
    return HeightField(weights=cur, log_offset=off, grid=grid, time_index=grid.n_steps)


def green_row(noise: NoiseHandle, grid: GridSpec) -> PropagatorRow:
    """Green's-function row Z_t(0, .) by the transposed (reverse-time) recursion.

    Starting from a unit-mass delta at the origin (1/dx on the lattice), apply
    v <- w_n * (A v) for n = T-1 down to 0, regenerating each noise row from
    the handle. Symmetry of A and diagonality of the weights make the result
    pair exactly with any initial condition: dx * <row, exp(f)> equals the
    forward solve from f evaluated at the origin.
    """
    cur = np.zeros(grid.n_points)
    cur[grid.origin] = 1.0 / grid.dx
    off = 0.0
    nxt = np.empty_like(cur)
    w = None if noise.zero_noise else np.empty_like(cur)
    for n in range(grid.n_steps - 1, -1, -1):
        apply_diffusion(grid, cur, out=nxt)
        if not noise.zero_noise:
            noise_weights(grid, noise.row(n), out=w)
            nxt *= w
        off = _renormalize(nxt, off, n)
        cur, nxt = nxt, cur
    return PropagatorRow(weights=cur, log_offset=off, origin=grid.origin, grid=grid)


def pair_with_initial(row: PropagatorRow, init: BoundaryPath) -> float:
    """log of dx * <row, exp(init)>: the origin height of the forward solve from init."""
    return row.log_offset + math.log(row.grid.dx) + logsumexp(row.log_weights + init.values)


def duality_check(noise: NoiseHandle, grid: GridSpec, f: BoundaryPath) -> float:
    """Relative gap, in log domain, between the row pairing and the forward solve."""
    row = green_row(noise, grid)
    field = evolve(f, noise, grid)
    h_forward = float(math.log(field.weights[grid.origin]) + field.log_offset)
    h_paired = pair_with_initial(row, f)
    return abs(h_forward - h_paired)


def boundary_mass_guard(row: PropagatorRow, margin: int) -> float:
    """Normalized mass within `margin` grid points of either domain edge.

    Values above ~1e-4 mean the reflecting truncation is feeding back into
    the solution; callers treat that as a BoundaryLeak.
    """
    if margin < 1:
        raise ValueError("margin must be >= 1")
    w = row.weights
    total = float(w.sum())
    if total <= 0.0:
        return 1.0
    edge = float(w[:margin].sum() + w[-margin:].sum())
    return edge / total


def edge_mass(probs: np.ndarray, dx: float, margin: int) -> float:
    """Same guard for an already-normalized density vector."""
    if margin < 1:
        raise ValueError("margin must be >= 1")
    return float(dx * (probs[:margin].sum() + probs[-margin:].sum()))
