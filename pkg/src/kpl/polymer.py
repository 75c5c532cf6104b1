"""Quenched and annealed endpoint densities of the directed polymer.

For one realization of the environment (noise row + boundary path), the
quenched endpoint density on the lattice is

    p_theta(y_j)  propto  row_j * exp(W(y_j) + theta * y_j),

normalized so that dx * sum(p) = 1. All arithmetic stays in log domain until
the final normalized exponentiation: W(y) + theta*y spans hundreds of nats
across the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDensity, EmptyEnsemble
from .rng_noise import BoundaryPath, RngKey
from .she_core import GridSpec, PropagatorRow, logsumexp


@dataclass
class EndpointDensity:
    """Normalized quenched endpoint density on the grid (dx * probs.sum() == 1)."""

    probs: np.ndarray
    grid: GridSpec
    theta: float
    start_x: float = 0.0

    @property
    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs)


@dataclass
class AnnealedDensity:
    """Pointwise replica mean of quenched densities, with standard errors."""

    mean_probs: np.ndarray
    stderr_probs: np.ndarray
    n_replicas: int
    grid: GridSpec
    theta: float


def _normalize_logits(logits: np.ndarray, dx: float) -> np.ndarray:
    m = float(np.max(logits))
    if not np.isfinite(m):
        raise DegenerateDensity("all density weights vanished")
    p = np.exp(logits - m)
    p /= dx * p.sum()
    return p


def endpoint_density(row: PropagatorRow, boundary: BoundaryPath, theta: float) -> EndpointDensity:
    """Quenched density of the polymer endpoint under boundary tilt theta."""
    grid = row.grid
    logits = row.log_weights + boundary.values
    if theta != 0.0:
        logits = logits + theta * grid.x
    return EndpointDensity(probs=_normalize_logits(logits, grid.dx), grid=grid, theta=theta)


def tilt_density(p: EndpointDensity, theta: float) -> EndpointDensity:
    """Exponentially tilt an untilted density; equals building the theta density directly."""
    if p.theta != 0.0:
        raise ValueError("tilt_density expects an untilted density")
    if theta == 0.0:
        return EndpointDensity(probs=p.probs.copy(), grid=p.grid, theta=0.0, start_x=p.start_x)
    logits = p.log_probs + theta * p.grid.x
    return EndpointDensity(
        probs=_normalize_logits(logits, p.grid.dx), grid=p.grid, theta=theta, start_x=p.start_x
    )


def quenched_moment(p: EndpointDensity, k: int, absolute: bool = False) -> float:
    """dx * sum(y^k * p) (or |y|^k with absolute=True), k in {1, 2}."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    y = p.grid.x
    yk = np.abs(y) if absolute else y
    if k == 2:
        yk = y * y
    return float(p.grid.dx * np.dot(yk, p.probs))


def tail_mass(p: EndpointDensity, level: float, above: bool = True) -> float:
    """Quenched probability of the endpoint above (or at/below) a level."""
    sel = p.grid.x > level if above else p.grid.x <= level
    return float(p.grid.dx * p.probs[sel].sum())


def sample_endpoint(p: EndpointDensity, key: RngKey) -> float:
    """Inverse-CDF draw from the discrete density; deterministic per key."""
    u = float(key.generator().random())
    cdf = np.cumsum(p.probs) * p.grid.dx
    i = int(np.searchsorted(cdf, u * cdf[-1]))
    return float(p.grid.x[min(i, p.grid.n_points - 1)])


def annealed_density(densities: list[EndpointDensity]) -> AnnealedDensity:
    """Pointwise mean and standard error across replicas."""
    if not densities:
        raise EmptyEnsemble("annealed_density needs at least one replica")
    grid = densities[0].grid
    theta = densities[0].theta
    for d in densities[1:]:
        if d.grid != grid or d.theta != theta:
            raise ValueError("densities must share grid and tilt")
    mat = np.stack([d.probs for d in densities])
    mean = mat.mean(axis=0)
    n = len(densities)
    stderr = mat.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return AnnealedDensity(mean_probs=mean, stderr_probs=stderr, n_replicas=n, grid=grid, theta=theta)


def log_partition(row: PropagatorRow, boundary: BoundaryPath, theta: float = 0.0) -> float:
    """h_theta(t, 0) = log( dx * sum_j row_j * exp(W_j + theta*y_j) ).

    The tilted partition function is the moment generating function of the
    untilted density, so one propagator row yields the height at the origin
    for every tilt of the same boundary realization.
    """
    logits = row.log_weights + boundary.values
    if theta != 0.0:
        logits = logits + theta * row.grid.x
    return row.log_offset + float(np.log(row.grid.dx)) + logsumexp(logits)


def log_mass_split(row: PropagatorRow, boundary: BoundaryPath, theta: float, level: float) -> tuple[float, float]:
    """(log mass above level, log mass at/below level) of the unnormalized weights."""
    grid = row.grid
    logits = row.log_weights + boundary.values + theta * grid.x
    hi = grid.x > level
    above = logsumexp(logits[hi]) if hi.any() else -np.inf
    below = logsumexp(logits[~hi]) if (~hi).any() else -np.inf
    return above, below
