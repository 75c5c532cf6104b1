"""Reproducible random streams: spacetime noise cells and two-sided Brownian boundary data.

Every random draw in the package is a pure function of an :class:`RngKey`
(master seed, replica id, purpose). Noise cells are regenerated on demand
from counter-style per-chunk keys, so a reverse sweep over time steps sees
exactly the same values as a forward sweep without storing the full field.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .errors import OutOfDomain

if TYPE_CHECKING:
    from .she_core import GridSpec

PURPOSES = ("noise", "boundary", "auxiliary")
_PURPOSE_CODE = {name: i for i, name in enumerate(PURPOSES)}

#: Noise rows generated per chunk; amortizes generator construction.
_CHUNK_ROWS = 64

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngKey:
    """Identifies one independent random stream.

    Keys differing in any field give statistically independent streams; the
    same key always reproduces the same stream regardless of call order or
    worker count.
    """

    master_seed: int
    replica_id: int
    purpose: str

    def __post_init__(self):
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown purpose {self.purpose!r}, expected one of {PURPOSES}")
        if self.replica_id < 0:
            raise ValueError("replica_id must be >= 0")

    def seed_entropy(self, *extra: int) -> tuple[int, ...]:
        return (
            self.master_seed & _MASK64,
            self.replica_id,
            _PURPOSE_CODE[self.purpose],
            *extra,
        )

    def generator(self, *extra: int) -> np.random.Generator:
        """Counter-based generator for this key, optionally sub-keyed by `extra`."""
        return np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.seed_entropy(*extra)))
        )


def make_key(master_seed: int, replica_id: int, purpose: str) -> RngKey:
    return RngKey(master_seed, replica_id, purpose)


def derive_seed(master_seed: int, *path: int) -> int:
    """Deterministic 64-bit sub-seed for ensembles that need their own master stream."""
    ss = np.random.SeedSequence((master_seed & _MASK64, *path))
    return int(ss.generate_state(1, np.uint64)[0])


class NoiseHandle:
    """On-demand access to the standard-normal noise cells of one realization.

    ``cell(n, i)`` is the unit normal driving spatial site ``i`` at time step
    ``n``; the solver scales it by sqrt(dt/dx) to represent the cell average
    of spacetime white noise. Cells are generated in chunks of consecutive
    time rows keyed by (master_seed, replica, purpose, chunk), so any access
    order reproduces identical values with O(chunk * N) memory.
    """

    def __init__(self, key: RngKey, grid: "GridSpec", zero_noise: bool = False):
        self.key = key
        self.grid = grid
        self.zero_noise = zero_noise
        self._chunk_index: int | None = None
        self._chunk: np.ndarray | None = None
        self._zero_row = np.zeros(grid.n_points) if zero_noise else None

    def row(self, n: int) -> np.ndarray:
        """All cells of time row ``n``. The returned array must not be mutated."""
        if not 0 <= n < self.grid.n_steps:
            raise IndexError(f"time row {n} outside 0..{self.grid.n_steps - 1}")
        if self.zero_noise:
            return self._zero_row
        c, r = divmod(n, _CHUNK_ROWS)
        if c != self._chunk_index:
            gen = self.key.generator(c)
            self._chunk = gen.standard_normal((_CHUNK_ROWS, self.grid.n_points))
            self._chunk_index = c
        return self._chunk[r]

    def cell(self, n: int, i: int) -> float:
        return float(self.row(n)[i])


@dataclass(frozen=True)
class BoundaryPath:
    """A two-sided Brownian path sampled on the grid, plus optional drift/tilt.

    ``values`` include drift and tilt; the path is exactly 0 at x = 0. A tilt
    ``(slope, n)`` adds ``slope * min(max(x, 0), n)``: linear on [0, n], flat
    shift slope*n beyond n, untouched for x < 0.
    """

    values: np.ndarray
    drift: float
    grid: "GridSpec"
    tilt: tuple[float, float] | None = None

    def __post_init__(self):
        if self.values.shape != (self.grid.n_points,):
            raise ValueError("boundary values do not match the grid")


def sample_boundary(grid: "GridSpec", theta: float, key: RngKey) -> BoundaryPath:
    """Sample W_theta(x) = W(x) + theta*x with W a two-sided Brownian motion, W(0) = 0.

    The path grows outward from the origin by two independent cumulative sums
    of sqrt(dx) * N(0,1) increments, which pins W(0) = 0 exactly on the grid.
    """
    gen = key.generator()
    inc = gen.standard_normal(grid.n_points - 1) * np.sqrt(grid.dx)
    o = grid.origin
    n_right = grid.n_points - 1 - o
    values = np.zeros(grid.n_points)
    values[o + 1:] = np.cumsum(inc[:n_right])
    values[o - 1::-1] = np.cumsum(inc[n_right:])
    if theta != 0.0:
        values = values + theta * grid.x
    return BoundaryPath(values=values, drift=theta, grid=grid)


def tilt_path(path: BoundaryPath, slope: float, n: float) -> BoundaryPath:
    """Add a drift ``slope`` on the interval [0, n] only (flat continuation past n).

    For slope >= 0 the result dominates the globally drifted path at every
    grid point y <= n, with equality on [0, n]; this exact ordering is what
    the pathwise coupling below relies on.
    """
    if path.tilt is not None:
        raise ValueError("path already carries a tilt")
    if n <= 0:
        raise OutOfDomain(f"tilt interval end {n} must be positive")
    if n > path.grid.half_width:
        raise OutOfDomain(
            f"tilt interval end {n} exceeds the grid half-width {path.grid.half_width}"
        )
    values = path.values + slope * np.clip(path.grid.x, 0.0, n)
    return replace(path, values=values, tilt=(slope, n))
