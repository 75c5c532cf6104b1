"""kpl: a Monte Carlo lab for the stationary stochastic heat equation and its polymer.

Simulates the multiplicative-noise heat equation started from drifted
two-sided Brownian data, reconstructs the directed-polymer endpoint law it
encodes, and checks every identity, inequality, and bound-proving device of
the t^{2/3} height-variance argument at desk scale.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    BoundaryLeak,
    ConfigError,
    DegenerateDensity,
    EmptyEnsemble,
    InvalidParams,
    KplError,
    OutOfDomain,
    Overflow,
    PathwiseViolation,
    ReplicaError,
    TooLarge,
)
from .montecarlo_stats import Estimate, ExponentFit, estimate, fit_exponent, ks_two_sample, run_ensemble, variance_estimate
from .rng_noise import BoundaryPath, NoiseHandle, RngKey, derive_seed, make_key, sample_boundary, tilt_path
from .she_core import (
    GridSpec,
    HeightField,
    PropagatorRow,
    boundary_mass_guard,
    duality_check,
    evolve,
    green_row,
    step,
)
from .polymer import (
    AnnealedDensity,
    EndpointDensity,
    annealed_density,
    endpoint_density,
    log_partition,
    quenched_moment,
    sample_endpoint,
    tilt_density,
)
from .identities import IdentityReport
from .bounds_lab import CouplingSample, LowerBoundParams
from .oracle import TinyInstance, quadrature_expectation, zero_noise_oracle

__all__ = [
    "__version__",
    "AnnealedDensity",
    "BoundaryLeak",
    "BoundaryPath",
    "ConfigError",
    "CouplingSample",
    "DegenerateDensity",
    "EmptyEnsemble",
    "EndpointDensity",
    "Estimate",
    "ExponentFit",
    "GridSpec",
    "HeightField",
    "IdentityReport",
    "InvalidParams",
    "KplError",
    "LowerBoundParams",
    "NoiseHandle",
    "OutOfDomain",
    "Overflow",
    "PathwiseViolation",
    "PropagatorRow",
    "ReplicaError",
    "RngKey",
    "TinyInstance",
    "TooLarge",
    "annealed_density",
    "boundary_mass_guard",
    "derive_seed",
    "duality_check",
    "endpoint_density",
    "estimate",
    "evolve",
    "fit_exponent",
    "green_row",
    "ks_two_sample",
    "log_partition",
    "make_key",
    "quadrature_expectation",
    "quenched_moment",
    "run_ensemble",
    "sample_boundary",
    "sample_endpoint",
    "step",
    "tilt_density",
    "tilt_path",
    "variance_estimate",
    "zero_noise_oracle",
]
