"""Replica orchestration, estimators with bootstrap uncertainty, and fits.

Aggregation is always done in replica-index order with compensated
summation, so results are a pure function of (config, master_seed) and
bitwise identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats as _sstats

from .errors import EmptyEnsemble, ReplicaError

#: Resamples for bootstrap confidence intervals. Height samples are skewed
#: at moderate t, so variance-type statistics get bootstrap rather than
#: asymptotic-normal intervals.
N_BOOT = 2000
CI_LEVEL = 0.99
_BOOT_SEED = 0xB0075


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo scalar: mean, standard error, bootstrap CI, sample count.

    With n == 1 the stderr is NaN (undefined) and the CI degenerates to the
    mean.
    """

    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    n: int

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.n,
        }

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        """A known scalar carried through the same reporting machinery."""
        return cls(mean=value, stderr=0.0, ci_low=value, ci_high=value, n=1)


def _fsum_mean(x: np.ndarray) -> float:
    return math.fsum(map(float, x)) / x.size


def _boot_gen(boot_seed: int, tag: int) -> np.random.Generator:
    # resampling stream: deterministic per boot_seed; chunk-friendly PCG64
    return np.random.default_rng(np.random.SeedSequence((_BOOT_SEED, boot_seed, tag)))


def _boot_resample(samples: np.ndarray, row_statistic: Callable[[np.ndarray], np.ndarray],
                   boot_seed: int, n_boot: int, tag: int) -> np.ndarray:
    """Bootstrap values of a per-row statistic, chunked to bound memory."""
    n = samples.shape[0]
    gen = _boot_gen(boot_seed, tag)
    block = max(1, min(n_boot, int(2e7) // max(n, 1)))
    vals = np.empty(n_boot)
    done = 0
    while done < n_boot:
        take = min(block, n_boot - done)
        idx = gen.integers(0, n, size=(take, n))
        vals[done:done + take] = row_statistic(samples[idx])
        done += take
    return vals


def _ci(vals: np.ndarray) -> tuple[float, float]:
    alpha = (1.0 - CI_LEVEL) / 2.0
    lo, hi = np.quantile(vals, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def estimate(samples: Sequence[float], boot_seed: int = 0, n_boot: int = N_BOOT) -> Estimate:
    """Sample mean with stderr s/sqrt(n) and a bootstrap 99% CI."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptyEnsemble("estimate of zero samples")
    m = _fsum_mean(x)
    if x.size == 1:
        return Estimate(mean=m, stderr=float("nan"), ci_low=m, ci_high=m, n=1)
    sd = math.sqrt(math.fsum((v - m) ** 2 for v in map(float, x)) / (x.size - 1))
    se = sd / math.sqrt(x.size)
    vals = _boot_resample(x, lambda b: b.mean(axis=1), boot_seed, n_boot, tag=0)
    lo, hi = _ci(vals)
    return Estimate(mean=m, stderr=se, ci_low=min(lo, m), ci_high=max(hi, m), n=x.size)


def variance_estimate(samples: Sequence[float], boot_seed: int = 0, n_boot: int = N_BOOT) -> Estimate:
    """Unbiased sample variance with a bootstrap 99% CI and bootstrap stderr."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptyEnsemble("variance of zero samples")
    m = _fsum_mean(x)
    if x.size == 1:
        return Estimate(mean=0.0, stderr=float("nan"), ci_low=0.0, ci_high=0.0, n=1)
    v = math.fsum((s - m) ** 2 for s in map(float, x)) / (x.size - 1)
    boots = _boot_resample(x, lambda b: b.var(axis=1, ddof=1), boot_seed, n_boot, tag=1)
    lo, hi = _ci(boots)
    return Estimate(
        mean=v,
        stderr=float(boots.std(ddof=1)),
        ci_low=min(lo, v),
        ci_high=max(hi, v),
        n=x.size,
    )


def bootstrap_stat(records: np.ndarray, statistic: Callable[[np.ndarray], float],
                   boot_seed: int = 0, n_boot: int = N_BOOT) -> Estimate:
    """Replica-resampling bootstrap of an arbitrary statistic of an (n, k) record matrix.

    Used for derived quantities (covariance combinations, L1 distances,
    quantile-free functionals) where per-sample stderr propagation is wrong.
    """
    records = np.asarray(records, dtype=float)
    if records.ndim == 1:
        records = records[:, None]
    n = records.shape[0]
    if n == 0:
        raise EmptyEnsemble("bootstrap of zero replicas")
    point = float(statistic(records))
    if n == 1:
        return Estimate(mean=point, stderr=float("nan"), ci_low=point, ci_high=point, n=1)
    gen = _boot_gen(boot_seed, tag=2)
    vals = np.empty(n_boot)
    for b in range(n_boot):
        vals[b] = statistic(records[gen.integers(0, n, size=n)])
    lo, hi = _ci(vals)
    return Estimate(
        mean=point,
        stderr=float(vals.std(ddof=1)),
        ci_low=min(lo, point),
        ci_high=max(hi, point),
        n=n,
    )


def combined_sigma(*estimates: Estimate) -> float:
    return math.sqrt(sum(0.0 if math.isnan(e.stderr) else e.stderr**2 for e in estimates))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    res = _sstats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float), method="asymp")
    return float(res.statistic), float(res.pvalue)


@dataclass(frozen=True)
class ExponentFit:
    """Weighted least-squares fit of log(value) = intercept + slope * log(t)."""

    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    points: tuple[tuple[float, float, float], ...]  # (t, value, stderr)


def fit_exponent(points: Sequence[tuple[float, Estimate]]) -> ExponentFit:
    """Power-law exponent by weighted log-log regression.

    Weights are 1/se(log v)^2 with se(log v) = stderr/mean (delta method);
    points with zero stderr get equal unit weights. Requires >= 3 points
    with t >= 1 and positive means.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 points to fit an exponent")
    t = np.array([p[0] for p in points], dtype=float)
    v = np.array([p[1].mean for p in points], dtype=float)
    se = np.array([p[1].stderr for p in points], dtype=float)
    if np.any(t < 1.0):
        raise ValueError("exponent fit is defined for t >= 1")
    if np.any(v <= 0):
        raise ValueError("values must be positive for a log-log fit")
    lx = np.log(t)
    ly = np.log(v)
    se_log = np.where(np.isnan(se) | (se <= 0), 0.0, se / v)
    w = np.ones_like(lx) if np.all(se_log == 0) else 1.0 / np.where(se_log == 0, se_log[se_log > 0].min(), se_log) ** 2
    sw = w.sum()
    xb = (w * lx).sum() / sw
    yb = (w * ly).sum() / sw
    sxx = (w * (lx - xb) ** 2).sum()
    slope = float((w * (lx - xb) * (ly - yb)).sum() / sxx)
    intercept = float(yb - slope * xb)
    resid = ly - (intercept + slope * lx)
    ss_res = float((w * resid**2).sum())
    ss_tot = float((w * (ly - yb) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    dof = max(1, len(points) - 2)
    slope_se = math.sqrt(max(ss_res / dof, 0.0) / sxx)
    return ExponentFit(
        slope=slope,
        intercept=intercept,
        r_squared=float(min(max(r2, 0.0), 1.0)),
        slope_stderr=slope_se,
        points=tuple((float(a), float(b), float(c)) for a, b, c in zip(t, v, se)),
    )


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("KPL_WORKERS", "1")))
    except ValueError:
        return 1


def run_ensemble(task: Callable[[int], tuple], n_replicas: int, workers: int = 1) -> list:
    """Run task(replica_id) for replica_id = 0..n-1; results in replica order.

    Each replica must be fully determined by its id (plus whatever seeds the
    task closes over), so the output is identical for any worker count. Task
    failures are re-raised as ReplicaError carrying the replica id.
    """
    if n_replicas < 1:
        raise EmptyEnsemble("n_replicas must be >= 1")
    if workers <= 1:
        out = []
        for rid in range(n_replicas):
            try:
                out.append(task(rid))
            except ReplicaError:
                raise
            except Exception as exc:
                raise ReplicaError(rid, exc) from exc
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(task, rid) for rid in range(n_replicas)]
        out = []
        for rid, fut in enumerate(futures):
            try:
                out.append(fut.result())
            except ReplicaError:
                raise
            except Exception as exc:
                raise ReplicaError(rid, exc) from exc
        return out
