"""Effective sample size and replicate summaries for benchmark tables.

ESS uses Geyer's initial monotone sequence estimator. Absolute ESS values
depend on the estimator, so numbers are only comparable within this package.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConstantSeries, EmptyInput

MIN_SERIES_LENGTH = 100


def autocovariance(series):
    """Biased (``1/n``) autocovariance at every lag, computed by FFT."""
    x = np.asarray(series, dtype=float)
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def ess(series):
    """Effective sample size ``n / tau`` of a scalar chain.

    ``tau = -1 + 2 sum_k Gamma_k`` where ``Gamma_k = rho_{2k} + rho_{2k+1}``
    are summed while positive and forced to be non-increasing. The result is
    clamped to ``(0, n]``.

    Raises:
        ConstantSeries: the autocorrelation is undefined.
        ValueError: fewer than 100 values.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < MIN_SERIES_LENGTH:
        raise ValueError(f"need at least {MIN_SERIES_LENGTH} values, got {n}")
    acov = autocovariance(x)
    if not acov[0] > 0 or not np.isfinite(acov[0]):
        raise ConstantSeries("series is constant")
    rho = acov / acov[0]
    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
    total = 0.0
    prev = math.inf
    for gamma in pairs:
        if gamma <= 0:
            break
        prev = min(prev, gamma)
        total += prev
    tau = max(-1.0 + 2.0 * total, 1.0 / n)
    return float(min(n / tau, n))


def ess_per_param(samples):
    """ESS of each column; ``nan`` for constant columns."""
    samples = np.asarray(samples, dtype=float)
    out = np.empty(samples.shape[1])
    for j in range(samples.shape[1]):
        try:
            out[j] = ess(samples[:, j])
        except ConstantSeries:
            out[j] = np.nan
    return out


@dataclass(frozen=True)
class EssReport:
    per_param_ess: tuple
    ess_min: float
    ess_median: float
    ess_max: float
    acceptance_rate: float
    wall_time_s: float
    min_ess_per_s: float

    def to_dict(self):
        return asdict(self)


def ess_report(trace):
    per = ess_per_param(trace.samples)
    if np.all(np.isnan(per)):
        lo = med = hi = float("nan")
    else:
        lo, med, hi = (float(v) for v in (np.nanmin(per), np.nanmedian(per), np.nanmax(per)))
    per_s = lo / trace.wall_time if trace.wall_time > 0 else float("nan")
    return EssReport(tuple(float(v) for v in per), lo, med, hi, trace.acceptance_rate,
                     float(trace.wall_time), per_s)


@dataclass(frozen=True)
class Stat:
    mean: float
    se: float  # nan when fewer than two replicates


@dataclass(frozen=True)
class ReplicateSummary:
    n_replicates: int
    ess_min: Stat
    ess_median: Stat
    ess_max: Stat
    per_param_ess: tuple
    acceptance_rate: Stat
    wall_time_s: Stat
    min_ess_per_s: Stat
    per_param_ess_per_s: tuple
    reports: tuple

    def to_dict(self):
        out = asdict(self)
        out["reports"] = [r.to_dict() for r in self.reports]
        return out


def _stat(values):
    v = np.asarray(values, dtype=float)
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return Stat(mean, se)


def summarize(traces):
    """Per-trace :class:`EssReport` plus mean and standard error over replicates."""
    traces = list(traces)
    if not traces:
        raise EmptyInput("no traces to summarise")
    reports = [ess_report(t) for t in traces]
    per = np.array([r.per_param_ess for r in reports])
    per_s = per / np.array([[r.wall_time_s] for r in reports])
    return ReplicateSummary(
        n_replicates=len(reports),
        ess_min=_stat([r.ess_min for r in reports]),
        ess_median=_stat([r.ess_median for r in reports]),
        ess_max=_stat([r.ess_max for r in reports]),
        per_param_ess=tuple(_stat(per[:, j]) for j in range(per.shape[1])),
        acceptance_rate=_stat([r.acceptance_rate for r in reports]),
        wall_time_s=_stat([r.wall_time_s for r in reports]),
        min_ess_per_s=_stat([r.min_ess_per_s for r in reports]),
        per_param_ess_per_s=tuple(_stat(per_s[:, j]) for j in range(per.shape[1])),
        reports=tuple(reports),
    )


AGGREGATE_COLUMNS = (
    "dataset", "method", "ess_min_mean", "ess_min_se", "ess_med_mean", "ess_med_se",
    "ess_max_mean", "ess_max_se", "cpu_s", "min_ess_per_s",
)


def aggregate_row(dataset, method, summary):
    """Aggregate CSV row: ESS min/median/max with standard errors, time and min ESS/s."""
    return {
        "dataset": dataset,
        "method": method,
        "ess_min_mean": summary.ess_min.mean,
        "ess_min_se": summary.ess_min.se,
        "ess_med_mean": summary.ess_median.mean,
        "ess_med_se": summary.ess_median.se,
        "ess_max_mean": summary.ess_max.mean,
        "ess_max_se": summary.ess_max.se,
        "cpu_s": summary.wall_time_s.mean,
        "min_ess_per_s": summary.min_ess_per_s.mean,
    }
