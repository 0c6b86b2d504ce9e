import math

import numpy as np
import pytest

from pmala.diagnostics import (
    AGGREGATE_COLUMNS,
    aggregate_row,
    autocovariance,
    ess,
    ess_per_param,
    ess_report,
    summarize,
)
from pmala.errors import ConstantSeries, EmptyInput
from pmala.samplers import ChainTrace


def ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1 - phi**2)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    return x


def trace(samples, wall=2.0, accepted=None):
    samples = np.asarray(samples, dtype=float)
    if accepted is None:
        accepted = np.ones(samples.shape[0], dtype=bool)
    return ChainTrace(samples, accepted, wall, 0.1, 0)


def test_autocovariance_matches_direct():
    x = np.random.default_rng(0).normal(size=257)
    c = x - x.mean()
    direct = np.array([np.dot(c[: c.size - k], c[k:]) / c.size for k in range(c.size)])
    np.testing.assert_allclose(autocovariance(x), direct, atol=1e-12)


def test_iid_ess():
    x = np.random.default_rng(1).standard_normal(100_000)
    assert 0.95 <= ess(x) / x.size <= 1.05


def test_ar1_ess():
    x = ar1(0.5, 100_000, 2)
    assert abs(ess(x) / x.size - 1 / 3) <= 0.1 / 3


def test_duplicated_series():
    x = np.repeat(ar1(0.5, 5000, 3), 2)
    assert ess(x) < x.size / 2


def test_affine_invariance():
    x = ar1(0.7, 5000, 4)
    assert ess(3.0 - 2.5 * x) == pytest.approx(ess(x), rel=1e-9)


def test_thinning_raises_ess_per_sample():
    x = ar1(0.95, 50_000, 5)
    assert ess(x[::10]) / x[::10].size > ess(x) / x.size


def test_ess_bounds_and_errors():
    x = ar1(0.3, 1000, 6)
    assert 0 < ess(x) <= x.size
    alt = np.tile([1.0, -1.0], 500)
    assert ess(alt) <= alt.size
    with pytest.raises(ConstantSeries):
        ess(np.ones(500))
    with pytest.raises(ValueError):
        ess(np.arange(50.0))


def test_ess_per_param_marks_constant_columns():
    x = np.column_stack([np.random.default_rng(7).normal(size=300), np.zeros(300)])
    out = ess_per_param(x)
    assert np.isfinite(out[0]) and np.isnan(out[1])


def test_ess_report_fields():
    rng = np.random.default_rng(8)
    acc = np.r_[np.ones(150, bool), np.zeros(50, bool)]
    rep = ess_report(trace(rng.normal(size=(200, 3)), wall=4.0, accepted=acc))
    assert rep.ess_min <= rep.ess_median <= rep.ess_max
    assert rep.acceptance_rate == pytest.approx(0.75)
    assert rep.min_ess_per_s == pytest.approx(rep.ess_min / 4.0)


def test_summarize_single_and_identical():
    s = np.random.default_rng(9).normal(size=(300, 2))
    one = summarize([trace(s)])
    assert one.n_replicates == 1 and math.isnan(one.ess_min.se)
    same = summarize([trace(s), trace(s), trace(s)])
    assert same.ess_min.se == 0.0
    assert same.ess_min.mean == pytest.approx(one.ess_min.mean)
    with pytest.raises(EmptyInput):
        summarize([])


def test_aggregate_row_columns():
    s = np.random.default_rng(10).normal(size=(300, 2))
    row = aggregate_row("toy", "pmala", summarize([trace(s), trace(s[::-1])]))
    assert tuple(row) == AGGREGATE_COLUMNS
    assert row["dataset"] == "toy" and row["cpu_s"] == pytest.approx(2.0)
