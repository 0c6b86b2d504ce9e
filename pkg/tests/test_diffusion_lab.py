import math

import numpy as np
import pytest
from scipy.stats import norm

from pmala.diffusion_lab import (
    EnsembleConfig,
    compare_density,
    em_step,
    marginal_masses,
    simulate_ensemble,
    simulate_path,
    total_variation,
)
from pmala.errors import InsufficientSamples, InvalidRun
from pmala.geometry import DiffusionSpec, assemble_diffusion
from pmala.models import ExampleMetricModel, GaussianModel, PolynomialMetric

STD1 = GaussianModel([0.0], [[1.0]])
STD2 = GaussianModel([0.0, 0.0], np.eye(2))


def test_em_step_scalar():
    spec = assemble_diffusion(STD1, "langevin")
    assert em_step(spec, np.array([1.0]), 0.01, np.zeros(1))[0] == pytest.approx(0.995)
    assert em_step(spec, np.array([1.0]), 0.01, np.array([0.1]))[0] == pytest.approx(1.095)


def test_em_step_uses_volatility_factor():
    spec = assemble_diffusion(STD2, "precond", precond=np.diag([4.0, 1.0]))
    out = em_step(spec, np.zeros(2), 0.1, np.array([1.0, 1.0]))
    np.testing.assert_allclose(out, [2.0, 1.0])


def test_em_step_batched_matches_rows(rng):
    spec = assemble_diffusion(ExampleMetricModel(), "pmala")
    x = rng.normal(size=(5, 2))
    noise = 0.1 * rng.normal(size=(5, 2))
    batch = em_step(spec, x, 0.01, noise)
    for i in range(5):
        np.testing.assert_allclose(batch[i], em_step(spec, x[i], 0.01, noise[i]), atol=1e-14)


def test_em_step_failure_gives_nan():
    def drift(x):
        if np.any(np.asarray(x)[..., 0] > 1):
            raise np.linalg.LinAlgError("bad")
        return -np.asarray(x)

    spec = DiffusionSpec(drift, lambda x: np.broadcast_to(np.eye(1), np.shape(x) + (1,)), "toy")
    out = em_step(spec, np.array([[0.0], [2.0]]), 0.1, np.zeros((2, 1)))
    assert out[0, 0] == 0.0 and np.isnan(out[1, 0])


def test_shared_noise_paths_identical(rng):
    spec = assemble_diffusion(ExampleMetricModel(), "pmala")
    noises = 0.1 * rng.normal(size=(200, 2))
    a = simulate_path(spec, np.zeros(2), 0.01, noises)
    b = simulate_path(spec, np.zeros(2), 0.01, noises)
    assert a.shape == (201, 2) and a.tobytes() == b.tobytes()


def test_half_omega_path_equals_pmala(rng):
    metric = PolynomialMetric.random(2, np.random.default_rng(1))
    model = GaussianModel([0.0, 0.0], [[1.0, 0.4], [0.4, 1.5]], metric)
    half = assemble_diffusion(model, "mmala_half")
    pm = assemble_diffusion(model, "pmala")
    noises = math.sqrt(0.01) * rng.normal(size=(1000, 2))
    a = simulate_path(half, np.array([0.3, -0.2]), 0.01, noises)
    b = simulate_path(pm, np.array([0.3, -0.2]), 0.01, noises)
    assert np.max(np.abs(a - b)) <= 1e-8


def test_langevin_ensemble_moments():
    spec = assemble_diffusion(STD1, "langevin")
    cfg = EnsembleConfig(n_paths=2000, n_steps=1500, step=0.01, burn_in=500, x0=[0.0], seed=1)
    out = simulate_ensemble(spec, cfg).samples[:, 0]
    assert abs(out.mean()) < 0.05
    assert abs(out.var() - 1.0) < 0.05


def test_precond_ensemble_moments():
    spec = assemble_diffusion(STD2, "precond", precond=np.diag([4.0, 1.0]))
    cfg = EnsembleConfig(n_paths=2000, n_steps=1500, step=0.005, burn_in=500, x0=[0.0, 0.0],
                         seed=2)
    res = simulate_ensemble(spec, cfg)
    assert res.frozen_fraction == 0.0
    np.testing.assert_allclose(np.var(res.samples, axis=0), [1.0, 1.0], atol=0.06)


def test_ensemble_start_forms_and_determinism():
    spec = assemble_diffusion(STD1, "langevin")
    base = dict(n_paths=20, n_steps=100, step=0.01, burn_in=0, seed=4, thin=5)
    a = simulate_ensemble(spec, EnsembleConfig(x0=[0.5], **base)).samples
    b = simulate_ensemble(spec, EnsembleConfig(x0=np.full((20, 1), 0.5), **base)).samples
    c = simulate_ensemble(spec, EnsembleConfig(x0=lambda r, n: np.full((n, 1), 0.5),
                                               **base)).samples
    assert a.shape == (20 * 20, 1)
    assert a.tobytes() == b.tobytes() == c.tobytes()


def test_ensemble_too_many_frozen():
    spec = DiffusionSpec(lambda x: np.full_like(x, np.nan),
                         lambda x: np.broadcast_to(np.eye(1), np.shape(x) + (1,)), "bad")
    cfg = EnsembleConfig(n_paths=10, n_steps=10, step=0.1, burn_in=0, x0=[0.0])
    with pytest.raises(InvalidRun):
        simulate_ensemble(spec, cfg)


def test_ensemble_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(n_paths=1, n_steps=10, step=0.0, burn_in=0, x0=[0.0])
    with pytest.raises(ValueError):
        EnsembleConfig(n_paths=1, n_steps=10, step=0.1, burn_in=10, x0=[0.0])


def test_marginal_masses_gaussian():
    edges = np.linspace(-6, 6, 41)
    masses = marginal_masses(STD2.log_density, 1, edges, (-6, 6), 2)
    exact = np.diff(norm.cdf(edges))
    np.testing.assert_allclose(masses, exact / exact.sum(), atol=1e-4)


def test_compare_density_self_and_errors():
    rng = np.random.default_rng(5)
    cloud = rng.standard_normal((200_000, 1))
    (res,) = compare_density(cloud, STD1.log_density, [0], 40, label="iid")
    assert res.passed and res.tv_distance < 0.01
    rec = res.to_record()
    assert set(rec) == {"spec_label", "coord", "tv_distance", "threshold", "pass"}
    assert total_variation(res.empirical, res.empirical) == 0.0
    with pytest.raises(InsufficientSamples):
        compare_density(cloud[:9999], STD1.log_density, [0], 40)


def test_step_halving_reduces_bias():
    spec = assemble_diffusion(STD1, "langevin")
    errs = []
    for h in (0.2, 0.1):
        cfg = EnsembleConfig(n_paths=4000, n_steps=int(60 / h), step=h, burn_in=int(10 / h),
                             x0=[0.0], seed=6, thin=5)
        errs.append(abs(np.var(simulate_ensemble(spec, cfg).samples) - 1.0))
    # EM stationary variance is 1 / (1 - h/4): bias roughly halves with h
    assert errs[1] < errs[0]
