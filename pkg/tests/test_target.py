import numpy as np
import pytest

from pmala.errors import NonFiniteDensity
from pmala.models import ExampleMetricModel, GaussianModel, ConstantMetric
from pmala.target import TargetModel, fd_gradient, fd_metric_partials


class HalfLine(TargetModel):
    dim = 1

    def log_density(self, x):
        return np.log(x[0]) if x[0] > 0 else -np.inf


def test_fd_gradient_quadratic_is_exact():
    model = GaussianModel([0.0], [[1.0]])
    assert abs(fd_gradient(model, [1.0], eps=1e-5)[0] + 1.0) <= 1e-8


def test_fd_gradient_at_mode_is_zero():
    model = GaussianModel([0.3, -1.0], [[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(fd_gradient(model, [0.3, -1.0]), 0.0, atol=1e-9)


def test_fd_gradient_matches_logistic(small_logistic, rng):
    beta = rng.normal(scale=0.5, size=small_logistic.dim)
    analytic = small_logistic.grad_log_density(beta)
    numeric = fd_gradient(small_logistic, beta)
    assert np.max(np.abs(analytic - numeric)) <= 1e-5 * np.max(np.abs(analytic))


def test_fd_gradient_non_finite_stencil():
    with pytest.raises(NonFiniteDensity):
        fd_gradient(HalfLine(), [1e-7], eps=1e-5)


def test_fd_partials_constant_metric():
    model = GaussianModel(np.zeros(3), np.eye(3), ConstantMetric(np.diag([1.0, 2.0, 3.0])))
    np.testing.assert_array_equal(fd_metric_partials(model, np.ones(3)), 0.0)


def test_fd_partials_example_metric():
    p = fd_metric_partials(ExampleMetricModel(), np.array([0.4, 1.0]))
    # only dG_11/dx_2 = f'(1) = 2 is non-zero (0-based index [1, 0, 0])
    assert abs(p[1, 0, 0] - 2.0) <= 1e-6
    mask = np.ones_like(p, dtype=bool)
    mask[1, 0, 0] = False
    assert np.max(np.abs(p[mask])) <= 1e-9


def test_fd_partials_match_logistic(small_logistic, rng):
    beta = rng.normal(scale=0.5, size=small_logistic.dim)
    analytic = small_logistic.metric_partials(beta)
    numeric = fd_metric_partials(small_logistic, beta)
    assert np.max(np.abs(analytic - numeric)) <= 1e-4 * np.max(np.abs(analytic))
    np.testing.assert_array_equal(numeric, np.swapaxes(numeric, -1, -2))
