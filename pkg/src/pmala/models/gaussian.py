"""Gaussian targets and synthetic position-dependent metric fields.

Metric fields are small callables-with-derivatives that can be attached to
any density; they are what the identity and invariant-density checks run
against. All of them accept stacked states.
"""

import numpy as np

from ..linalg import chol_factor
from ..target import TargetModel


class ConstantMetric:
    def __init__(self, g):
        self.g = np.asarray(g, dtype=float)

    def __call__(self, x):
        return np.broadcast_to(self.g, x.shape[:-1] + self.g.shape).copy()

    def partials(self, x):
        d = self.g.shape[0]
        return np.zeros(x.shape[:-1] + (d, d, d))


class DiagonalFunctionMetric:
    """Identity except ``G[index, index] = f(x[coord])``.

    With ``index=0, coord=1`` this is ``diag(f(x_2), 1)`` in two dimensions.
    """

    def __init__(self, dim, f, fprime, index=0, coord=1):
        self.dim = dim
        self.f = f
        self.fprime = fprime
        self.index = index
        self.coord = coord

    def __call__(self, x):
        g = np.zeros(x.shape[:-1] + (self.dim, self.dim))
        idx = np.arange(self.dim)
        g[..., idx, idx] = 1.0
        g[..., self.index, self.index] = self.f(x[..., self.coord])
        return g

    def partials(self, x):
        p = np.zeros(x.shape[:-1] + (self.dim,) * 3)
        p[..., self.coord, self.index, self.index] = self.fprime(x[..., self.coord])
        return p


class PolynomialMetric:
    """``G(x) = L(x) L(x)^T + jitter I`` with ``L(x) = L0 + sum_j x_j L_j``.

    SPD everywhere and smooth; its derivative is generically not symmetric
    in the differentiation index, which makes it a good stress test.
    """

    def __init__(self, l0, l_coefs, jitter=0.5):
        self.l0 = np.asarray(l0, dtype=float)
        self.l_coefs = np.asarray(l_coefs, dtype=float)
        self.jitter = jitter

    @classmethod
    def random(cls, dim, rng, scale=0.3, jitter=0.5):
        l0 = np.tril(rng.normal(size=(dim, dim))) + 1.5 * np.eye(dim)
        coefs = scale * rng.normal(size=(dim, dim, dim))
        return cls(l0, coefs, jitter)

    def _l(self, x):
        return self.l0 + np.einsum("...j,jkm->...km", x, self.l_coefs)

    def __call__(self, x):
        l = self._l(x)
        return l @ np.swapaxes(l, -1, -2) + self.jitter * np.eye(self.l0.shape[0])

    def partials(self, x):
        l = self._l(x)
        term = np.einsum("jkn,...mn->...jkm", self.l_coefs, l)
        return term + np.swapaxes(term, -1, -2)


class ScalarMetric:
    """One-dimensional metric ``G(x) = g(x)``."""

    def __init__(self, g, gprime):
        self.g = g
        self.gprime = gprime

    def __call__(self, x):
        return self.g(x[..., 0])[..., None, None]

    def partials(self, x):
        return self.gprime(x[..., 0])[..., None, None, None]


class GaussianModel(TargetModel):
    """``N(mean, cov)``, optionally carrying a metric field."""

    batched = True

    def __init__(self, mean, cov, metric=None):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self.dim = self.mean.size
        self.precision = np.linalg.inv(chol_factor(self.cov).entries)
        self.precision = 0.5 * (self.precision + self.precision.T)
        self.metric_field = metric
        self.has_metric = metric is not None

    def log_density(self, x):
        r = np.asarray(x, dtype=float) - self.mean
        return -0.5 * np.einsum("...i,ij,...j->...", r, self.precision, r)

    def grad_log_density(self, x):
        r = np.asarray(x, dtype=float) - self.mean
        return -r @ self.precision

    def metric_tensor(self, x):
        return self.metric_field(np.asarray(x, dtype=float))

    def metric_partials(self, x):
        return self.metric_field.partials(np.asarray(x, dtype=float))


class ExampleMetricModel(TargetModel):
    """A 2-d target paired with ``G(x) = diag(f(x_2), 1)``.

    Defaults to the standard bivariate normal and ``f(x_2) = 1 + x_2^2``.
    ``f`` must be positive wherever it is evaluated.
    """

    batched = True
    has_metric = True
    dim = 2

    def __init__(self, base=None, f=None, fprime=None):
        self.base = base if base is not None else GaussianModel(np.zeros(2), np.eye(2))
        if f is None:
            f, fprime = (lambda t: 1.0 + t**2), (lambda t: 2.0 * t)
        elif fprime is None:
            raise ValueError("fprime is required when f is given")
        self.f = f
        self.fprime = fprime
        self.metric_field = DiagonalFunctionMetric(2, f, fprime, index=0, coord=1)

    def log_density(self, x):
        return self.base.log_density(x)

    def grad_log_density(self, x):
        return self.base.grad_log_density(x)

    def metric_tensor(self, x):
        return self.metric_field(np.asarray(x, dtype=float))

    def metric_partials(self, x):
        return self.metric_field.partials(np.asarray(x, dtype=float))

    def in_support(self, x):
        return self.base.in_support(x)
