"""The target-model interface and finite-difference derivative fallbacks."""

import numpy as np

from .errors import NonFiniteDensity
from .linalg import chol_factor

FD_EPS = np.finfo(float).eps ** (1.0 / 3.0)


class TargetModel:
    """A density to sample from, optionally with a Riemannian metric.

    Subclasses implement :meth:`log_density` and :meth:`grad_log_density`
    and, for position-dependent samplers, :meth:`metric_tensor` and
    :meth:`metric_partials`. Log-densities are only defined up to an
    additive constant, so values must never be compared across models.

    Instances are treated as immutable so one model can serve many chains.
    Models whose methods accept stacked states of shape ``(..., d)`` set
    ``batched = True``; the ensemble simulator relies on it.
    """

    dim = None
    has_metric = False
    batched = False

    def log_density(self, x):
        raise NotImplementedError

    def grad_log_density(self, x):
        raise NotImplementedError

    def metric_tensor(self, x):
        """Raw metric ``G(x)`` as an array of shape ``(..., d, d)``."""
        raise NotImplementedError

    def metric_partials(self, x):
        """``dG_km/dx_j`` stored at ``[..., j, k, m]``."""
        return fd_metric_partials(self, x)

    def metric(self, x):
        return chol_factor(self.metric_tensor(x))

    def in_support(self, x):
        return bool(np.all(np.isfinite(x)))


def _step_sizes(x, eps):
    if eps is None:
        return FD_EPS * (1.0 + np.abs(x))
    if eps <= 0:
        raise ValueError("eps must be positive")
    return np.full(x.shape, float(eps))


def fd_gradient(model, x, eps=None):
    """Central-difference gradient of ``model.log_density`` at ``x``."""
    x = np.asarray(x, dtype=float)
    steps = _step_sizes(x, eps)
    grad = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = steps[j]
        up = model.log_density(x + e)
        down = model.log_density(x - e)
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NonFiniteDensity(f"non-finite log density in stencil for coordinate {j}")
        grad[j] = (up - down) / (2.0 * steps[j])
    return grad


def fd_metric_partials(model, x, eps=None):
    """Central differences of ``model.metric_tensor``, layout ``[j, k, m]``.

    Each slice is symmetrised, so the result is symmetric in its last two
    indices by construction. Non-SPD metrics at stencil points raise
    :class:`~pmala.errors.NotPositiveDefinite`.
    """
    x = np.asarray(x, dtype=float)
    steps = _step_sizes(x, eps)
    d = x.size
    out = np.empty((d, d, d))
    for j in range(d):
        e = np.zeros_like(x)
        e[j] = steps[j]
        up = model.metric(x + e).entries
        down = model.metric(x - e).entries
        out[j] = (up - down) / (2.0 * steps[j])
    return 0.5 * (out + np.swapaxes(out, -1, -2))
