"""Correction drifts and the drift/volatility fields of each Langevin diffusion.

Every diffusion used here has the form ``dX = b(X) dt + sqrt(V(X)) dW``.
With ``A = G^{-1}`` the families differ only in ``b``:

=====================  ==============================================
``LANGEVIN``           ``b = grad log pi / 2``, ``V = I``
``PRECOND``            ``b = A grad log pi / 2``, constant ``A``
``SIMPLIFIED``         ``b = A(x) grad log pi / 2``
``MMALA``              ``b = A(x) grad log pi / 2 + Omega``
``MMALA_HALF``         ``b = A(x) grad log pi* / 2 + Omega / 2``
``PMALA``              ``b = A(x) grad log pi / 2 + Gamma``
=====================  ==============================================

where ``log pi* = log pi - log|G| / 2``. ``MMALA`` is the diffusion as it is
usually published (full ``Omega``), ``MMALA_HALF`` the version with the
halved correction and the volume-adjusted density.
"""

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import MissingMetric, NonFiniteDensity
from .linalg import SpdMatrix, chol_factor, spd_inverse
from .target import FD_EPS


class Family(enum.Enum):
    LANGEVIN = "langevin"
    PRECOND = "precond"
    SIMPLIFIED = "simplified"
    MMALA = "mmala"
    MMALA_HALF = "mmala_half"
    PMALA = "pmala"

    @property
    def needs_metric(self):
        return self not in (Family.LANGEVIN, Family.PRECOND)

    @property
    def needs_partials(self):
        return self in (Family.MMALA, Family.MMALA_HALF, Family.PMALA)

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = sorted({f.value for f in cls} | set(_ALIASES))
            raise ValueError(f"unknown sampler family {name!r}; expected one of {valid}") from None


_ALIASES = {"mala": "langevin", "mmala_uncorrected": "mmala", "smmala": "simplified"}


class MetricBundle:
    """Metric quantities at one state (or a stack of states).

    ``g`` and ``a`` are factorised eagerly; the derivative quantities are
    computed on first use so that families which do not need them never
    pay for them.
    """

    def __init__(self, g, partials_fn=None):
        self.g = g
        self.a = spd_inverse(g)
        self._partials_fn = partials_fn

    @classmethod
    def from_model(cls, model, x):
        if not model.has_metric:
            raise MissingMetric(f"{type(model).__name__} has no metric")
        return cls(model.metric(x), lambda: model.metric_partials(x))

    @classmethod
    def from_arrays(cls, g, partials_g):
        bundle = cls(chol_factor(g))
        bundle.partials_g = np.asarray(partials_g, dtype=float)
        return bundle

    @property
    def logdet_g(self):
        return self.g.logdet

    @cached_property
    def partials_g(self):
        return np.asarray(self._partials_fn(), dtype=float)

    @cached_property
    def partials_a(self):
        """``dA/dx_j = -A (dG/dx_j) A``, layout ``[..., j, i, l]``."""
        a = self.a.entries
        return -np.einsum("...ik,...jkm,...ml->...jil", a, self.partials_g, a)

    @cached_property
    def divergence_a(self):
        """Row divergence ``sum_j dA_ij/dx_j``, contracted without forming ``dA``."""
        a = self.a.entries
        t = np.einsum("...jkm,...mj->...k", self.partials_g, a)
        return -np.einsum("...ik,...k->...i", a, t)

    @cached_property
    def grad_logdet_g(self):
        """``d log|G| / dx_j = trace(A dG/dx_j)``."""
        return np.einsum("...km,...jmk->...j", self.a.entries, self.partials_g)


def gamma_drift(bundle):
    """Half the row divergence of ``A``: ``Gamma_i = 1/2 sum_j dA_ij/dx_j``."""
    return 0.5 * np.einsum("...jij->...i", bundle.partials_a)


def gamma_drift_expanded(bundle):
    """``Gamma`` written in terms of ``G``: ``-1/2 sum_jkm A_ik dG_km/dx_j A_mj``."""
    a = bundle.a.entries
    return -0.5 * np.einsum("...ik,...jkm,...mj->...i", a, bundle.partials_g, a)


def omega_drift(bundle):
    """Manifold correction drift via the divergence-plus-log-determinant form.

    ``Omega_i = sum_j dA_ij/dx_j + 1/2 sum_j A_ij d log|G|/dx_j``.
    """
    div_a = np.einsum("...jij->...i", bundle.partials_a)
    return div_a + 0.5 * np.einsum("...ij,...j->...i", bundle.a.entries, bundle.grad_logdet_g)


def omega_drift_expanded(bundle):
    """``Omega`` with every derivative of ``A`` expanded through ``dG``."""
    a = bundle.a.entries
    dg = bundle.partials_g
    first = -np.einsum("...ik,...jkm,...mj->...i", a, dg, a)
    traces = np.einsum("...jmk,...km->...j", dg, a)
    return first + 0.5 * np.einsum("...ij,...j->...i", a, traces)


def symmetry_defect(partials_g):
    """Largest violation of ``dG_km/dx_j == dG_jm/dx_k``; zero for Hessian metrics."""
    p = np.asarray(partials_g)
    if p.shape[-1] == 1:
        return 0.0
    return float(np.max(np.abs(p - np.swapaxes(p, -3, -2))))


@dataclass(frozen=True)
class DiffusionSpec:
    """Drift and volatility factor of an SDE ``dX = b dt + sqrt(V) dW``.

    ``joint``, when given, returns both at once and lets simulators avoid
    evaluating the metric twice per step.
    """

    drift: Callable
    volatility_chol: Callable
    label: Family
    joint: Callable | None = None

    def evaluate(self, x):
        if self.joint is not None:
            return self.joint(x)
        return self.drift(x), self.volatility_chol(x)


def drift_and_volatility(family, model, x, precond=None):
    """Drift ``b(x)`` and lower Cholesky factor of ``V(x)`` for one family.

    ``precond`` is the constant ``A`` used by ``PRECOND``, either an
    :class:`SpdMatrix` or an array (identity when omitted).
    """
    family = Family.parse(family)
    x = np.asarray(x, dtype=float)
    grad = model.grad_log_density(x)
    if family is Family.LANGEVIN:
        return 0.5 * grad, np.broadcast_to(np.eye(x.shape[-1]), x.shape + x.shape[-1:])
    if family is Family.PRECOND:
        if precond is None:
            precond = chol_factor(np.eye(x.shape[-1]))
        elif not isinstance(precond, SpdMatrix):
            precond = chol_factor(precond)
        drift = 0.5 * np.einsum("ij,...j->...i", precond.entries, grad)
        return drift, np.broadcast_to(precond.chol, x.shape + x.shape[-1:])
    bundle = MetricBundle.from_model(model, x)
    a = bundle.a.entries
    if family is Family.MMALA_HALF:
        grad = grad - 0.5 * bundle.grad_logdet_g
    drift = 0.5 * np.einsum("...ij,...j->...i", a, grad)
    if family is Family.PMALA:
        drift = drift + 0.5 * bundle.divergence_a
    elif family is not Family.SIMPLIFIED:
        omega = bundle.divergence_a + 0.5 * np.einsum("...ij,...j->...i", a, bundle.grad_logdet_g)
        drift = drift + (omega if family is Family.MMALA else 0.5 * omega)
    return drift, bundle.a.chol


def assemble_diffusion(model, family, precond=None):
    """Build the :class:`DiffusionSpec` of ``family`` for ``model``.

    The returned closures accept a single state or, for batched models, a
    stack of states.
    """
    family = Family.parse(family)
    if family.needs_metric and not model.has_metric:
        raise MissingMetric(f"{family.value} needs a metric; {type(model).__name__} has none")
    if precond is not None and not isinstance(precond, SpdMatrix):
        precond = chol_factor(precond)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1 and not model.batched:
            pairs = [drift_and_volatility(family, model, row, precond) for row in x]
            return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])
        return drift_and_volatility(family, model, x, precond)

    return DiffusionSpec(
        drift=lambda x: evaluate(x)[0],
        volatility_chol=lambda x: evaluate(x)[1],
        label=family,
        joint=evaluate,
    )


def fokker_planck_residual(spec, log_pi, x, eps=None):
    """Stationarity residual ``r_i = b_i pi - 1/2 sum_j d/dx_j [V_ij pi]``.

    ``pi`` is normalised so that ``pi(x) = 1``; the divergence uses central
    differences with per-coordinate steps.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    steps = FD_EPS * (1.0 + np.abs(x)) if eps is None else np.full(d, float(eps))
    lp0 = log_pi(x)
    if not np.isfinite(lp0):
        raise NonFiniteDensity("log density is not finite at x")
    flux_div = np.zeros(d)
    for j in range(d):
        e = np.zeros(d)
        e[j] = steps[j]
        col = []
        for sign in (1.0, -1.0):
            xs = x + sign * e
            lp = log_pi(xs)
            if not np.isfinite(lp):
                raise NonFiniteDensity(f"log density not finite at stencil point {xs}")
            chol = spec.volatility_chol(xs)
            col.append((chol @ chol.T)[:, j] * np.exp(lp - lp0))
        flux_div += (col[0] - col[1]) / (2.0 * steps[j])
    return spec.drift(x) - 0.5 * flux_div


def relative_fokker_planck_residual(spec, log_pi, x, eps=None):
    """``max_i |r_i| / (max_i |b_i| pi(x))`` with ``pi(x) = 1``."""
    r = fokker_planck_residual(spec, log_pi, x, eps)
    scale = np.max(np.abs(spec.drift(np.asarray(x, dtype=float))))
    return float(np.max(np.abs(r)) / max(scale, np.finfo(float).tiny))


def dual_log_densities(model, x):
    """Return ``(log pi(x), log pi*(x))`` linked by ``pi = pi* |G|^{1/2}``."""
    log_pi = model.log_density(x)
    return log_pi, log_pi - 0.5 * model.metric(x).logdet
