"""Metropolis-Hastings kernels whose proposals are Euler-Maruyama steps.

A proposal from state ``x`` with step size ``h`` is
``N(x + h b(x), h V(x))`` for the family's drift ``b`` and volatility ``V``
(see :mod:`pmala.geometry`). Because ``V`` may depend on position, the
proposal log-density keeps its normalising constant.
"""

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dtrsv

from .errors import BudgetExhausted, NotPositiveDefinite, PmalaError
from .geometry import Family, drift_and_volatility
from .linalg import SpdMatrix, chol_factor

LOG_2PI = math.log(2.0 * math.pi)
DEFAULT_TARGET_ACCEPT = 0.574


@dataclass(frozen=True)
class ProposalSpec:
    """Gaussian proposal ``N(mean, cov_chol cov_chol^T)``."""

    mean: np.ndarray
    cov_chol: np.ndarray

    def log_density_at(self, y):
        z = dtrsv(self.cov_chol, np.asarray(y, dtype=float) - self.mean, lower=1)
        half_logdet = np.log(np.diagonal(self.cov_chol)).sum()
        return float(-0.5 * (z @ z) - half_logdet - 0.5 * self.mean.size * LOG_2PI)

    def sample(self, noise):
        return self.mean + self.cov_chol @ noise


def make_proposal(family, model, x, h, precond=None):
    """Proposal law of ``family`` at ``x``; the covariance factor is ``sqrt(h) chol(V(x))``."""
    if h <= 0:
        raise ValueError("step size h must be positive")
    x = np.asarray(x, dtype=float)
    drift, chol = drift_and_volatility(family, model, x, precond)
    mean = x + h * drift
    cov_chol = math.sqrt(h) * chol
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov_chol))):
        raise NotPositiveDefinite("non-finite proposal at x")
    return ProposalSpec(mean, cov_chol)


_REJECTABLE = (PmalaError, np.linalg.LinAlgError, FloatingPointError, ValueError)


def _as_precond(precond):
    if precond is None or isinstance(precond, SpdMatrix):
        return precond
    return chol_factor(precond)


def _try_state(family, model, y, h, precond):
    """``(log pi(y), proposal at y)`` or ``None`` when ``y`` must be rejected."""
    if not model.in_support(y):
        return None
    try:
        lp = model.log_density(y)
        if not np.isfinite(lp):
            return None
        return lp, make_proposal(family, model, y, h, precond)
    except _REJECTABLE:
        return None


def log_accept_ratio(model, family, x, y, h, precond=None):
    """``log pi(y) + log q(x|y) - log pi(x) - log q(y|x)``; ``-inf`` if ``y`` is inadmissible."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    q_x = make_proposal(family, model, x, h, precond)
    at_y = _try_state(family, model, y, h, precond)
    if at_y is None:
        return -np.inf
    lp_y, q_y = at_y
    return lp_y + q_y.log_density_at(x) - model.log_density(x) - q_x.log_density_at(y)


@dataclass
class ChainTrace:
    """Post-burn-in samples of one chain.

    ``wall_time`` covers the whole sampling loop, burn-in included.
    """

    samples: np.ndarray
    accepted: np.ndarray
    wall_time: float
    h_used: float
    rng_seed: int
    family: str = ""
    burn_in: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accepted)) if self.accepted.size else float("nan")


def run_chain(family, model, x0, h, n_iters, seed, burn_in=0, precond=None):
    """Run ``burn_in + n_iters`` MH iterations and keep the last ``n_iters``.

    Deterministic given ``seed``: each iteration draws ``eps ~ N(0, I)`` then
    ``u ~ U(0, 1)`` from one ``numpy`` generator.

    Raises:
        NotPositiveDefinite: if the metric is invalid at ``x0``.
    """
    family = Family.parse(family)
    precond = _as_precond(precond)
    if n_iters < 1:
        raise ValueError("n_iters must be at least 1")
    x = np.array(x0, dtype=float)
    if not model.in_support(x):
        raise ValueError("x0 is outside the model support")
    rng = np.random.default_rng(seed)
    d = x.size
    total = burn_in + n_iters
    samples = np.empty((n_iters, d))
    accepted = np.zeros(n_iters, dtype=bool)

    start = time.perf_counter()
    lp_x = model.log_density(x)
    q_x = make_proposal(family, model, x, h, precond)
    for it in range(total):
        noise = rng.standard_normal(d)
        log_u = math.log(rng.random())
        y = q_x.sample(noise)
        took = False
        at_y = _try_state(family, model, y, h, precond)
        if at_y is not None:
            lp_y, q_y = at_y
            log_alpha = lp_y + q_y.log_density_at(x) - lp_x - q_x.log_density_at(y)
            if log_u < log_alpha:
                x, lp_x, q_x = y, lp_y, q_y
                took = True
        k = it - burn_in
        if k >= 0:
            samples[k] = x
            accepted[k] = took
    wall = time.perf_counter() - start
    return ChainTrace(samples, accepted, wall, float(h), int(seed), family.value, burn_in)


@dataclass(frozen=True)
class TuneResult:
    h: float
    acceptance_rate: float
    converged: bool


def tune_step_size(family, model, x0, target_accept=DEFAULT_TARGET_ACCEPT, budget=2000,
                   seed=0, h0=None, precond=None):
    """Robbins-Monro adaptation of ``log h`` towards a target acceptance rate.

    The first 80% of ``budget`` iterations adapt, the rest measure the
    acceptance rate at the final ``h``. A rate further than 0.1 from the
    target emits a :class:`~pmala.errors.BudgetExhausted` warning.
    """
    if not 0.0 < target_accept < 1.0:
        raise ValueError("target_accept must lie in (0, 1)")
    family = Family.parse(family)
    precond = _as_precond(precond)
    rng = np.random.default_rng(seed)
    x = np.array(x0, dtype=float)
    d = x.size
    log_h = math.log(h0 if h0 is not None else 1.0 / d ** (1.0 / 3.0))
    n_adapt = max(1, int(0.8 * budget))
    n_measure = max(1, budget - n_adapt)

    def step(x, lp_x, q_x, h):
        y = q_x.sample(rng.standard_normal(d))
        log_u = math.log(rng.random())
        at_y = _try_state(family, model, y, h, precond)
        if at_y is None:
            return x, lp_x, q_x, 0.0
        lp_y, q_y = at_y
        log_alpha = lp_y + q_y.log_density_at(x) - lp_x - q_x.log_density_at(y)
        prob = 1.0 if log_alpha >= 0 else math.exp(log_alpha)
        if log_u < log_alpha:
            return y, lp_y, q_y, prob
        return x, lp_x, q_x, prob

    lp_x = model.log_density(x)
    for t in range(n_adapt):
        h = math.exp(log_h)
        q_x = make_proposal(family, model, x, h, precond)
        x, lp_x, _, prob = step(x, lp_x, q_x, h)
        log_h += (prob - target_accept) / (t + 10) ** 0.6
        log_h = min(max(log_h, -40.0), 10.0)

    h = math.exp(log_h)
    q_x = make_proposal(family, model, x, h, precond)
    n_acc = 0
    for _ in range(n_measure):
        x_new, lp_x, q_x, _ = step(x, lp_x, q_x, h)
        n_acc += x_new is not x
        x = x_new
    rate = n_acc / n_measure
    converged = abs(rate - target_accept) <= 0.1
    if not converged:
        warnings.warn(
            f"{family.value}: acceptance {rate:.3f} not within 0.1 of target "
            f"{target_accept} after {budget} iterations (h={h:.3g})",
            BudgetExhausted, stacklevel=2)
    return TuneResult(h, rate, converged)


def tune_step_size_ess(family, model, x0, grid, n_iters=1000, seed=0, burn_in=200,
                       precond=None):
    """Pick the ``h`` in ``grid`` that maximises minimum ESS over short pilot runs."""
    from .diagnostics import ess_report

    best = None
    for h in grid:
        trace = run_chain(family, model, x0, h, n_iters, seed, burn_in=burn_in, precond=precond)
        report = ess_report(trace)
        score = report.ess_min if np.isfinite(report.ess_min) else -1.0
        if best is None or score > best[1]:
            best = (float(h), score, report.acceptance_rate)
    return TuneResult(best[0], best[2], True)


__all__ = [
    "ChainTrace",
    "ProposalSpec",
    "TuneResult",
    "log_accept_ratio",
    "make_proposal",
    "run_chain",
    "tune_step_size",
    "tune_step_size_ess",
]
