"""FitzHugh-Nagumo ODE inference with forward sensitivities.

The system is::

    dW/dt = c (W - W^3 / 3 + R)
    dR/dt = -(W - a + b R) / c

integrated from time 0 with classical fixed-step RK4, jointly with the six
first-order sensitivities ``d(W, R) / d(a, b, c)``. ``literal_bt=True``
replaces ``b R`` by ``b t`` (``t`` the time variable).
"""

import math
from collections import OrderedDict
from dataclasses import dataclass
from threading import Lock

import numpy as np
from numba import njit

from ..errors import NonFiniteTrajectory
from ..target import TargetModel

DEFAULT_DT_MAX = 0.01
NOISE_PARAMS = ("sd", "variance", "precision")


@njit(cache=True)
def _rhs(t, y, a, b, c, literal, out):
    w = y[0]
    r = y[1]
    q = b * t if literal else b * r
    out[0] = c * (w - w * w * w / 3.0 + r)
    out[1] = -(w - a + q) / c
    j00 = c * (1.0 - w * w)
    j01 = c
    j10 = -1.0 / c
    j11 = 0.0 if literal else -b / c
    # theta-derivatives of the vector field, rows W and R
    f0c = w - w * w * w / 3.0 + r
    f1a = 1.0 / c
    f1b = -(t if literal else r) / c
    f1c = (w - a + q) / (c * c)
    for p in range(3):
        sw = y[2 + p]
        sr = y[5 + p]
        out[2 + p] = j00 * sw + j01 * sr
        out[5 + p] = j10 * sw + j11 * sr
    out[4] += f0c
    out[5] += f1a
    out[6] += f1b
    out[7] += f1c


@njit(cache=True)
def _integrate(thetas, w0, r0, obs_times, dt_max, literal):
    k = thetas.shape[0]
    n_obs = obs_times.shape[0]
    traj = np.empty((k, n_obs, 2))
    sens = np.empty((k, n_obs, 2, 3))
    ok = np.ones(k, dtype=np.bool_)
    y = np.empty(8)
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    tmp = np.empty(8)
    for p in range(k):
        a = thetas[p, 0]
        b = thetas[p, 1]
        c = thetas[p, 2]
        y[:] = 0.0
        y[0] = w0
        y[1] = r0
        t = 0.0
        for i in range(n_obs):
            span = obs_times[i] - t
            n_sub = max(1, int(math.ceil(span / dt_max - 1e-9))) if span > 0 else 0
            dt = span / n_sub if n_sub > 0 else 0.0
            for _ in range(n_sub):
                _rhs(t, y, a, b, c, literal, k1)
                for m in range(8):
                    tmp[m] = y[m] + 0.5 * dt * k1[m]
                _rhs(t + 0.5 * dt, tmp, a, b, c, literal, k2)
                for m in range(8):
                    tmp[m] = y[m] + 0.5 * dt * k2[m]
                _rhs(t + 0.5 * dt, tmp, a, b, c, literal, k3)
                for m in range(8):
                    tmp[m] = y[m] + dt * k3[m]
                _rhs(t + dt, tmp, a, b, c, literal, k4)
                for m in range(8):
                    y[m] += dt / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
                t += dt
            t = obs_times[i]
            traj[p, i, 0] = y[0]
            traj[p, i, 1] = y[1]
            for q in range(3):
                sens[p, i, 0, q] = y[2 + q]
                sens[p, i, 1, q] = y[5 + q]
            if not (np.isfinite(y).all() and abs(y[0]) < 1e8 and abs(y[1]) < 1e8):
                ok[p] = False
                break
    return traj, sens, ok


def fhn_solve_batch(thetas, init_state, obs_times, dt_max=DEFAULT_DT_MAX, literal_bt=False):
    """Solve for several parameter vectors at once.

    Returns ``(trajectories, sensitivities, ok)`` with shapes ``(k, T, 2)``,
    ``(k, T, 2, 3)`` and ``(k,)``; rows with ``ok == False`` blew up.
    """
    thetas = np.ascontiguousarray(np.atleast_2d(thetas), dtype=float)
    times = np.ascontiguousarray(obs_times, dtype=float)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("obs_times must be non-negative and increasing")
    return _integrate(thetas, float(init_state[0]), float(init_state[1]), times,
                      float(dt_max), bool(literal_bt))


def fhn_solve(theta, init_state, obs_times, dt_max=DEFAULT_DT_MAX, literal_bt=False):
    """Trajectory ``(T, 2)`` and sensitivities ``(T, 2, 3)`` for one ``(a, b, c)``.

    Raises:
        NonFiniteTrajectory: if the solution diverges.
    """
    traj, sens, ok = fhn_solve_batch(theta, init_state, obs_times, dt_max, literal_bt)
    if not ok[0]:
        raise NonFiniteTrajectory(f"trajectory diverged for theta={list(theta)}")
    return traj[0], sens[0]


def _noise_variance(param, kind):
    """``(v, dv/dp, d2v/dp2)`` for the noise parameter ``p``."""
    if kind == "sd":
        return param**2, 2.0 * param, 2.0
    if kind == "variance":
        return param, 1.0, 0.0
    return 1.0 / param, -1.0 / param**2, 2.0 / param**3


@dataclass(frozen=True)
class FhnDataset:
    times: np.ndarray
    observations: np.ndarray
    clean: np.ndarray
    true_theta: tuple
    init_state: tuple
    noise_sd: float


def generate_fhn_dataset(seed, theta=(0.2, 0.2, 3.0), init_state=(-1.0, 1.0), n_obs=200,
                         t_max=20.0, noise_sd=0.5, literal_bt=False, dt_max=DEFAULT_DT_MAX):
    """Simulate noisy observations of both states on an even grid over ``[0, t_max]``."""
    times = np.linspace(0.0, t_max, n_obs)
    clean, _ = fhn_solve(np.asarray(theta, dtype=float), init_state, times, dt_max, literal_bt)
    rng = np.random.default_rng(seed)
    obs = clean + noise_sd * rng.standard_normal(clean.shape)
    return FhnDataset(times, obs, clean, tuple(theta), tuple(init_state), float(noise_sd))


class FitzHughNagumoModel(TargetModel):
    """Posterior over ``(a, b, c)`` given noisy observations of ``(W, R)``.

    Priors on ``a, b, c`` are independent ``N(0, prior_sd^2)``. By default the
    observation noise variance is fixed at ``noise_var``. With
    ``estimate_noise=True`` a fourth coordinate holds the noise parameter
    (standard deviation, variance or precision, per ``noise_param``) with an
    ``Exp(1)`` prior; ``noise_var`` then only seeds the initial state.

    The metric is the expected Fisher information plus prior curvature. Its
    derivatives are taken by central differences of the metric.
    """

    has_metric = True

    def __init__(self, times, observations, init_state=(-1.0, 1.0), noise_var=0.25,
                 prior_sd=5.0, estimate_noise=False, noise_param="sd", literal_bt=False,
                 dt_max=DEFAULT_DT_MAX):
        self.times = np.asarray(times, dtype=float)
        self.observations = np.asarray(observations, dtype=float).reshape(-1, 2)
        if self.observations.shape[0] != self.times.size:
            raise ValueError("observations must have one (W, R) row per time")
        if noise_var <= 0:
            raise ValueError("noise_var must be positive")
        if noise_param not in NOISE_PARAMS:
            raise ValueError(f"noise_param must be one of {NOISE_PARAMS}")
        self.init_state = tuple(float(v) for v in init_state)
        self.noise_var = float(noise_var)
        self.prior_sd = float(prior_sd)
        self.estimate_noise = bool(estimate_noise)
        self.noise_param = noise_param
        self.literal_bt = bool(literal_bt)
        self.dt_max = float(dt_max)
        self.dim = 4 if self.estimate_noise else 3
        self.n_scalar_obs = self.observations.size
        self._cache = OrderedDict()
        self._lock = Lock()

    @classmethod
    def from_dataset(cls, data, **kwargs):
        kwargs.setdefault("noise_var", data.noise_sd**2)
        return cls(data.times, data.observations, init_state=data.init_state, **kwargs)

    def noise_param_from_var(self, var):
        return {"sd": math.sqrt(var), "variance": var, "precision": 1.0 / var}[self.noise_param]

    def initial_state(self, theta):
        theta = list(theta)
        if self.estimate_noise:
            theta.append(self.noise_param_from_var(self.noise_var))
        return np.asarray(theta, dtype=float)

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        if self.estimate_noise:
            v, dv, d2v = _noise_variance(x[3], self.noise_param)
            return x[:3], x[3], v, dv, d2v
        return x[:3], None, self.noise_var, 0.0, 0.0

    def solve(self, theta):
        """Cached :func:`fhn_solve` for this model's settings."""
        key = tuple(float(v) for v in theta[:3])
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        result = fhn_solve(np.asarray(key), self.init_state, self.times, self.dt_max,
                           self.literal_bt)
        with self._lock:
            self._cache[key] = result
            if len(self._cache) > 16:
                self._cache.popitem(last=False)
        return result

    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)) or x[2] == 0:
            return False
        return not self.estimate_noise or x[3] > 0

    def _log_prior(self, theta, noise):
        lp = -0.5 * np.sum(theta**2) / self.prior_sd**2
        if noise is not None:
            lp -= noise
        return lp

    def log_density(self, x):
        if not self.in_support(x):
            return -np.inf
        theta, noise, v, _, _ = self._split(x)
        try:
            traj, _ = self.solve(theta)
        except NonFiniteTrajectory:
            return -np.inf
        ss = np.sum((self.observations - traj) ** 2)
        loglik = -0.5 * ss / v
        if noise is not None:
            loglik -= 0.5 * self.n_scalar_obs * math.log(v)
        return float(loglik + self._log_prior(theta, noise))

    def grad_log_density(self, x):
        theta, noise, v, dv, _ = self._split(x)
        traj, sens = self.solve(theta)
        resid = self.observations - traj
        grad = np.einsum("tr,trp->p", resid, sens) / v - theta / self.prior_sd**2
        if noise is None:
            return grad
        ss = np.sum(resid**2)
        dnoise = (-0.5 * self.n_scalar_obs / v + 0.5 * ss / v**2) * dv - 1.0
        return np.append(grad, dnoise)

    def metric_tensor(self, x):
        theta, noise, v, dv, _ = self._split(x)
        _, sens = self.solve(theta)
        g = np.einsum("trp,trq->pq", sens, sens) / v + np.eye(3) / self.prior_sd**2
        if noise is None:
            return g
        out = np.zeros((4, 4))
        out[:3, :3] = g
        out[3, 3] = 0.5 * self.n_scalar_obs * (dv / v) ** 2
        return out
