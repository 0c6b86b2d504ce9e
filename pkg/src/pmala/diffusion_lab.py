"""Euler-Maruyama ensembles and empirical checks of invariant densities."""

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import InsufficientSamples, InvalidRun, PmalaError

MIN_RETAINED = 10_000
MAX_FROZEN_FRACTION = 0.01


def em_step(spec, x, h, noise):
    """One Euler-Maruyama step ``x + h b(x) + sqrt(V(x)) noise``.

    ``noise`` must already carry the ``sqrt(h)`` scale. Works on a single
    state or a stack; states whose drift or volatility cannot be evaluated
    come back as NaN.
    """
    x = np.asarray(x, dtype=float)
    try:
        drift, chol = spec.evaluate(x)
    except (PmalaError, np.linalg.LinAlgError, FloatingPointError):
        if x.ndim == 1:
            return np.full_like(x, np.nan)
        return np.stack([em_step(spec, row, h, n) for row, n in zip(x, noise)])
    return x + h * drift + np.einsum("...ij,...j->...i", chol, noise)


def simulate_path(spec, x0, h, noises):
    """Trajectory ``(len(noises) + 1, d)`` driven by a given noise sequence."""
    path = np.empty((len(noises) + 1, np.size(x0)))
    path[0] = x0
    for i, noise in enumerate(noises):
        path[i + 1] = em_step(spec, path[i], h, noise)
    return path


@dataclass
class EnsembleConfig:
    """Parameters of an ensemble run.

    ``x0`` is a ``(d,)`` start shared by every path, an ``(n_paths, d)``
    array, or a callable ``(rng, n_paths) -> array``. States are kept every
    ``thin`` steps after ``burn_in``.
    """

    n_paths: int
    n_steps: int
    step: float
    burn_in: int
    x0: Any
    seed: int = 0
    thin: int = 10

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError("burn_in must be in [0, n_steps)")
        if self.n_paths < 1 or self.thin < 1:
            raise ValueError("n_paths and thin must be positive")


@dataclass
class EnsembleResult:
    samples: np.ndarray  # (n_retained, d), frozen paths removed
    frozen_fraction: float
    n_paths: int
    label: str


def simulate_ensemble(spec, cfg):
    """Advance all paths together and pool the retained states.

    Paths that produce a non-finite state are frozen and dropped from the
    output.

    Raises:
        InvalidRun: more than 1% of paths froze.
    """
    rng = np.random.default_rng(cfg.seed)
    if callable(cfg.x0):
        x = np.array(cfg.x0(rng, cfg.n_paths), dtype=float)
    elif np.ndim(cfg.x0) == 1:
        x = np.tile(np.asarray(cfg.x0, dtype=float), (cfg.n_paths, 1))
    else:
        x = np.array(cfg.x0, dtype=float)
    d = x.shape[1]
    frozen = np.zeros(cfg.n_paths, dtype=bool)
    n_keep = (cfg.n_steps - cfg.burn_in) // cfg.thin
    kept = np.empty((n_keep, cfg.n_paths, d))
    sqrt_h = math.sqrt(cfg.step)
    k = 0
    for i in range(1, cfg.n_steps + 1):
        noise = sqrt_h * rng.standard_normal((cfg.n_paths, d))
        x_new = em_step(spec, x, cfg.step, noise)
        bad = ~np.all(np.isfinite(x_new), axis=1)
        if bad.any():
            frozen |= bad
            x_new[frozen] = x[frozen]
        x = x_new
        if i > cfg.burn_in and (i - cfg.burn_in) % cfg.thin == 0 and k < n_keep:
            kept[k] = x
            k += 1
    frac = float(frozen.mean())
    if frac > MAX_FROZEN_FRACTION:
        raise InvalidRun(f"{frac:.1%} of paths went non-finite")
    samples = kept[:k][:, ~frozen].reshape(-1, d)
    return EnsembleResult(samples, frac, cfg.n_paths, getattr(spec.label, "value", str(spec.label)))


@dataclass
class DensityComparison:
    coord: int
    edges: np.ndarray
    empirical: np.ndarray
    reference: np.ndarray
    tv_distance: float
    threshold: float
    label: str = ""

    @property
    def passed(self):
        return self.tv_distance <= self.threshold

    def to_record(self):
        return {"spec_label": self.label, "coord": int(self.coord),
                "tv_distance": float(self.tv_distance), "threshold": float(self.threshold),
                "pass": bool(self.passed)}


def marginal_masses(log_density, coord, edges, bounds, dim, sub=8, n_quad=401):
    """Bin masses of one coordinate's marginal under an unnormalised density.

    Other coordinates are integrated out on a uniform grid over ``bounds``
    (a ``(lo, hi)`` pair applied to each of them); within each bin a
    ``sub``-point midpoint rule is used. ``log_density`` must accept stacked
    states.
    """
    edges = np.asarray(edges, dtype=float)
    widths = np.diff(edges)
    offsets = (np.arange(sub) + 0.5) / sub
    pts = (edges[:-1, None] + widths[:, None] * offsets).ravel()
    others = [j for j in range(dim) if j != coord]
    axis = np.linspace(bounds[0], bounds[1], n_quad)
    grids = np.meshgrid(pts, *([axis] * len(others)), indexing="ij")
    states = np.empty(grids[0].shape + (dim,))
    states[..., coord] = grids[0]
    for j, g in zip(others, grids[1:]):
        states[..., j] = g
    logp = np.asarray(log_density(states), dtype=float)
    dens = np.exp(logp - np.max(logp))
    marg = dens.reshape(dens.shape[0], -1).sum(axis=1)
    masses = (marg.reshape(-1, sub).mean(axis=1)) * widths
    return masses / masses.sum()


def total_variation(p, q):
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def compare_density(cloud, claimed_log_density, coords, bins, threshold=0.03, bounds=(-6.0, 6.0),
                    label=""):
    """Histogram TV distance between sampled marginals and a claimed density.

    ``bins`` is either a bin count over ``bounds`` or explicit edges. Both
    mass vectors are normalised over the histogram range.

    Raises:
        InsufficientSamples: fewer than 10^4 points in ``cloud``.
    """
    cloud = np.asarray(cloud, dtype=float)
    if cloud.ndim == 1:
        cloud = cloud[:, None]
    if cloud.shape[0] < MIN_RETAINED:
        raise InsufficientSamples(f"{cloud.shape[0]} retained points, need {MIN_RETAINED}")
    edges = (np.linspace(bounds[0], bounds[1], bins + 1) if np.ndim(bins) == 0
             else np.asarray(bins, dtype=float))
    out = []
    for c in np.atleast_1d(coords):
        counts, _ = np.histogram(cloud[:, c], bins=edges)
        emp = counts / counts.sum()
        ref = marginal_masses(claimed_log_density, int(c), edges, bounds, cloud.shape[1])
        out.append(DensityComparison(int(c), edges, emp, ref, total_variation(emp, ref),
                                     threshold, label))
    return out
