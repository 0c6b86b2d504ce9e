"""Dataset ingestion and synthetic generators.

Benchmark logistic-regression datasets are never bundled; users supply a CSV
with a header row, a ``y`` column of 0/1 responses and numeric covariates.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from ..errors import BadConfig, MissingDataset
from .fhn import generate_fhn_dataset


@dataclass(frozen=True)
class LogisticDataset:
    covariates: np.ndarray
    responses: np.ndarray
    names: tuple
    true_beta: np.ndarray | None = None

    def design(self, intercept=True, standardize=True):
        """Design matrix with optional standardisation and leading intercept column."""
        x = self.covariates
        if standardize:
            sd = x.std(axis=0)
            sd[sd == 0] = 1.0
            x = (x - x.mean(axis=0)) / sd
        if intercept:
            x = np.column_stack([np.ones(len(x)), x])
        return x


def load_logistic_csv(path):
    path = Path(path)
    if not path.is_file():
        raise MissingDataset(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise BadConfig(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if "y" not in header:
        raise BadConfig(f"{path}: no response column named 'y'")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise BadConfig(f"{path}: non-numeric value ({exc})") from None
    yi = header.index("y")
    y = data[:, yi]
    if not np.all((y == 0) | (y == 1)):
        raise BadConfig(f"{path}: column 'y' must contain only 0 and 1")
    cols = [i for i in range(len(header)) if i != yi]
    return LogisticDataset(data[:, cols], y, tuple(header[i] for i in cols))


def write_logistic_csv(data, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.names) + ["y"])
        for row, y in zip(data.covariates, data.responses):
            writer.writerow([repr(float(v)) for v in row] + [int(y)])


def synthetic_logistic(seed, n=500, d=5, beta_scale=1.0):
    """Random ``N(0, 1)`` covariates and Bernoulli responses.

    ``d`` counts the intercept, so ``d - 1`` covariate columns are drawn and
    ``true_beta`` has length ``d`` (intercept first).
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d - 1))
    beta = beta_scale * rng.standard_normal(d)
    eta = beta[0] + x @ beta[1:]
    y = (rng.random(n) < expit(eta)).astype(float)
    names = tuple(f"x{i + 1}" for i in range(d - 1))
    return LogisticDataset(x, y, names, beta)


def generate_datasets(kind, seed, **kwargs):
    """Generate a synthetic dataset: ``kind`` is ``"logistic"`` or ``"fhn"``."""
    if kind == "logistic":
        return synthetic_logistic(seed, **kwargs)
    if kind == "fhn":
        return generate_fhn_dataset(seed, **kwargs)
    raise BadConfig(f"unknown dataset kind {kind!r}")
