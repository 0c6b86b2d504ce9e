"""Bayesian logistic regression with the expected Fisher information metric."""

import warnings

import numpy as np
from scipy.special import expit

from ..target import TargetModel

DEFAULT_PRIOR_VAR = 100.0


class LogisticModel(TargetModel):
    """Logistic regression posterior with prior ``beta ~ N(0, prior_var I)``.

    The metric is ``X^T Lambda X + I / prior_var`` with
    ``Lambda = diag(s (1 - s))``, ``s = sigmoid(X beta)``. Because it is the
    Hessian of the negative log-posterior, its derivative tensor is fully
    symmetric.
    """

    batched = True
    has_metric = True

    def __init__(self, design, responses, prior_var=DEFAULT_PRIOR_VAR):
        self.design = np.asarray(design, dtype=float)
        self.responses = np.asarray(responses, dtype=float)
        if self.design.ndim != 2 or self.responses.shape != (self.design.shape[0],):
            raise ValueError("design must be n x d and responses length n")
        if not np.all((self.responses == 0) | (self.responses == 1)):
            raise ValueError("responses must be 0 or 1")
        if prior_var <= 0:
            raise ValueError("prior_var must be positive")
        self.prior_var = float(prior_var)
        self.dim = self.design.shape[1]
        if np.linalg.matrix_rank(self.design) < self.dim:
            warnings.warn("design matrix is not of full column rank", stacklevel=2)
        n, d = self.design.shape
        self._outer = np.einsum("ni,nj->nij", self.design, self.design).reshape(n, d * d)

    def _eta(self, beta):
        return np.asarray(beta, dtype=float) @ self.design.T

    def log_density(self, beta):
        beta = np.asarray(beta, dtype=float)
        eta = self._eta(beta)
        loglik = np.sum(self.responses * eta - np.logaddexp(0.0, eta), axis=-1)
        return loglik - 0.5 * np.sum(beta * beta, axis=-1) / self.prior_var

    def grad_log_density(self, beta):
        beta = np.asarray(beta, dtype=float)
        s = expit(self._eta(beta))
        return (self.responses - s) @ self.design - beta / self.prior_var

    def metric_tensor(self, beta):
        s = expit(self._eta(beta))
        w = s * (1.0 - s)
        d = self.dim
        g = (w @ self._outer).reshape(w.shape[:-1] + (d, d))
        return g + np.eye(d) / self.prior_var

    def metric_partials(self, beta):
        """``dG/dbeta_k = X^T diag(s (1-s) (1-2s) X[:, k]) X`` at ``[k, i, j]``."""
        s = expit(self._eta(beta))
        w = s * (1.0 - s) * (1.0 - 2.0 * s)
        d = self.dim
        weighted = w[..., :, None] * self.design
        out = np.swapaxes(weighted, -1, -2) @ self._outer
        return out.reshape(w.shape[:-1] + (d, d, d))
