"""Dense symmetric positive-definite linear algebra.

Everything here accepts either a single ``(d, d)`` matrix or a stack of them
with shape ``(..., d, d)``; the stacked form is what the ensemble simulator
uses to advance many paths at once.

Third-order metric derivatives are plain arrays with the layout
``partials[..., j, k, m] = dG_km / dx_j``.
"""

import numpy as np
from scipy.linalg.blas import dtrsv
from scipy.linalg.lapack import dpotrf, dtrtri

from .errors import DimensionMismatch, NotPositiveDefinite, NotSymmetric

SYMMETRY_RTOL = 1e-12


class SpdMatrix:
    """A symmetric positive-definite matrix (or stack) with its Cholesky factor.

    Attributes:
        entries: Symmetrised matrix entries, shape ``(..., d, d)``.
        chol: Lower-triangular Cholesky factor with ``chol @ chol.T == entries``.
        logdet: ``log|entries|``, shape ``(...)``.
    """

    __slots__ = ("entries", "chol", "logdet")

    def __init__(self, entries, chol, logdet):
        self.entries = entries
        self.chol = chol
        self.logdet = logdet

    @property
    def dim(self):
        return self.entries.shape[-1]

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim}, logdet={self.logdet!r})"


def chol_factor(m, check_symmetry=True):
    """Factorise a symmetric matrix, raising if it is not positive definite.

    The input is symmetrised as ``(m + m.T) / 2`` before factorisation so
    rounding-level asymmetry is absorbed; anything larger raises
    :class:`NotSymmetric`.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimensionMismatch(f"expected square matrix, got shape {m.shape}")
    mt = np.swapaxes(m, -1, -2)
    if check_symmetry and m.size:
        scale = np.abs(m).max()
        if np.abs(m - mt).max() > SYMMETRY_RTOL * max(scale, 1e-300):
            raise NotSymmetric("matrix is not symmetric")
    sym = 0.5 * (m + mt)
    if sym.ndim == 2:
        chol, info = dpotrf(sym, lower=1, clean=1)
        if info != 0:
            raise NotPositiveDefinite(f"leading minor {info} is not positive")
    else:
        try:
            chol = np.linalg.cholesky(sym)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from None
    # a non-finite entry anywhere propagates into some pivot
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(axis=-1)
    if not np.isfinite(logdet).all():
        raise NotPositiveDefinite("matrix has non-finite entries")
    return SpdMatrix(sym, chol, logdet)


def spd_solve(m, v):
    """Solve ``m @ u = v`` using the stored Cholesky factor."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != m.dim:
        raise DimensionMismatch(f"vector of length {v.shape[-1]} for dim {m.dim}")
    if m.chol.ndim == 2 and v.ndim == 1:
        w = dtrsv(m.chol, v, lower=1)
        return dtrsv(m.chol, w, lower=1, trans=1)
    return np.linalg.solve(m.entries, v[..., None])[..., 0]


def spd_inverse(m):
    """Inverse of an SPD matrix, returned with its own factorisation."""
    if m.chol.ndim == 2:
        linv, info = dtrtri(m.chol, lower=1)
        if info != 0:
            raise NotPositiveDefinite("singular Cholesky factor")
        linv = np.tril(linv)
    else:
        linv = np.linalg.solve(m.chol, np.broadcast_to(np.eye(m.dim), m.chol.shape))
    inv = np.swapaxes(linv, -1, -2) @ linv
    return chol_factor(inv, check_symmetry=False)
