"""Small dense linear-algebra helpers for complex matrices."""

import warnings

import numpy as np
import scipy.linalg as la

from .errors import NumericError

HERMITIAN_TOL = 1e-12


def is_hermitian(A, tol=HERMITIAN_TOL):
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and np.allclose(A, A.conj().T, rtol=0.0, atol=tol)


def hermitian_part(A):
    return 0.5 * (A + A.conj().T)


def logdet_hpd(A, what="matrix"):
    """Log-determinant of a Hermitian positive-definite matrix.

    Works on stacks of matrices (``(..., n, n)``). The Cholesky factor's
    log-pivots are summed, so no determinant is ever formed explicitly.
    """
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"{what} is not positive definite") from exc
    d = np.diagonal(L, axis1=-2, axis2=-1).real
    return 2.0 * np.log(d).sum(axis=-1)


def logabsdet(A, what="matrix"):
    """``ln|det A|`` for a general square matrix via pivoted LU."""
    with warnings.catch_warnings():
        # an exactly zero pivot is reported below as NumericError
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, _ = la.lu_factor(np.asarray(A), check_finite=True)
    d = np.abs(np.diag(lu))
    if np.any(d == 0.0):
        raise NumericError(f"{what} is singular")
    return float(np.log(d).sum())


def hermitian_sqrt(A):
    """Principal square root of a Hermitian PSD matrix via eigendecomposition."""
    w, U = np.linalg.eigh(hermitian_part(np.asarray(A, dtype=complex)))
    if w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise NumericError("square root of a matrix with negative eigenvalues")
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.conj().T
