"""Dense symmetric positive-definite linear algebra.

Everything downstream works with plain ``numpy`` arrays; this module only
adds the Cholesky-based primitives the estimator needs (positive-definiteness
certificate, log-determinant, inverse) and the penalized objective.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .exceptions import NotPositiveDefinite

PIVOT_FLOOR = 1e-12


def as_symmetric(A):
    """Return ``A`` as a float array, checking it is square and symmetric."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    scale = max(np.abs(A).max(), 1.0)
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("matrix is not symmetric")
    return A


@dataclass(frozen=True)
class SpdFactorization:
    """Lower Cholesky factor ``L`` with ``A = L @ L.T``."""

    L: np.ndarray

    @property
    def dim(self):
        return self.L.shape[0]


def factorize(A, pivot_floor=PIVOT_FLOOR):
    """Cholesky-factorize a symmetric matrix.

    Parameters
    ----------
    A : array_like, shape (p, p)
        Symmetric matrix. Only the lower triangle is read.
    pivot_floor : float
        A squared pivot below ``pivot_floor * max(diag(A))`` counts as a
        failure even if LAPACK accepted it.

    Raises
    ------
    NotPositiveDefinite
        With the (0-based) index of the first failing pivot.
    """
    A = np.asarray(A, dtype=float)
    L, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    d = np.diag(L)
    floor = pivot_floor * max(np.max(np.diag(A)), 0.0)
    bad = np.flatnonzero(d * d <= floor)
    if bad.size:
        raise NotPositiveDefinite(int(bad[0]))
    return SpdFactorization(L)


def logdet(F):
    return 2.0 * np.sum(np.log(np.diag(F.L)))


def invert(F):
    """Inverse of the factorized matrix, symmetrized."""
    inv, info = lapack.dpotri(F.L, lower=1)
    if info != 0:
        raise NotPositiveDefinite(max(info - 1, 0))
    inv = np.tril(inv)
    return inv + np.tril(inv, -1).T


def inner(A, B):
    """Frobenius inner product ``<A, B>``."""
    return float(np.vdot(A, B))


def objective(theta, S, Lam, F=None):
    """Penalized negative log-likelihood on the M-matrix cone.

    Evaluates ``-logdet(theta) + <theta, S - Lam>``, which equals the
    l1-penalized objective whenever every off-diagonal of ``theta`` is
    non-positive and ``diag(Lam) == 0``. A precomputed factorization of
    ``theta`` may be passed as ``F``.
    """
    if F is None:
        F = factorize(theta)
    return -logdet(F) + inner(theta, S) - inner(theta, Lam)


def l1_objective(theta, S, Lam):
    """Objective with the explicit off-diagonal l1 penalty (no sign assumption)."""
    off = np.abs(theta)
    np.fill_diagonal(off, 0.0)
    return -logdet(factorize(theta)) + inner(theta, S) + float(np.sum(Lam * off))
