"""Dense symmetric linear algebra used by every filter and classifier.

Covariance estimation, oracle-approximating shrinkage toward a scaled
identity, and ordinary/generalized symmetric eigendecompositions.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import linalg as sla

from .errors import DataError, DefinitenessError, DegenerateInputError, NumericError

SHRINK_EPS = 1e-12


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class Shrinkage(NamedTuple):
    cov: np.ndarray
    rho: float
    degenerate: bool


def symmetrize(S):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DataError(f"expected a square matrix, got shape {S.shape}")
    return 0.5 * (S + S.T)


def covariance(data, center=True):
    """Sample covariance of the rows of ``data`` (channels x samples).

    Returns ``D D^T / (N - 1)`` with ``D`` row-centered when ``center``.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DataError(f"expected a 2-D array, got {data.ndim}-D")
    n = data.shape[1]
    if n < 2:
        raise DegenerateInputError(f"need at least 2 samples, got {n}")
    if not np.all(np.isfinite(data)):
        raise DataError("covariance input contains non-finite values")
    if center:
        data = data - data.mean(axis=1, keepdims=True)
    return symmetrize(data @ data.T / (n - 1))


def oas_intensity(S, samples):
    """Oracle-approximating shrinkage intensity for target ``tr(S)/p * I``."""
    S = symmetrize(S)
    p = S.shape[0]
    tr = np.trace(S)
    tr2 = np.sum(S * S)  # tr(S @ S) for symmetric S
    denom = (samples + 1.0 - 2.0 / p) * (tr2 - tr * tr / p)
    num = (1.0 - 2.0 / p) * tr2 + tr * tr
    # denom == 0 only when S is already a multiple of the identity
    if denom <= 1e-15 * max(tr2, np.finfo(float).tiny):
        return 1.0
    return float(np.clip(num / denom, 0.0, 1.0))


def apply_shrinkage(S, rho):
    S = symmetrize(S)
    p = S.shape[0]
    mu = np.trace(S) / p
    return (1.0 - rho) * S + rho * mu * np.eye(p)


def shrink_covariance(S, samples):
    """Shrink a sample covariance toward ``trace(S)/dim * I``.

    Parameters
    ----------
    S : ndarray, shape (p, p)
        Symmetric positive semidefinite sample covariance.
    samples : int
        Number of observations that produced ``S``.

    Returns
    -------
    Shrinkage
        ``(cov, rho, degenerate)``. ``degenerate`` is set when ``trace(S)``
        is zero, in which case ``cov`` is ``1e-12 * I``.
    """
    S = symmetrize(S)
    if not np.all(np.isfinite(S)):
        raise DataError("covariance contains non-finite values")
    p = S.shape[0]
    if np.trace(S) <= 0:
        return Shrinkage(SHRINK_EPS * np.eye(p), 1.0, True)
    rho = oas_intensity(S, samples)
    return Shrinkage(apply_shrinkage(S, rho), rho, False)


def _sort_desc(vals, vecs):
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    # deterministic sign: largest-magnitude entry of every column positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return EigenDecomposition(vals, vecs * signs)


def sym_eig(S):
    S = symmetrize(S)
    if not np.all(np.isfinite(S)):
        raise DataError("matrix contains non-finite values")
    try:
        vals, vecs = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigensolver did not converge: {exc}") from exc
    return _sort_desc(vals, vecs)


def gen_eig(A, B):
    """Solve ``A v = lambda B v`` for symmetric ``A`` and SPD ``B``.

    Eigenvectors are B-orthonormal. The problem is reduced to a standard
    symmetric one by whitening with the Cholesky factor of ``B``.
    """
    A = symmetrize(A)
    B = symmetrize(B)
    if A.shape != B.shape:
        raise DataError(f"shape mismatch {A.shape} vs {B.shape}")
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("B is not positive definite") from exc
    Linv_A = sla.solve_triangular(L, A, lower=True)
    C = sla.solve_triangular(L, Linv_A.T, lower=True)
    vals, U = sym_eig(C)
    V = sla.solve_triangular(L.T, U, lower=False)
    return _sort_desc(vals, V)
