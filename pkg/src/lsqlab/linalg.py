"""Dense symmetric linear algebra built on one factorization (``eigh``).

Every inverse in the package goes through a symmetric eigendecomposition so
that the smallest eigenvalue, the trace of the inverse and whitening share
the same diagnostics.  Functions accept single matrices; the ``batch_*``
helpers operate on stacks with a leading replicate axis.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import AsymmetricMatrixError, SingularMatrixError

__all__ = [
    "SINGULAR_RTOL",
    "SYMMETRY_RTOL",
    "sample_covariance",
    "whitened_covariance",
    "inverse_sqrt",
    "sqrt_psd",
    "min_eigenvalue",
    "trace_inverse",
    "truncate_covariates",
    "singular_mask",
    "batch_sample_covariance",
]

# lambda_min <= SINGULAR_RTOL * trace / d counts as singular
SINGULAR_RTOL = 1e-12
SYMMETRY_RTOL = 1e-10


def _as_square(A: ArrayLike) -> NDArray[np.float64]:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def _check_symmetric(A: NDArray[np.float64], rtol: float = SYMMETRY_RTOL) -> None:
    scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
    err = np.max(np.abs(A - A.T))
    if err > rtol * scale:
        raise AsymmetricMatrixError(f"matrix is not symmetric (max |A - A^T| = {err:.3e})")


def sample_covariance(X: ArrayLike) -> NDArray[np.float64]:
    """Empirical second-moment matrix ``X^T X / n`` (no centering)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be an n x d matrix with n >= 1")
    S = X.T @ X / X.shape[0]
    return 0.5 * (S + S.T)


def batch_sample_covariance(X: NDArray[np.float64]) -> NDArray[np.float64]:
    """Sample covariances for a stack ``X`` of shape (R, n, d)."""
    S = np.einsum("rni,rnj->rij", X, X) / X.shape[1]
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def _check_spd(eigvals: NDArray[np.float64], what: str) -> None:
    d = eigvals.shape[-1]
    trace = float(np.sum(eigvals))
    lam = float(eigvals[0])
    if not lam > SINGULAR_RTOL * abs(trace) / d:
        raise SingularMatrixError(f"{what} is singular to tolerance", lam)


def inverse_sqrt(Sigma: ArrayLike) -> NDArray[np.float64]:
    """The SPD inverse square root ``Sigma^{-1/2}``."""
    Sigma = _as_square(Sigma)
    _check_symmetric(Sigma)
    w, V = np.linalg.eigh(Sigma)
    _check_spd(w, "covariance")
    out = (V / np.sqrt(w)) @ V.T
    return 0.5 * (out + out.T)


def sqrt_psd(Sigma: ArrayLike) -> NDArray[np.float64]:
    """The PSD square root ``Sigma^{1/2}``."""
    Sigma = _as_square(Sigma)
    _check_symmetric(Sigma)
    w, V = np.linalg.eigh(Sigma)
    if w[0] < -SYMMETRY_RTOL * max(abs(w[-1]), 1.0):
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    out = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (out + out.T)


def whitened_covariance(Sigma_hat: ArrayLike, Sigma: ArrayLike) -> NDArray[np.float64]:
    """``Sigma^{-1/2} Sigma_hat Sigma^{-1/2}``; raises if ``Sigma`` is near-singular."""
    Sigma_hat = _as_square(Sigma_hat)
    W = inverse_sqrt(Sigma)
    out = W @ Sigma_hat @ W
    return 0.5 * (out + out.T)


def min_eigenvalue(A: ArrayLike) -> float:
    A = _as_square(A)
    _check_symmetric(A)
    return float(np.linalg.eigvalsh(A)[0])


def trace_inverse(A: ArrayLike, rel_tol: float = SINGULAR_RTOL) -> float:
    """Sum of reciprocal eigenvalues of a symmetric positive definite matrix.

    Raises :class:`SingularMatrixError` when ``lambda_min <= rel_tol * trace / d``;
    callers decide whether that is a degenerate event or a hard failure.
    """
    A = _as_square(A)
    _check_symmetric(A)
    w = np.linalg.eigvalsh(A)
    d = A.shape[0]
    if not w[0] > rel_tol * abs(np.sum(w)) / d:
        raise SingularMatrixError("matrix is singular to tolerance", float(w[0]))
    return float(np.sum(1.0 / w))


def singular_mask(eigvals: NDArray[np.float64], rel_tol: float = SINGULAR_RTOL) -> NDArray[np.bool_]:
    """Row-wise singularity flags for ascending eigenvalue stacks (..., d)."""
    d = eigvals.shape[-1]
    trace = np.sum(eigvals, axis=-1)
    return ~(eigvals[..., 0] > rel_tol * np.abs(trace) / d)


def truncate_covariates(X: ArrayLike) -> NDArray[np.float64]:
    """Shrink each row to norm at most ``sqrt(d)``, keeping its direction.

    Works on (n, d) matrices or any stack whose last axis is the dimension.
    """
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[-1]
    norms = np.linalg.norm(X, axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        scale = np.minimum(1.0, np.sqrt(d) / norms)
    scale = np.where(norms > 0, scale, 1.0)
    return X * scale
