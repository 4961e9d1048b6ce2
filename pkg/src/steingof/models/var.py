"""VAR(p) least squares, filtering and stationarity checks."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateSampleError, SingularMatrixError


def lag_matrix(y: np.ndarray, p: int) -> np.ndarray:
    """Regressors ``[Y_{t-1}, ..., Y_{t-p}]`` for ``t = p..n-1``, shape (n-p, p*d)."""
    n = y.shape[0]
    return np.hstack([y[p - k - 1 : n - k - 1] for k in range(p)])


def var_mean(y: np.ndarray, M: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Conditional means ``M + sum_k A_k Y_{t-k}`` for ``t = p..n-1``."""
    p = A.shape[0]
    X = lag_matrix(y, p)
    coef = np.concatenate([A[k].T for k in range(p)], axis=0)  # (p*d, d)
    return M + X @ coef


def fit_var_lse(y: np.ndarray, p: int, free_M: np.ndarray, free_A: np.ndarray):
    """Equation-by-equation least squares with zero restrictions.

    Parameters
    ----------
    y : ndarray (n, d)
    p : int
    free_M : bool ndarray (d,)
        Whether equation i has an intercept.
    free_A : bool ndarray (p, d, d)
        ``free_A[k, i, j]`` marks ``A_k[i, j]`` as estimated.

    Returns
    -------
    M, A, eps
        Intercept, lag matrices and the ``(n-p, d)`` residuals.
    """
    n, d = y.shape
    if n <= p * d + 10:
        raise DegenerateSampleError(f"VAR({p}) in dimension {d} needs n > {p * d + 10}, got {n}")
    X = np.hstack([np.ones((n - p, 1)), lag_matrix(y, p)])
    target = y[p:]
    M = np.zeros(d)
    A = np.zeros((p, d, d))
    for i in range(d):
        cols = np.concatenate([[free_M[i]], np.concatenate([free_A[k, i] for k in range(p)])])
        idx = np.flatnonzero(cols)
        if idx.size == 0:
            continue
        Xi = X[:, idx]
        beta, _, rank, _ = np.linalg.lstsq(Xi, target[:, i], rcond=None)
        if rank < idx.size:
            raise SingularMatrixError(f"VAR regressor matrix for equation {i} is rank deficient")
        full = np.zeros(1 + p * d)
        full[idx] = beta
        M[i] = full[0]
        for k in range(p):
            A[k, i] = full[1 + k * d : 1 + (k + 1) * d]
    eps = target - var_mean(y, M, A)
    return M, A, eps


def companion(A: np.ndarray) -> np.ndarray:
    p, d, _ = A.shape
    top = np.hstack(list(A))
    if p == 1:
        return top
    bottom = np.hstack([np.eye(d * (p - 1)), np.zeros((d * (p - 1), d))])
    return np.vstack([top, bottom])


def spectral_radius(A: np.ndarray) -> float:
    """Largest absolute eigenvalue of the VAR companion matrix."""
    return float(np.max(np.abs(np.linalg.eigvals(companion(A)))))
