"""Symmetric positive definite square roots."""

from __future__ import annotations

import numpy as np

from ..errors import SingularMatrixError

_SYM_TOL = 1e-10
_EIG_FLOOR = 1e-12


def _eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != a.shape[-2]:
        raise SingularMatrixError(f"expected square matrices, got shape {a.shape}")
    asym = np.abs(a - np.swapaxes(a, -1, -2))
    scale = np.maximum(1.0, np.abs(a).max(axis=(-1, -2), keepdims=True))
    if np.any(asym > _SYM_TOL * scale):
        raise SingularMatrixError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(a)
    bad = vals.min(axis=-1) <= _EIG_FLOOR
    if np.any(bad):
        idx = np.flatnonzero(np.atleast_1d(bad))
        where = f" (first at index {int(idx[0])})" if a.ndim > 2 else ""
        raise SingularMatrixError(f"matrix is not positive definite{where}")
    return vals, vecs


def sqrt_pd(a) -> np.ndarray:
    """Symmetric positive definite square root via eigendecomposition.

    Works on a single matrix or a stack ``(..., d, d)``.

    Examples
    --------
    >>> sqrt_pd([[4.0, 0.0], [0.0, 9.0]])
    array([[2., 0.],
           [0., 3.]])
    """
    vals, vecs = _eig(a)
    return (vecs * np.sqrt(vals)[..., None, :]) @ np.swapaxes(vecs, -1, -2)


def inv_sqrt_pd(a) -> np.ndarray:
    """Symmetric inverse square root ``A^{-1/2}``; stacked input allowed."""
    vals, vecs = _eig(a)
    return (vecs / np.sqrt(vals)[..., None, :]) @ np.swapaxes(vecs, -1, -2)
