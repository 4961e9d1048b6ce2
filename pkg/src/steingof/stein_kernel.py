"""Gaussian reproducing kernel and the Stein kernel ``u(x, x')``.

For a null density with score ``s`` the Stein kernel is::

    u(x, x') = s(x)' k s(x') + s(x)' grad_{x'} k + (grad_x k)' s(x')
               + trace(grad_{x,x'} k)

With the Gaussian kernel all terms are closed form, so the KSD between the
data law and the null only needs the null score.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np

from .distributions import DistributionSpec, score
from .errors import DomainError

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # try OpenMP before TBB; an outdated TBB only produces a noisy warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel ``exp(-|x - x'|^2 / (2 sigma^2))``."""

    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"bandwidth sigma must be finite and positive, got {self.sigma!r}")


def _pair(x, xp):
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape or x.ndim != 1:
        raise DomainError(f"points must be vectors of equal length, got {x.shape} and {xp.shape}")
    return x, xp


def kernel(cfg: KernelConfig, x, xp) -> float:
    x, xp = _pair(x, xp)
    diff = x - xp
    return math.exp(-float(diff @ diff) / (2.0 * cfg.sigma**2))


def kernel_grads(cfg: KernelConfig, x, xp) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(grad_x k, grad_x' k, grad_{x,x'} k)``."""
    x, xp = _pair(x, xp)
    s2 = cfg.sigma**2
    k = kernel(cfg, x, xp)
    diff = x - xp
    gx = k * (xp - x) / s2
    gxp = k * diff / s2
    gxx = (k / s2) * (np.eye(x.size) - np.outer(diff, diff) / s2)
    return gx, gxp, gxx


def u_stein(spec: DistributionSpec, cfg: KernelConfig, x, xp) -> float:
    """Stein kernel for one pair, built term by term from the kernel derivatives."""
    x, xp = _pair(x, xp)
    s = score(spec, x)
    sp = score(spec, xp)
    k = kernel(cfg, x, xp)
    gx, gxp, gxx = kernel_grads(cfg, x, xp)
    return float(k * (s @ sp) + s @ gxp + gx @ sp + np.trace(gxx))


def stein_matrix(x: np.ndarray, s: np.ndarray, sigma: float) -> np.ndarray:
    """Full ``n x n`` matrix of ``u(x_i, x_j)`` given points and their scores.

    Uses O(n^2 d) memory-light vectorized algebra; meant for moderate n and
    for testing. The hot path is :func:`ustat_sum`.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    d = x.shape[1]
    s2 = sigma * sigma
    sq = np.einsum("ij,ij->i", x, x)
    dist2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * x @ x.T, 0.0)
    k = np.exp(-dist2 / (2.0 * s2))
    sx = np.einsum("ij,ij->i", s, x)
    # s_i'(x_i - x_j) and s_j'(x_j - x_i)
    t2 = sx[:, None] - s @ x.T
    t3 = sx[None, :] - x @ s.T
    return k * (s @ s.T + (t2 + t3) / s2 + d / s2 - dist2 / (s2 * s2))


@numba.njit(cache=True, fastmath=False, parallel=True)
def _row_sums(x, s, sigma):
    n, d = x.shape
    s2 = sigma * sigma
    inv2 = 1.0 / (2.0 * s2)
    out = np.zeros(n)
    for i in numba.prange(n):
        acc = 0.0
        for j in range(i + 1, n):
            dist2 = 0.0
            ss = 0.0
            cross = 0.0
            for a in range(d):
                diff = x[i, a] - x[j, a]
                dist2 += diff * diff
                ss += s[i, a] * s[j, a]
                cross += (s[i, a] - s[j, a]) * diff
            acc += math.exp(-dist2 * inv2) * (ss + cross / s2 + d / s2 - dist2 / (s2 * s2))
        out[i] = acc
    return out


def ustat_sum(x: np.ndarray, s: np.ndarray, sigma: float) -> float:
    """Sum of ``u(x_i, x_j)`` over unordered pairs ``i < j``.

    Each row sum is accumulated in a fixed order and row sums are added
    serially, so the result is bit-identical for any thread count.
    """
    x = np.ascontiguousarray(x, dtype=float)
    s = np.ascontiguousarray(s, dtype=float)
    return float(np.sum(_row_sums(x, s, float(sigma))))
