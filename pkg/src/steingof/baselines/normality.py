"""Moment- and characteristic-function-based multivariate normality tests."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import stats

from ..errors import DegenerateSampleError, DomainError, SingularMatrixError
from .result import BaselineResult


def _centered(data) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DomainError("data must be an (n, d) matrix")
    if not np.all(np.isfinite(x)):
        raise DomainError("data contains non-finite values")
    n, d = x.shape
    if n <= d:
        raise DegenerateSampleError(f"need n > d, got n={n}, d={d}")
    xc = x - x.mean(axis=0)
    S = xc.T @ xc / n
    w = np.linalg.eigvalsh(S)
    if w.min() <= 1e-12 * max(1.0, w.max()):
        raise SingularMatrixError("sample covariance is singular")
    return xc, S


def mardia_tests(data) -> tuple[BaselineResult, BaselineResult]:
    """Mardia's multivariate skewness and kurtosis tests.

    With ``m_ij = (Y_i - Ybar)' S^{-1} (Y_j - Ybar)`` (S with divisor n),
    skewness is ``n^{-2} sum_ij m_ij^3`` and ``(n/6)`` times it is referred
    to chi-square with ``d(d+1)(d+2)/6`` degrees of freedom. Kurtosis is
    ``n^{-1} sum_i m_ii^2`` referred to ``N(d(d+2), 8d(d+2)/n)`` with a
    two-sided p-value.
    """
    xc, S = _centered(data)
    n, d = xc.shape
    G = xc @ np.linalg.solve(S, xc.T)
    t1 = float(np.sum(G**3) / n**2)
    t2 = float(np.mean(np.diag(G) ** 2))
    df = d * (d + 1) * (d + 2) // 6
    p1 = float(stats.chi2.sf(n * t1 / 6.0, df))
    mean, var = d * (d + 2.0), 8.0 * d * (d + 2.0) / n
    z = (t2 - mean) / math.sqrt(var)
    p2 = float(2.0 * stats.norm.sf(abs(z)))
    return (
        BaselineResult("mardia_skew", t1, p1, "chi2", {"df": df, "scaled_statistic": n * t1 / 6.0}),
        BaselineResult("mardia_kurt", t2, p2, "normal", {"mean": mean, "var": var}),
    )


def dh_constants(n: int) -> dict:
    """Sample-size dependent constants of the Doornik-Hansen transforms."""
    n = float(n)
    beta = 3 * (n**2 + 27 * n - 70) * (n + 1) * (n + 3) / ((n - 2) * (n + 5) * (n + 7) * (n + 9))
    w2 = -1 + math.sqrt(2 * (beta - 1))
    delta = 1 / math.sqrt(math.log(math.sqrt(w2)))
    den = 6 * (n - 3) * (n + 1) * (n**2 + 15 * n - 4)
    a = (n - 2) * (n + 5) * (n + 7) * (n**2 + 27 * n - 70) / den
    c = (n - 7) * (n + 5) * (n + 7) * (n**2 + 2 * n - 5) / den
    l = (n + 5) * (n + 7) * (n**3 + 37 * n**2 + 11 * n - 313) / (2 * den)
    return {"beta": beta, "omega2": w2, "delta": delta, "a": a, "c": c, "l": l}


def dh_transform(s: np.ndarray, k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map sample skewness `s` and kurtosis `k` (not excess) to approximate N(0,1) scores."""
    cst = dh_constants(n)
    s = np.asarray(s, dtype=float)
    k = np.asarray(k, dtype=float)
    y = s * math.sqrt((cst["omega2"] - 1) * (n + 1) * (n + 3) / (12 * (n - 2)))
    z1 = cst["delta"] * np.log(y + np.sqrt(y * y + 1))
    alpha = cst["a"] + cst["c"] * s * s
    chi = 2 * cst["l"] * (k - 1 - s * s)
    z2 = np.sqrt(9 * alpha) * (1 / (9 * alpha) - 1 + np.cbrt(chi / (2 * alpha)))
    return z1, z2


def doornik_hansen(data) -> BaselineResult:
    """Doornik-Hansen omnibus test.

    The data are centered and orthonormalized through the inverse square
    root of the correlation matrix; each component's skewness and kurtosis
    are transformed to ``z1, z2`` and the statistic ``sum(z1^2 + z2^2)`` is
    referred to chi-square with ``2d`` degrees of freedom.
    """
    xc, S = _centered(data)
    n, d = xc.shape
    if n < 8:
        raise DegenerateSampleError("Doornik-Hansen needs n >= 8")
    sd = np.sqrt(np.diag(S))
    corr = S / np.outer(sd, sd)
    lam, H = np.linalg.eigh(corr)
    if lam.min() <= 0:
        raise SingularMatrixError("correlation matrix is singular")
    v = (xc / sd) @ (H / np.sqrt(lam)) @ H.T
    m2 = np.mean(v**2, axis=0)
    if np.any(m2 <= 0):
        raise DegenerateSampleError("a transformed component has zero variance")
    s = np.mean(v**3, axis=0) / m2**1.5
    k = np.mean(v**4, axis=0) / m2**2
    z1, z2 = dh_transform(s, k, n)
    stat = float(np.sum(z1**2 + z2**2))
    return BaselineResult("dh", stat, float(stats.chi2.sf(stat, 2 * d)), "chi2", {"df": 2 * d})


def hz_beta(n: int, d: int) -> float:
    return (1 / math.sqrt(2)) * (n * (2 * d + 1) / 4) ** (1 / (d + 4))


def hz_moments(n: int, d: int) -> tuple[float, float]:
    """Mean and variance of the log-normal approximation to the HZ statistic."""
    b = hz_beta(n, d)
    b2, b4, b8 = b**2, b**4, b**8
    mu = 1 - (1 + 2 * b2) ** (-d / 2) * (1 + d * b2 / (1 + 2 * b2) + d * (d + 2) * b4 / (2 * (1 + 2 * b2) ** 2))
    wb = (1 + b2) * (1 + 3 * b2)
    var = (
        2 * (1 + 4 * b2) ** (-d / 2)
        + 2 * (1 + 2 * b2) ** (-d) * (1 + 2 * d * b4 / (1 + 2 * b2) ** 2 + 3 * d * (d + 2) * b8 / (4 * (1 + 2 * b2) ** 4))
        - 4 * wb ** (-d / 2) * (1 + 3 * d * b4 / (2 * wb) + d * (d + 2) * b8 / (2 * wb**2))
    )
    return mu, var


def henze_zirkler(data) -> BaselineResult:
    """Henze-Zirkler test with the log-normal p-value approximation."""
    xc, S = _centered(data)
    n, d = xc.shape
    if n < 20:
        warnings.warn(f"Henze-Zirkler approximation is meant for n >= 20, got n={n}", stacklevel=2)
    b = hz_beta(n, d)
    G = xc @ np.linalg.solve(S, xc.T)
    Di = np.diag(G)
    Dij = Di[:, None] + Di[None, :] - 2 * G
    stat = float(
        np.sum(np.exp(-0.5 * b**2 * Dij)) / n
        - 2 * (1 + b**2) ** (-d / 2) * np.sum(np.exp(-b**2 / (2 * (1 + b**2)) * Di))
        + n * (1 + 2 * b**2) ** (-d / 2)
    )
    mu, var = hz_moments(n, d)
    s2 = math.log(1 + var / mu**2)
    m_log = math.log(mu) - s2 / 2
    p = float(stats.lognorm.sf(stat, math.sqrt(s2), scale=math.exp(m_log))) if stat > 0 else 1.0
    return BaselineResult("hz", stat, p, "lognormal", {"mu": mu, "var": var, "beta": b})
