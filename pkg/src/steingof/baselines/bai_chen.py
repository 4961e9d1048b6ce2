"""Bai-Chen tests for bivariate normal or Student t errors (d = 2).

The two conditional probability integral transforms ``U_1t`` (of the first
coordinate) and ``U_2t`` (of the second given the first) are fed to the
empirical process ``J_n(r) = n^{-1/2} sum_t [1(U_t <= r) - r]``. The
Khmaladze martingale transform

    W(r) = J(r) - int_0^r gdot(s)' C(s)^{-1} int_s^1 gdot dJ  ds,
    C(s) = int_s^1 gdot gdot' dr

removes the effect of estimated location and scale. The outer integral is
evaluated with the midpoint rule on a uniform grid of ``[0, r_max]`` and the
supremum is taken over the grid nodes.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate, stats

from .. import models
from ..distributions import DistributionSpec
from ..errors import DomainError, ParameterError
from .result import BaselineResult

LEVELS = (0.01, 0.05, 0.10)

#: critical values as published for levels (1%, 5%, 10%), kept verbatim
PUBLISHED_CV = {
    1: (2.211, 2.469, 2.993),
    2: (3.443, 3.792, 4.504),
    3: (2.782, 2.214, 1.940),
}


def critical_values(k: int) -> dict[float, float]:
    """Level -> critical value for ``T_BC,k``.

    The published triples are not all listed in the same order; since a
    smaller level needs a larger critical value, the values are assigned
    in decreasing order to 1%, 5% and 10%.
    """
    vals = sorted(PUBLISHED_CV[k], reverse=True)
    return dict(zip(LEVELS, vals))


# -- reference laws -------------------------------------------------------------
def _law(name: str, nu: float | None):
    return stats.norm if name == "normal" else stats.t(nu)


def _dlogpdf(name: str, nu: float | None, x: np.ndarray) -> np.ndarray:
    if name == "normal":
        return -x
    return -(nu + 1) * x / (nu + x * x)


class _Basis:
    """Score-type vector ``g(r) = (r, q(x_L), q(x_L) x_L, ...)`` over one or two laws."""

    def __init__(self, laws: tuple):
        self.laws = laws  # tuple of (name, nu)
        self.dim = 1 + 2 * len(laws)

    def gdot_r(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = [np.ones_like(r)]
        for name, nu in self.laws:
            x = _law(name, nu).ppf(r)
            dl = _dlogpdf(name, nu, x)
            out += [dl, 1 + x * dl]
        return np.stack(out, axis=-1)

    def g_r(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = [r]
        for name, nu in self.laws:
            L = _law(name, nu)
            x = L.ppf(r)
            q = L.pdf(x)
            out += [q, q * x]
        return np.stack(out, axis=-1)

    def g_one(self) -> np.ndarray:
        g = np.zeros(self.dim)
        g[0] = 1.0
        return g

    def _gdot_x(self, x) -> np.ndarray:
        """``gdot`` at quantile points `x` of the first law, shape ``(len(x), dim)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        name0, nu0 = self.laws[0]
        sf = _law(name0, nu0).sf(x)
        out = [np.ones_like(x)]
        for name, nu in self.laws:
            xl = x if (name, nu) == (name0, nu0) else _law(name, nu).isf(sf)
            dl = _dlogpdf(name, nu, xl)
            out += [dl, 1 + xl * dl]
        return np.stack(out, axis=-1)

    def tail_gram(self, s: np.ndarray, order: int = 20) -> np.ndarray:
        """``C(s)`` for increasing points `s`, integrating in the first law's quantile scale.

        Gauss-Legendre rules cover the gaps between consecutive points and an
        adaptive rule covers the unbounded tail beyond the last one.
        """
        name0, nu0 = self.laws[0]
        L0 = _law(name0, nu0)
        xs = L0.ppf(np.asarray(s, dtype=float))

        def f(x):
            x = np.atleast_1d(x)
            g = self._gdot_x(x)
            return g[:, :, None] * g[:, None, :] * L0.pdf(x)[:, None, None]

        tail, _ = integrate.quad_vec(lambda x: f(x)[0], xs[-1], np.inf, epsrel=1e-12, epsabs=1e-14)
        t, w = np.polynomial.legendre.leggauss(order)
        lo, hi = xs[:-1, None], xs[1:, None]
        nodes = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
        vals = f(nodes.ravel()).reshape(nodes.shape + (self.dim, self.dim))
        pieces = np.einsum("k,ikab->iab", w, vals) * (0.5 * (hi - lo))[:, :, None]
        out = np.empty((len(xs), self.dim, self.dim))
        out[-1] = tail
        out[:-1] = tail + np.cumsum(pieces[::-1], axis=0)[::-1]
        return out


@lru_cache(maxsize=32)
def _grid(laws: tuple, n_grid: int, r_max: float):
    """Cached grid quantities: nodes, midpoints, gdot and C^{-1}gdot at the midpoints, g at the midpoints."""
    basis = _Basis(laws)
    h = r_max / n_grid
    nodes = np.linspace(0.0, r_max, n_grid + 1)
    mids = (np.arange(n_grid) + 0.5) * h
    gd = basis.gdot_r(mids)
    C = basis.tail_gram(mids)
    a = np.linalg.solve(C, gd[..., None])[..., 0]  # C(s)^{-1} gdot(s)
    gm = basis.g_r(mids)
    return basis, h, nodes, mids, a, gm


def _d_process(basis: _Basis, u: np.ndarray, mids: np.ndarray, gm: np.ndarray) -> np.ndarray:
    """``int_s^1 gdot dJ`` at each midpoint for one sample of U values."""
    n = u.size
    us = np.sort(np.clip(u, 1e-15, 1 - 1e-15))
    gd = basis.gdot_r(us)
    suffix = np.vstack([np.cumsum(gd[::-1], axis=0)[::-1], np.zeros((1, basis.dim))])
    idx = np.searchsorted(us, mids, side="right")
    return suffix[idx] / math.sqrt(n) - math.sqrt(n) * (basis.g_one() - gm)


def _j_process(u: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    n = u.size
    counts = np.searchsorted(np.sort(u), nodes, side="right")
    return (counts - n * nodes) / math.sqrt(n)


def transformed_process(u_list, laws: tuple, n_grid: int = 500, r_max: float = 0.99) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and ``W(r)`` for ``J = sum_k J_k / sqrt(len(u_list))``."""
    basis, h, nodes, mids, a, gm = _grid(laws, n_grid, r_max)
    scale = 1 / math.sqrt(len(u_list))
    J = scale * sum(_j_process(u, nodes) for u in u_list)
    D = scale * sum(_d_process(basis, u, mids, gm) for u in u_list)
    comp = h * np.einsum("ij,ij->i", a, D)
    W = J - np.concatenate([[0.0], np.cumsum(comp)])
    return nodes, W


def pit(data, fitted: "models.FittedModel", null: DistributionSpec) -> tuple[np.ndarray, np.ndarray]:
    """Conditional probability integral transforms ``(U_1t, U_2t)``."""
    if null.d != 2 or fitted.spec.d != 2:
        raise DomainError("Bai-Chen tests are defined for d = 2 only")
    y = np.asarray(data, dtype=float)
    mu, C = models.conditional_moments(fitted, y)
    y = y[fitted.spec.n_lost :]
    s1 = np.sqrt(C[:, 0, 0])
    x1 = (y[:, 0] - mu[:, 0]) / s1
    mu21 = mu[:, 1] + C[:, 1, 0] / C[:, 0, 0] * (y[:, 0] - mu[:, 0])
    s21 = np.sqrt(C[:, 1, 1] - C[:, 0, 1] ** 2 / C[:, 0, 0])
    x2 = (y[:, 1] - mu21) / s21
    if null.kind == "normal":
        return stats.norm.cdf(x1), stats.norm.cdf(x2)
    if null.kind == "t":
        nu = null.nu
        a1 = (nu - 2) / nu
        a2 = (nu - 2 + x1**2) / (nu + 1)
        return stats.t.cdf(x1 / math.sqrt(a1), nu), stats.t.cdf(x2 / np.sqrt(a2), nu + 1)
    raise ParameterError("Bai-Chen tests support normal and Student t nulls only")


def sup_bm_cdf(c) -> np.ndarray:
    """``P(sup_{[0,1]} |B| <= c)`` for standard Brownian motion B."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    k = np.arange(200)
    out = np.zeros_like(c)
    pos = c > 0
    cc = c[pos][:, None]
    terms = (-1.0) ** k / (2 * k + 1) * np.exp(-(math.pi**2) * (2 * k + 1) ** 2 / (8 * cc**2))
    out[pos] = np.clip(4 / math.pi * terms.sum(axis=1), 0.0, 1.0)
    return out


def _sum_sf(c: float, n: int = 4000) -> float:
    """``P(S1 + S2 > c)`` for two independent copies of sup|B|."""
    if c <= 0:
        return 1.0
    x = np.linspace(0.0, c, n + 1)
    F = sup_bm_cdf(x)
    mid = 0.5 * (x[:-1] + x[1:])
    return float(1.0 - np.sum(sup_bm_cdf(c - mid) * np.diff(F)))


def bai_chen_tests(
    data,
    fitted: "models.FittedModel",
    null: DistributionSpec,
    *,
    n_grid: int = 500,
    r_max: float = 0.99,
) -> tuple[BaselineResult, BaselineResult, BaselineResult]:
    """The three Bai-Chen statistics for a bivariate model.

    ``T1 = max(sup|W_1|, sup|W_2|)``, ``T2 = sup|W_1| + sup|W_2|`` and
    ``T3 = sup|W_3|`` where ``W_3`` transforms ``(J_1 + J_2)/sqrt(2)``.
    Decisions use the tabulated critical values; the p-values come from
    the limiting Brownian-motion laws.
    """
    u1, u2 = pit(data, fitted, null)
    if null.kind == "normal":
        l1 = l2 = l3 = (("normal", None),)
    else:
        nu = null.nu
        l1 = (("t", nu),)
        l2 = (("t", nu + 1),)
        l3 = (("t", nu), ("t", nu + 1))
    _, w1 = transformed_process([u1], l1, n_grid, r_max)
    _, w2 = transformed_process([u2], l2, n_grid, r_max)
    _, w3 = transformed_process([u1, u2], l3, n_grid, r_max)
    s1, s2, s3 = (float(np.max(np.abs(w))) for w in (w1, w2, w3))
    t1, t2, t3 = max(s1, s2), s1 + s2, s3
    p1 = float(1 - sup_bm_cdf(t1)[0] ** 2)
    p2 = _sum_sf(t2)
    p3 = float(1 - sup_bm_cdf(t3)[0])
    common = {"null": null.to_string(), "n_grid": n_grid, "r_max": r_max}
    return (
        BaselineResult("bc1", t1, p1, "tabulated", common, critical_values(1)),
        BaselineResult("bc2", t2, p2, "tabulated", common, critical_values(2)),
        BaselineResult("bc3", t3, p3, "tabulated", common, critical_values(3)),
    )
