"""CCC-GARCH(1,1): variance filter, Gaussian QMLE and simulation kernels.

The variance recursion is::

    h_t = W + B e_{t-1}^2 + Gamma h_{t-1},   C_t = D_t R D_t,   D_t = diag(sqrt(h_t))

started from ``e_{-1} = 0`` and ``h_{-1}`` equal to the sample variance of
the series being filtered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import optimize

from ..errors import FitError, NumericError

_BIG = 1e10


@numba.njit(cache=True)
def _filter(W, B, G, e, h0):
    n, d = e.shape
    h = np.empty((n, d))
    prev_h = h0.copy()
    prev_e2 = np.zeros(d)
    for t in range(n):
        for i in range(d):
            acc = W[i]
            for j in range(d):
                acc += B[i, j] * prev_e2[j] + G[i, j] * prev_h[j]
            h[t, i] = acc
        for i in range(d):
            prev_h[i] = h[t, i]
            prev_e2[i] = e[t, i] * e[t, i]
    return h


@numba.njit(cache=True)
def _nll_grad(W, B, G, Rinv, e, h0):
    """Negative Gaussian quasi log-likelihood without the log det R term.

    Returns ``(value, gW, gB, gG, S, ok)`` where ``S = sum_t z_t z_t'`` is
    needed for the gradient with respect to R.
    """
    n, d = e.shape
    h = _filter(W, B, G, e, h0)
    val = 0.0
    g = np.empty((n, d))
    S = np.zeros((d, d))
    z = np.empty(d)
    for t in range(n):
        for i in range(d):
            hi = h[t, i]
            if not (hi > 0.0) or not math.isfinite(hi):
                return _BIG, np.zeros(d), np.zeros((d, d)), np.zeros((d, d)), S, False
            z[i] = e[t, i] / math.sqrt(hi)
            val += 0.5 * math.log(hi)
        for i in range(d):
            rz = 0.0
            for j in range(d):
                rz += Rinv[i, j] * z[j]
            val += 0.5 * z[i] * rz
            g[t, i] = 0.5 * (1.0 - z[i] * rz) / h[t, i]
            for j in range(d):
                S[i, j] += z[i] * z[j]
    if not math.isfinite(val):
        return _BIG, np.zeros(d), np.zeros((d, d)), np.zeros((d, d)), S, False
    gW = np.zeros(d)
    gB = np.zeros((d, d))
    gG = np.zeros((d, d))
    lam = np.zeros(d)
    nxt = np.zeros(d)
    for t in range(n - 1, -1, -1):
        for i in range(d):
            acc = g[t, i]
            for k in range(d):
                acc += G[k, i] * nxt[k]
            lam[i] = acc
        for i in range(d):
            gW[i] += lam[i]
            for j in range(d):
                if t > 0:
                    gB[i, j] += lam[i] * e[t - 1, j] * e[t - 1, j]
                    gG[i, j] += lam[i] * h[t - 1, j]
                else:
                    gG[i, j] += lam[i] * h0[j]
        for i in range(d):
            nxt[i] = lam[i]
    return val, gW, gB, gG, S, True


@numba.njit(cache=True)
def _simulate(M, A, Csq, W, B, G, R, eta, y0, h_init, garch):
    """Run the recursion forward; returns (y, h, index of first non-finite step or -1)."""
    N, d = eta.shape
    p = A.shape[0]
    y = np.empty((N, d))
    h = np.empty((N, d))
    prev_h = h_init.copy()
    prev_e2 = np.zeros(d)
    root = Csq.copy()
    C = np.empty((d, d))
    for t in range(N):
        if garch:
            for i in range(d):
                acc = W[i]
                for j in range(d):
                    acc += B[i, j] * prev_e2[j] + G[i, j] * prev_h[j]
                h[t, i] = acc
            for i in range(d):
                for j in range(d):
                    C[i, j] = math.sqrt(h[t, i] * h[t, j]) * R[i, j]
            if not np.all(np.isfinite(C)):
                return y, h, t
            vals, vecs = np.linalg.eigh(C)
            for i in range(d):
                for j in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += vecs[i, k] * math.sqrt(max(vals[k], 0.0)) * vecs[j, k]
                    root[i, j] = acc
        for i in range(d):
            e = 0.0
            for j in range(d):
                e += root[i, j] * eta[t, j]
            m = M[i]
            for k in range(p):
                for j in range(d):
                    lag = y[t - k - 1, j] if t - k - 1 >= 0 else y0[j]
                    m += A[k, i, j] * lag
            y[t, i] = m + e
            if not math.isfinite(y[t, i]):
                return y, h, t
            prev_e2[i] = e * e
        for i in range(d):
            prev_h[i] = h[t, i]
    return y, h, -1


def filter_variances(W, B, Gamma, e, h0) -> np.ndarray:
    """Conditional variances ``h_t`` (n, d) for the error series `e`."""
    h = _filter(np.asarray(W, float), np.asarray(B, float), np.asarray(Gamma, float),
                np.ascontiguousarray(e, dtype=float), np.asarray(h0, float))
    bad = np.flatnonzero(~(np.isfinite(h).all(axis=1) & (h > 0).all(axis=1)))
    if bad.size:
        raise NumericError(f"conditional variance is not positive at t={int(bad[0])}", int(bad[0]))
    return h


# -- correlation parameterization ---------------------------------------------
def corr_from_params(a: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Correlation matrix from strictly-lower entries.

    Row i of the lower-triangular factor is ``(a_i0, ..., a_i,i-1, 1)``
    normalized to unit length, so ``R = L L'`` has a unit diagonal and is
    positive definite for any real `a`.

    Returns ``(R, L, norms)``.
    """
    U = np.eye(d)
    U[np.tril_indices(d, -1)] = a
    norms = np.linalg.norm(U, axis=1)
    L = U / norms[:, None]
    return L @ L.T, L, norms


def corr_to_params(R: np.ndarray) -> np.ndarray:
    L = np.linalg.cholesky(R)
    U = L / np.diag(L)[:, None]
    return U[np.tril_indices(R.shape[0], -1)]


def _corr_grad(GR: np.ndarray, L: np.ndarray, norms: np.ndarray) -> np.ndarray:
    d = L.shape[0]
    dL = 2.0 * GR @ L
    U = np.zeros((d, d))
    for i in range(1, d):
        li = L[i]
        gi = (dL[i] - li * (li @ dL[i])) / norms[i]
        U[i, :i] = gi[:i]
    return U[np.tril_indices(d, -1)]


# -- QMLE ---------------------------------------------------------------------
@dataclass
class QmleResult:
    W: np.ndarray
    B: np.ndarray
    Gamma: np.ndarray
    R: np.ndarray
    loglik: float
    converged: bool
    message: str
    nit: int
    trace: list


class _Objective:
    """Scaled QMLE objective over the packed vector ``(W, B[free], Gamma[free], a)``."""

    def __init__(self, e, h0, free_B, free_G):
        self.e = np.ascontiguousarray(e, dtype=float)
        self.h0 = np.asarray(h0, dtype=float)
        self.n, self.d = self.e.shape
        self.fB = free_B
        self.fG = free_G
        self.nB = int(free_B.sum())
        self.nG = int(free_G.sum())
        self.na = self.d * (self.d - 1) // 2

    def unpack(self, x):
        d = self.d
        W = x[:d]
        B = np.zeros((d, d))
        B[self.fB] = x[d : d + self.nB]
        G = np.zeros((d, d))
        G[self.fG] = x[d + self.nB : d + self.nB + self.nG]
        a = x[d + self.nB + self.nG :]
        return W, B, G, a

    def pack(self, W, B, G, R):
        return np.concatenate([W, B[self.fB], G[self.fG], corr_to_params(R)])

    def __call__(self, x):
        W, B, G, a = self.unpack(x)
        R, L, norms = corr_from_params(a, self.d)
        Linv = np.linalg.inv(L)
        Rinv = Linv.T @ Linv
        logdetR = 2.0 * np.sum(np.log(np.diag(L)))
        val, gW, gB, gG, S, ok = _nll_grad(W, B, G, Rinv, self.e, self.h0)
        if not ok:
            return _BIG, np.zeros_like(x)
        val += 0.5 * self.n * logdetR
        GR = 0.5 * (self.n * Rinv - Rinv @ S @ Rinv)
        ga = _corr_grad(GR, L, norms)
        grad = np.concatenate([gW, gB[self.fB], gG[self.fG], ga])
        return val / self.n, grad / self.n


def _bounds(obj: _Objective):
    d = obj.d
    return (
        [(1e-6, 1e3)] * d
        + [(0.0, 5.0)] * (obj.nB + obj.nG)
        + [(None, None)] * obj.na
    )


def _default_starts(obj: _Objective, R0: np.ndarray):
    d = obj.d
    eye = np.eye(d)
    starts = []
    for b, g in ((0.05, 0.90), (0.10, 0.80), (0.20, 0.50)):
        B = b * eye * obj.fB
        G = g * eye * obj.fG
        W = np.maximum(1.0 - B.sum(axis=1) - G.sum(axis=1), 0.05)
        starts.append(obj.pack(W, B, G, R0))
    return starts


def _proj_grad_norm(x, g, bounds) -> float:
    pg = g.copy()
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and x[i] <= lo + 1e-12 and g[i] > 0:
            pg[i] = 0.0
        if hi is not None and x[i] >= hi - 1e-12 and g[i] < 0:
            pg[i] = 0.0
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def fit_ccc_qmle(
    e: np.ndarray,
    free_B: np.ndarray,
    free_G: np.ndarray,
    start: tuple | None = None,
    *,
    maxiter: int = 500,
    gtol: float = 1e-6,
    accept_pgtol: float = 1e-3,
    record_trace: bool = False,
) -> QmleResult:
    """Gaussian QMLE of a zero-mean CCC-GARCH(1,1).

    The series is rescaled to unit sample variance before optimizing;
    estimates are mapped back afterwards. L-BFGS-B handles the box
    constraints ``W > 0`` and ``B, Gamma >= 0``. A supplied `start`
    ``(W, B, Gamma, R)`` is tried first; the default starts follow.

    Raises
    ------
    FitError
        If no start reaches a stationary point.
    """
    e = np.asarray(e, dtype=float)
    n, d = e.shape
    if n < 50:
        raise FitError(f"CCC-GARCH estimation needs n >= 50, got {n}")
    scale = np.sqrt(np.mean(e * e, axis=0) - np.mean(e, axis=0) ** 2)
    if np.any(~(scale > 0)):
        raise FitError("a component of the error series has zero variance")
    es = e / scale
    h0 = np.var(es, axis=0)
    obj = _Objective(es, h0, free_B, free_G)
    bounds = _bounds(obj)
    R0 = np.corrcoef(es.T) if d > 1 else np.ones((1, 1))
    starts = []
    if start is not None:
        W, B, G, R = (np.asarray(v, dtype=float) for v in start)
        ratio = (scale[None, :] ** 2) / (scale[:, None] ** 2)
        Ws = np.clip(W / scale**2, 2e-6, 1e3)
        Bs = np.clip(B * ratio, 0.0, 5.0) * free_B
        Gs = np.clip(G * ratio, 0.0, 5.0) * free_G
        starts.append(obj.pack(Ws, Bs, Gs, R))
    starts.extend(_default_starts(obj, R0))

    best = None
    for x0 in starts:
        trace: list = []
        cb = (lambda xk: trace.append(obj(xk)[0])) if record_trace else None
        res = optimize.minimize(
            obj, x0, jac=True, method="L-BFGS-B", bounds=bounds, callback=cb,
            options={"maxiter": maxiter, "gtol": gtol, "ftol": 1e-10, "maxcor": 20},
        )
        ok = bool(res.success)
        if not ok and res.fun < _BIG:
            ok = _proj_grad_norm(res.x, res.jac, bounds) < accept_pgtol
        cand = (ok, res, trace)
        if best is None or (ok and (not best[0] or res.fun < best[1].fun)):
            best = cand
        if ok:
            break
    ok, res, trace = best
    if not ok:
        raise FitError(f"CCC-GARCH QMLE did not converge: {res.message}")
    W, B, G, a = obj.unpack(res.x)
    R, _, _ = corr_from_params(a, d)
    ratio = (scale[:, None] ** 2) / (scale[None, :] ** 2)
    loglik = -n * res.fun - n * np.sum(np.log(scale)) - 0.5 * n * d * math.log(2 * math.pi)
    return QmleResult(
        W=W * scale**2,
        B=B * ratio,
        Gamma=G * ratio,
        R=0.5 * (R + R.T),
        loglik=float(loglik),
        converged=True,
        message=str(res.message),
        nit=int(res.nit),
        trace=trace,
    )
