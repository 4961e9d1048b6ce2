"""Fitting, residual extraction and simulation for every model kind."""

from __future__ import annotations

import warnings

import numpy as np

from ..distributions import DistributionSpec, sample
from ..errors import DegenerateSampleError, DomainError, NumericError, SimulationError, SingularMatrixError
from .garch import _simulate, filter_variances, fit_ccc_qmle
from .linalg import inv_sqrt_pd, sqrt_pd
from .spec import FittedModel, ModelParams, ModelSpec
from .var import fit_var_lse, spectral_radius, var_mean

BURN_IN = 500


def _as_data(data, d: int | None = None) -> np.ndarray:
    y = np.asarray(data, dtype=float)
    if y.ndim != 2:
        raise DomainError(f"data must be an (n, d) matrix, got shape {y.shape}")
    if d is not None and y.shape[1] != d:
        raise DomainError(f"data has {y.shape[1]} columns, model expects {d}")
    if not np.all(np.isfinite(y)):
        raise DomainError("data contains non-finite values")
    return y


def fit(spec: ModelSpec, data, start: FittedModel | None = None, *, record_trace: bool = False) -> FittedModel:
    """Estimate the model on `data`.

    Parameters
    ----------
    spec : ModelSpec
    data : array_like, shape (n, d)
    start : FittedModel, optional
        Warm start for the QMLE (used by the bootstrap, which refits near
        the original estimate).
    record_trace : bool
        Keep the per-iteration QMLE objective in ``info["trace"]``.

    Returns
    -------
    FittedModel

    Notes
    -----
    ``const`` uses the sample mean and the sample covariance with divisor
    n. ``var`` uses equation-wise least squares; its covariance is the
    residual covariance with divisor ``n - p``. ``ccc`` is a Gaussian QMLE
    on the raw series, which is taken to have zero mean. ``var-ccc`` runs
    the least squares step first and the QMLE on its residuals.
    """
    y = _as_data(data, spec.d)
    n, d = y.shape
    if spec.kind == "identity":
        return FittedModel(spec, ModelParams())
    if spec.kind == "const":
        if n <= d:
            raise DegenerateSampleError(f"need n > d to estimate a covariance, got n={n}, d={d}")
        M = y.mean(axis=0)
        C = np.cov(y.T, bias=True).reshape(d, d)
        if np.linalg.eigvalsh(C).min() <= 1e-12 * max(1.0, np.trace(C)):
            raise SingularMatrixError("sample covariance is singular")
        return FittedModel(spec, ModelParams(M=M, C=C))
    info: dict = {}
    if spec.has_var:
        M, A, eps = fit_var_lse(y, spec.p, spec.free("M"), spec.free("A"))
    else:
        M, A, eps = None, None, y
    if spec.kind == "var":
        C = eps.T @ eps / eps.shape[0]
        if np.linalg.eigvalsh(C).min() <= 1e-12 * max(1.0, np.trace(C)):
            raise SingularMatrixError("VAR residual covariance is singular")
        return FittedModel(spec, ModelParams(M=M, A=A, C=C))
    warm = None
    if start is not None and start.spec.has_garch:
        sp = start.params
        warm = (sp.W, sp.B, sp.Gamma, sp.R)
    res = fit_ccc_qmle(eps, spec.free("B"), spec.free("Gamma"), warm, record_trace=record_trace)
    info.update(loglik=res.loglik, message=res.message, nit=res.nit)
    if record_trace:
        info["trace"] = res.trace
    params = ModelParams(M=M, A=A, W=res.W, B=res.B, Gamma=res.Gamma, R=res.R)
    return FittedModel(spec, params, info=info)


def _errors(fm: FittedModel, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Conditional means and mean-adjusted errors aligned with residual rows."""
    spec, par = fm.spec, fm.params
    if spec.has_var:
        if y.shape[0] <= spec.p:
            raise DegenerateSampleError(f"need more than p={spec.p} observations")
        mu = var_mean(y, par.M, par.A)
        return mu, y[spec.p :] - mu
    if spec.kind == "const":
        mu = np.broadcast_to(par.M, y.shape)
        return mu, y - par.M
    return np.zeros_like(y), y


def conditional_moments(fm: FittedModel, data) -> tuple[np.ndarray, np.ndarray]:
    """Conditional means (n', d) and covariances (n', d, d).

    ``n' = n - p`` because the first `p` rows only serve as lags.
    """
    y = _as_data(data, fm.spec.d)
    spec, par = fm.spec, fm.params
    mu, eps = _errors(fm, y)
    m = eps.shape[0]
    d = spec.d
    if spec.kind == "identity":
        C = np.broadcast_to(np.eye(d), (m, d, d))
    elif spec.kind in ("const", "var"):
        C = np.broadcast_to(par.C, (m, d, d))
    else:
        h = filter_variances(par.W, par.B, par.Gamma, eps, np.var(eps, axis=0))
        sd = np.sqrt(h)
        C = sd[:, :, None] * par.R[None] * sd[:, None, :]
    return np.asarray(mu), C


def residuals(fm: FittedModel, data) -> np.ndarray:
    """Standardized residuals ``C_t^{-1/2} (Y_t - M_t)`` using the symmetric root.

    Returns an ``(n - p, d)`` array; the first `p` observations of a VAR
    are conditioning values and have no residual.

    Raises
    ------
    NumericError
        If some ``C_t`` is not positive definite; carries the time index.
    """
    y = _as_data(data, fm.spec.d)
    spec, par = fm.spec, fm.params
    if spec.kind == "identity":
        return y.copy()
    mu, eps = _errors(fm, y)
    if spec.kind in ("const", "var"):
        return eps @ inv_sqrt_pd(par.C)
    _, C = conditional_moments(fm, y)
    try:
        root = inv_sqrt_pd(C)
    except SingularMatrixError:
        eig_min = np.linalg.eigvalsh(C).min(axis=1)
        t = int(np.flatnonzero(eig_min <= 1e-12)[0])
        raise NumericError(f"C_t is not positive definite at t={t + spec.p}", t + spec.p) from None
    return np.einsum("tij,tj->ti", root, eps)


def _unconditional(fm: FittedModel) -> tuple[np.ndarray, np.ndarray]:
    spec, par = fm.spec, fm.params
    d = spec.d
    y0 = np.zeros(d)
    if spec.has_var:
        lhs = np.eye(d) - par.A.sum(axis=0)
        try:
            y0 = np.linalg.solve(lhs, par.M)
        except np.linalg.LinAlgError:
            y0 = np.zeros(d)
    elif spec.kind == "const":
        y0 = np.asarray(par.M, dtype=float)
    h = np.ones(d)
    if spec.has_garch:
        try:
            h = np.linalg.solve(np.eye(d) - par.B - par.Gamma, par.W)
        except np.linalg.LinAlgError:
            h = np.asarray(par.W, dtype=float)
        if not np.all(h > 0):
            h = np.asarray(par.W, dtype=float)
    return y0, h


def check_stationarity(fm: FittedModel) -> None:
    """Warn when the mean or the variance recursion is not stable."""
    spec, par = fm.spec, fm.params
    if spec.has_var:
        rho = spectral_radius(par.A)
        if rho >= 1:
            warnings.warn(f"VAR companion spectral radius {rho:.4f} >= 1; simulated paths may explode", stacklevel=3)
    if spec.has_garch:
        rho = float(np.max(np.abs(np.linalg.eigvals(par.B + par.Gamma))))
        if rho >= 1:
            warnings.warn(f"GARCH persistence {rho:.4f} >= 1; variances have no finite fixed point", stacklevel=3)


def simulate(
    fm: FittedModel,
    n: int,
    error_spec: DistributionSpec,
    rng: np.random.Generator,
    *,
    burn_in: int = BURN_IN,
    check: bool = True,
) -> np.ndarray:
    """Generate `n` observations from the model driven by i.i.d. `error_spec` draws.

    The recursion starts at the unconditional mean and variance where they
    exist and the first `burn_in` values are discarded.

    Raises
    ------
    SimulationError
        If the path becomes non-finite.
    """
    spec, par = fm.spec, fm.params
    d = spec.d
    if error_spec.d != d:
        raise DomainError(f"error law has dimension {error_spec.d}, model has {d}")
    if n < 1:
        raise DomainError("n must be >= 1")
    if check:
        check_stationarity(fm)
    eta = sample(error_spec, burn_in + n, rng)
    if spec.kind == "identity":
        return eta[burn_in:]
    if spec.kind == "const":
        return par.M + eta[burn_in:] @ sqrt_pd(par.C)
    y0, h_init = _unconditional(fm)
    M = np.zeros(d) if par.M is None else np.asarray(par.M)
    A = np.zeros((0, d, d)) if par.A is None else np.ascontiguousarray(par.A)
    garch = spec.has_garch
    Csq = sqrt_pd(par.C) if spec.kind == "var" else np.eye(d)
    zeros = np.zeros((d, d))
    y, _, bad = _simulate(
        M, A, Csq,
        np.asarray(par.W) if garch else np.zeros(d),
        np.asarray(par.B) if garch else zeros,
        np.asarray(par.Gamma) if garch else zeros,
        np.asarray(par.R) if garch else np.eye(d),
        np.ascontiguousarray(eta), y0, h_init, garch,
    )
    if bad >= 0:
        raise SimulationError(f"simulated path became non-finite at step {bad - burn_in}")
    return y[burn_in:]
