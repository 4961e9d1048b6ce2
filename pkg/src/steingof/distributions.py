"""Standardized error laws: samplers, log-densities and Stein scores.

Every law here has mean zero and identity covariance. Four families are
supported:

``normal``
    N_d(0, I).
``t``
    Multivariate Student t with ``nu > 2`` degrees of freedom, scaled so the
    covariance is the identity.
``sn``
    Multivariate skew-normal indexed by a vector of marginal skewness
    coefficients ``gamma``; location, scale and shape are derived so that the
    mean is zero and the covariance is the identity.
``st``
    Bauwens-Laurent multivariate skew-t with asymmetry vector ``xi``,
    re-standardized to mean zero and identity covariance. Sampler only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import optimize, special
from scipy.stats import norm

from .errors import DomainError, ParameterError, ScoreUnavailableError, SingularMatrixError

Kind = Literal["normal", "t", "sn", "st"]
KINDS: tuple[str, ...] = ("normal", "t", "sn", "st")

_LOG_2PI = math.log(2.0 * math.pi)

#: supremum of |gamma_j| for a univariate skew-normal (|delta| -> 1)
SKEWNESS_BOUND = 0.5 * (4.0 - math.pi) * (2.0 / (math.pi - 2.0)) ** 1.5


@dataclass(frozen=True)
class SkewNormalParams:
    """Direct parameters of the standardized skew-normal law.

    Attributes
    ----------
    xi_loc : ndarray, shape (d,)
        Location vector.
    Omega : ndarray, shape (d, d)
        Scale matrix ``I + xi xi^T``.
    alpha : ndarray, shape (d,)
        Shape vector.
    Sigma_z : ndarray, shape (d, d)
        Diagonal matrix of ``sigma_z``; equals the inverse of the scale
        standard deviations of ``Omega``.
    mu_z : ndarray, shape (d,)
    delta : ndarray, shape (d,)
    Omega_bar : ndarray, shape (d, d)
        Correlation matrix associated with ``Omega``.
    """

    xi_loc: np.ndarray
    Omega: np.ndarray
    alpha: np.ndarray
    Sigma_z: np.ndarray
    mu_z: np.ndarray
    delta: np.ndarray
    Omega_bar: np.ndarray


def skew_normal_params(gamma) -> SkewNormalParams:
    """Map a skewness vector to standardized skew-normal parameters.

    Parameters
    ----------
    gamma : array_like, shape (d,)
        Target marginal skewness of each coordinate.

    Returns
    -------
    SkewNormalParams

    Raises
    ------
    ParameterError
        If a component is outside the attainable skewness range or the
        implied shape vector does not exist.

    Notes
    -----
    With ``c_j = (2 gamma_j / (4 - pi))^(1/3)``, ``mu_z = c / sqrt(1 + c^2)``
    and ``sigma_z = sqrt(1 - mu_z^2)`` one sets ``xi = -Sigma_z^{-1} mu_z``,
    ``Omega = I + xi xi^T`` and ``delta = sqrt(pi/2) mu_z``. The shape vector
    uses the correlation matrix ``Sigma_z Omega Sigma_z``; this is the
    choice that makes the covariance exactly the identity.
    """
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if g.ndim != 1 or g.size == 0:
        raise ParameterError("gamma must be a non-empty vector")
    if not np.all(np.isfinite(g)):
        raise ParameterError("gamma must be finite")
    bad = np.flatnonzero(np.abs(g) >= SKEWNESS_BOUND)
    if bad.size:
        j = int(bad[0])
        raise ParameterError(
            f"gamma[{j}]={g[j]:g} is infeasible; |gamma_j| must be below {SKEWNESS_BOUND:.5f}"
        )
    c = np.cbrt(2.0 * g / (4.0 - math.pi))
    mu_z = c / np.sqrt(1.0 + c * c)
    sigma_z = np.sqrt(1.0 - mu_z * mu_z)
    xi_loc = -mu_z / sigma_z
    omega = np.eye(g.size) + np.outer(xi_loc, xi_loc)
    delta = math.sqrt(math.pi / 2.0) * mu_z
    omega_bar = np.diag(sigma_z) @ omega @ np.diag(sigma_z)
    sol = np.linalg.solve(omega_bar, delta)
    q = float(delta @ sol)
    if not q < 1.0:
        raise ParameterError(f"gamma={g.tolist()} gives delta' Omega_bar^-1 delta={q:g} >= 1")
    alpha = sol / math.sqrt(1.0 - q)
    return SkewNormalParams(
        xi_loc=xi_loc,
        Omega=omega,
        alpha=alpha,
        Sigma_z=np.diag(sigma_z),
        mu_z=mu_z,
        delta=delta,
        Omega_bar=omega_bar,
    )


def _as_tuple(v) -> tuple[float, ...] | None:
    if v is None:
        return None
    return tuple(float(x) for x in np.atleast_1d(np.asarray(v, dtype=float)))


@dataclass(frozen=True)
class DistributionSpec:
    """A standardized d-variate error law.

    Parameters
    ----------
    kind : {"normal", "t", "sn", "st"}
    d : int
        Dimension.
    nu : float, optional
        Degrees of freedom, required for ``t`` and ``st``.
    gamma : tuple of float, optional
        Skewness vector, required for ``sn``.
    xi_asym : tuple of float, optional
        Positive asymmetry vector, required for ``st``.
    """

    kind: Kind
    d: int
    nu: float | None = None
    gamma: tuple[float, ...] | None = None
    xi_asym: tuple[float, ...] | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown distribution kind {self.kind!r}; choose from {KINDS}")
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "gamma", _as_tuple(self.gamma))
        object.__setattr__(self, "xi_asym", _as_tuple(self.xi_asym))
        if self.kind in ("t", "st"):
            if self.nu is None or not math.isfinite(self.nu) or self.nu <= 2:
                raise ParameterError(f"nu must be finite and > 2, got {self.nu!r}")
            object.__setattr__(self, "nu", float(self.nu))
        elif self.nu is not None:
            raise ParameterError(f"nu is not a parameter of {self.kind!r}")
        if self.kind == "sn":
            if self.gamma is None or len(self.gamma) != self.d:
                raise ParameterError(f"sn needs a gamma vector of length d={self.d}")
            skew_normal_params(self.gamma)  # validates
        elif self.gamma is not None:
            raise ParameterError(f"gamma is not a parameter of {self.kind!r}")
        if self.kind == "st":
            if self.xi_asym is None or len(self.xi_asym) != self.d:
                raise ParameterError(f"st needs an xi vector of length d={self.d}")
            if not all(x > 0 and math.isfinite(x) for x in self.xi_asym):
                raise ParameterError("st asymmetry parameters must be positive and finite")
        elif self.xi_asym is not None:
            raise ParameterError(f"xi is not a parameter of {self.kind!r}")

    # -- constructors ---------------------------------------------------
    @classmethod
    def normal(cls, d: int) -> "DistributionSpec":
        return cls("normal", d)

    @classmethod
    def student_t(cls, d: int, nu: float) -> "DistributionSpec":
        return cls("t", d, nu=nu)

    @classmethod
    def skew_normal(cls, gamma) -> "DistributionSpec":
        g = _as_tuple(gamma)
        return cls("sn", len(g), gamma=g)

    @classmethod
    def skew_t(cls, nu: float, xi) -> "DistributionSpec":
        x = _as_tuple(xi)
        return cls("st", len(x), nu=nu, xi_asym=x)

    @cached_property
    def sn_params(self) -> SkewNormalParams:
        if self.kind != "sn":
            raise ParameterError("sn_params only exists for the skew-normal law")
        return skew_normal_params(self.gamma)

    @property
    def has_score(self) -> bool:
        return self.kind != "st"

    def to_string(self) -> str:
        """Compact text form accepted by :func:`parse_spec`."""
        if self.kind == "normal":
            return "normal"
        if self.kind == "t":
            return f"t:{self.nu:g}"
        if self.kind == "sn":
            return "sn:" + ",".join(f"{g:g}" for g in self.gamma)
        return f"st:{self.nu:g}:" + ",".join(f"{x:g}" for x in self.xi_asym)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "d": self.d}
        if self.nu is not None:
            out["nu"] = self.nu
        if self.gamma is not None:
            out["gamma"] = list(self.gamma)
        if self.xi_asym is not None:
            out["xi"] = list(self.xi_asym)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "DistributionSpec":
        return cls(obj["kind"], obj["d"], nu=obj.get("nu"), gamma=obj.get("gamma"), xi_asym=obj.get("xi"))

    def __str__(self) -> str:
        return self.to_string()


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ParameterError(f"cannot parse number list {text!r}") from exc


def parse_spec(text: str, d: int | None = None) -> DistributionSpec:
    """Parse a compact law description.

    Accepted forms are ``normal``, ``t:NU``, ``sn:G1,...,Gd`` and
    ``st:NU:XI1,...,XId``. For ``normal`` and ``t`` the dimension must be
    passed as `d`; for the skewed laws it is inferred and checked against
    `d` when given.

    Examples
    --------
    >>> parse_spec("t:8", d=3).nu
    8.0
    >>> parse_spec("sn:-0.181,-0.023,0").d
    3
    """
    parts = text.strip().lower().split(":")
    head = parts[0]
    try:
        if head in ("normal", "n", "gauss", "gaussian"):
            if len(parts) != 1:
                raise ParameterError(f"'normal' takes no parameters: {text!r}")
            if d is None:
                raise ParameterError("dimension d is required for the normal law")
            return DistributionSpec.normal(d)
        if head in ("t", "student", "studentt"):
            if len(parts) != 2:
                raise ParameterError(f"expected t:NU, got {text!r}")
            if d is None:
                raise ParameterError("dimension d is required for the t law")
            return DistributionSpec.student_t(d, float(parts[1]))
        if head in ("sn", "skewnormal"):
            if len(parts) != 2:
                raise ParameterError(f"expected sn:G1,...,Gd, got {text!r}")
            spec = DistributionSpec.skew_normal(_floats(parts[1]))
        elif head in ("st", "skewt"):
            if len(parts) != 3:
                raise ParameterError(f"expected st:NU:XI1,...,XId, got {text!r}")
            spec = DistributionSpec.skew_t(float(parts[1]), _floats(parts[2]))
        else:
            raise ParameterError(f"unknown law {head!r}; use normal, t:NU, sn:G,... or st:NU:XI,...")
    except ValueError as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"cannot parse law {text!r}: {exc}") from exc
    if d is not None and spec.d != d:
        raise ParameterError(f"law {text!r} has dimension {spec.d}, data has {d}")
    return spec


def _check_points(spec: DistributionSpec, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr2 = np.atleast_2d(arr)
    if arr2.ndim != 2 or arr2.shape[1] != spec.d:
        raise DomainError(f"expected points of dimension {spec.d}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr2)):
        raise DomainError("points must be finite")
    return arr2, single


def _mills(z: np.ndarray) -> np.ndarray:
    # phi(z)/Phi(z) in log space; stable far into the left tail
    return np.exp(norm.logpdf(z) - special.log_ndtr(z))


def score(spec: DistributionSpec, x) -> np.ndarray:
    """Stein score ``grad_x log p(x)``.

    Parameters
    ----------
    spec : DistributionSpec
    x : array_like, shape (d,) or (n, d)

    Returns
    -------
    ndarray
        Same shape as `x`.

    Raises
    ------
    ScoreUnavailableError
        For the skew-t law.
    DomainError
        On non-finite input or a dimension mismatch.
    """
    if spec.kind == "st":
        raise ScoreUnavailableError("the skew-t law is sampler-only; no closed-form score is provided")
    arr, single = _check_points(spec, x)
    if spec.kind == "normal":
        out = -arr
    elif spec.kind == "t":
        nu = spec.nu
        q = np.einsum("ij,ij->i", arr, arr)
        out = -((nu + spec.d) / (nu - 2.0 + q))[:, None] * arr
    else:
        p = spec.sn_params
        cen = arr - p.xi_loc
        lin = p.Sigma_z @ p.alpha
        out = -np.linalg.solve(p.Omega, cen.T).T + _mills(cen @ lin)[:, None] * lin
    return out[0] if single else out


def log_density(spec: DistributionSpec, x) -> np.ndarray | float:
    """Log-density of the standardized law at `x` (one point or rows)."""
    if spec.kind == "st":
        raise ScoreUnavailableError("the skew-t law is sampler-only; no log-density is provided")
    arr, single = _check_points(spec, x)
    d = spec.d
    if spec.kind == "normal":
        out = -0.5 * d * _LOG_2PI - 0.5 * np.einsum("ij,ij->i", arr, arr)
    elif spec.kind == "t":
        nu = spec.nu
        q = np.einsum("ij,ij->i", arr, arr)
        const = (
            special.gammaln(0.5 * (nu + d))
            - special.gammaln(0.5 * nu)
            - 0.5 * d * math.log((nu - 2.0) * math.pi)
        )
        out = const - 0.5 * (nu + d) * np.log1p(q / (nu - 2.0))
    else:
        p = spec.sn_params
        try:
            chol = np.linalg.cholesky(p.Omega)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("skew-normal scale matrix is not positive definite") from exc
        cen = arr - p.xi_loc
        w = np.linalg.solve(chol, cen.T)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out = (
            math.log(2.0)
            - 0.5 * d * _LOG_2PI
            - 0.5 * logdet
            - 0.5 * np.sum(w * w, axis=0)
            + special.log_ndtr(cen @ (p.Sigma_z @ p.alpha))
        )
    return float(out[0]) if single else out


def _abs_t_mean(nu: float) -> float:
    """E|w| for a unit-variance Student t with `nu` degrees of freedom."""
    return math.sqrt(nu - 2.0) * math.exp(
        special.gammaln(0.5 * (nu - 1.0)) - special.gammaln(0.5 * nu)
    ) / math.sqrt(math.pi)


def skew_t_moments(nu: float, xi) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the raw (unstandardized) Bauwens-Laurent skew-t.

    The raw law skews each coordinate of a unit-covariance multivariate t
    by ``xi_i`` on the positive half and ``1/xi_i`` on the negative half.
    """
    x = np.asarray(xi, dtype=float)
    a = x - 1.0 / x
    m1 = _abs_t_mean(nu)
    mean = a * m1
    cov = np.outer(a, a) * (2.0 / math.pi - m1 * m1)
    np.fill_diagonal(cov, x * x + 1.0 / (x * x) - 1.0 - mean * mean)
    return mean, cov


def _skew_t_standardizer(spec: DistributionSpec) -> tuple[np.ndarray, np.ndarray]:
    cached = spec._cache.get("st")
    if cached is None:
        mean, cov = skew_t_moments(spec.nu, spec.xi_asym)
        vals, vecs = np.linalg.eigh(cov)
        inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
        cached = (mean, inv_sqrt)
        spec._cache["st"] = cached
    return cached


def sample(spec: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `n` i.i.d. rows from the law.

    Parameters
    ----------
    spec : DistributionSpec
    n : int
        Number of rows, at least 1.
    rng : numpy.random.Generator

    Returns
    -------
    ndarray, shape (n, d)
    """
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    d = spec.d
    if spec.kind == "normal":
        return rng.standard_normal((n, d))
    if spec.kind == "t":
        return _std_t(rng, n, d, spec.nu)
    if spec.kind == "sn":
        p = spec.sn_params
        cov_u = p.Omega_bar - np.outer(p.delta, p.delta)
        vals, vecs = np.linalg.eigh(cov_u)
        root = vecs * np.sqrt(np.clip(vals, 0.0, None))
        u0 = np.abs(rng.standard_normal(n))
        u = rng.standard_normal((n, d)) @ root.T
        z = u0[:, None] * p.delta + u
        return p.xi_loc + z / np.diag(p.Sigma_z)
    # skew-t
    xi = np.asarray(spec.xi_asym)
    w = np.abs(_std_t(rng, n, d, spec.nu))
    up = rng.random((n, d)) < (xi * xi) / (1.0 + xi * xi)
    y = np.where(up, w * xi, -w / xi)
    mean, inv_sqrt = _skew_t_standardizer(spec)
    return (y - mean) @ inv_sqrt


def _std_t(rng: np.random.Generator, n: int, d: int, nu: float) -> np.ndarray:
    z = rng.standard_normal((n, d))
    v = rng.chisquare(nu, n)
    return z * np.sqrt((nu - 2.0) / v)[:, None]


def fit_distribution(kind: Kind, residuals, *, nu_bounds=(2.05, 200.0)) -> DistributionSpec:
    """Maximum-likelihood fit of a standardized law to residuals.

    For ``t`` the degrees of freedom are estimated by a bounded scalar
    search; for ``sn`` the skewness vector is estimated with L-BFGS-B inside
    the feasible box. ``normal`` has no free parameter.
    """
    x = np.asarray(residuals, dtype=float)
    if x.ndim != 2:
        raise DomainError("residuals must be an (n, d) matrix")
    d = x.shape[1]
    if kind == "normal":
        return DistributionSpec.normal(d)
    if kind == "t":
        def nll_nu(nu):
            return -float(np.sum(log_density(DistributionSpec.student_t(d, nu), x)))

        res = optimize.minimize_scalar(nll_nu, bounds=nu_bounds, method="bounded", options={"xatol": 1e-4})
        return DistributionSpec.student_t(d, float(res.x))
    if kind == "sn":
        # search over c = (2 gamma / (4 - pi))^(1/3); gamma itself has an infinite slope at 0
        k = (4.0 - math.pi) / 2.0
        lim = np.cbrt((SKEWNESS_BOUND - 1e-3) / k)

        def nll_c(c):
            try:
                return -float(np.mean(log_density(DistributionSpec.skew_normal(k * c**3), x)))
            except ParameterError:
                return 1e10

        c0 = np.cbrt(np.clip(np.mean(x**3, axis=0), -0.5, 0.5) / k)
        res = optimize.minimize(nll_c, c0, method="L-BFGS-B", bounds=[(-lim, lim)] * d)
        return DistributionSpec.skew_normal(k * res.x**3)
    raise ParameterError(f"cannot fit law kind {kind!r}")
