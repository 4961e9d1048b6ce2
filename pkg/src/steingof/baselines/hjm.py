"""Henze-Jimenez-Gamero-Meintanis normality test on model residuals."""

from __future__ import annotations

import math

import numpy as np

from .. import models
from ..distributions import DistributionSpec
from ..errors import DomainError, ParameterError
from .result import BaselineResult


def hjm_statistic(residuals, gamma0: float = 1.5) -> float:
    """``sqrt(n) (pi/gamma0)^{d/2} [n^{-2} sum_jk e^{(|x_j|^2-|x_k|^2)/(4 gamma0)} cos(x_j'x_k/(2 gamma0)) - 1]``.

    The exponential factor is antisymmetric in (j, k) while the cosine is
    symmetric, so the double sum equals ``sum_jk cosh(a_j - a_k) cos(...)``
    which only exponentiates differences.
    """
    if not gamma0 > 0:
        raise ParameterError("gamma0 must be positive")
    x = np.asarray(residuals, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DomainError("residuals must be a non-empty (n, d) matrix")
    n, d = x.shape
    a = np.einsum("ij,ij->i", x, x) / (4 * gamma0)
    with np.errstate(over="ignore"):
        inner = np.sum(np.cosh(a[:, None] - a[None, :]) * np.cos((x @ x.T) / (2 * gamma0)))
    return float(math.sqrt(n) * (math.pi / gamma0) ** (d / 2) * (inner / n**2 - 1))


class HjmStatistic:
    """Picklable residual statistic for the bootstrap."""

    def __init__(self, gamma0: float = 1.5):
        self.gamma0 = gamma0

    def __call__(self, resid: np.ndarray) -> float:
        return hjm_statistic(resid, self.gamma0)


def hjm_test(
    data,
    model_spec: "models.ModelSpec | None" = None,
    gamma0: float = 1.5,
    bootstrap_cfg=None,
    *,
    fitted: "models.FittedModel | None" = None,
) -> BaselineResult:
    """HJM test of N(0, I) errors with a parametric-bootstrap p-value.

    Parameters
    ----------
    data : array_like (n, d)
        Observations; residuals are extracted from the fitted model.
    model_spec : ModelSpec, optional
        Defaults to the identity model (data are already residuals).
    gamma0 : float
    bootstrap_cfg : BootstrapConfig, optional
        Defaults to 199 replicates with seed 0.
    fitted : FittedModel, optional
        Reuse a fit of `data`.
    """
    from ..bootstrap import BootstrapConfig, parametric_bootstrap

    y = np.asarray(data, dtype=float)
    if y.ndim != 2:
        raise DomainError("data must be an (n, d) matrix")
    d = y.shape[1]
    spec = model_spec or models.ModelSpec("identity", d)
    fm = fitted if fitted is not None else models.fit(spec, y)
    stat = hjm_statistic(models.residuals(fm, y), gamma0)
    cfg = bootstrap_cfg or BootstrapConfig(m=199, seed=0)
    out = parametric_bootstrap(fm, DistributionSpec.normal(d), HjmStatistic(gamma0), stat, cfg, y.shape[0])
    return BaselineResult("hjm", stat, out.p_value, "bootstrap", {"gamma0": gamma0, "m": int(out.stats.size)})
