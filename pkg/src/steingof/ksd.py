"""KSD U-statistic, bandwidth rule and the residual-based test driver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy.spatial.distance import pdist

from .distributions import DistributionSpec, score
from .errors import DegenerateSampleError, DomainError, ParameterError, ScoreUnavailableError
from .stein_kernel import ustat_sum

if TYPE_CHECKING:
    from .bootstrap import BootstrapConfig
    from .models import ModelSpec


@dataclass(frozen=True)
class KsdConfig:
    """How the subsample size and the bandwidth are chosen.

    Parameters
    ----------
    n0_rule : {"all", "ratio", "power", "fixed"}
        ``all`` uses every residual. ``ratio`` uses ``floor(n0_ratio * n)``.
        ``power`` uses ``floor(K0 * n**(1 - eps))``. ``fixed`` uses `n0`.
    sigma : float, optional
        Fixed bandwidth. ``None`` selects the median rule.
    """

    n0_rule: str = "all"
    n0: int | None = None
    n0_ratio: float | None = None
    K0: float | None = None
    eps: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        rule = self.n0_rule
        if rule == "fixed":
            if self.n0 is None or int(self.n0) != self.n0 or self.n0 < 2:
                raise ParameterError("fixed n0 must be an integer >= 2")
        elif rule == "ratio":
            if self.n0_ratio is None or not 0 < self.n0_ratio <= 1:
                raise ParameterError("n0 ratio must lie in (0, 1]")
        elif rule == "power":
            if self.K0 is None or self.eps is None or self.K0 <= 0 or self.eps <= 0:
                raise ParameterError("power rule needs K0 > 0 and eps > 0")
        elif rule != "all":
            raise ParameterError(f"unknown n0 rule {rule!r}")
        if self.sigma is not None and not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ParameterError("fixed sigma must be finite and positive")

    def resolve_n0(self, n: int) -> int:
        if self.n0_rule == "all":
            n0 = n
        elif self.n0_rule == "fixed":
            n0 = int(self.n0)
        elif self.n0_rule == "ratio":
            # small slack so that e.g. 0.9 * 100 is not floored to 89
            n0 = int(math.floor(self.n0_ratio * n + 1e-9))
        else:
            n0 = int(math.floor(self.K0 * n ** (1.0 - self.eps) + 1e-9))
        if not 2 <= n0 <= n:
            raise ParameterError(f"resolved n0={n0} must satisfy 2 <= n0 <= n={n}")
        return n0

    def to_string(self) -> tuple[str, str]:
        if self.n0_rule == "all":
            n0 = "all"
        elif self.n0_rule == "fixed":
            n0 = f"fixed:{self.n0}"
        elif self.n0_rule == "ratio":
            n0 = f"ratio:{self.n0_ratio:g}"
        else:
            n0 = f"power:{self.K0:g},{self.eps:g}"
        return n0, ("median" if self.sigma is None else f"fixed:{self.sigma:g}")

    @classmethod
    def from_strings(cls, n0: str = "all", sigma: str = "median") -> "KsdConfig":
        """Build from CLI-style strings such as ``ratio:0.9`` and ``fixed:1.5``."""
        kw: dict = {}
        head, _, rest = n0.partition(":")
        try:
            if head == "all" and not rest:
                kw["n0_rule"] = "all"
            elif head == "fixed":
                kw.update(n0_rule="fixed", n0=int(rest))
            elif head == "ratio":
                kw.update(n0_rule="ratio", n0_ratio=float(rest))
            elif head == "power":
                k0, e = rest.split(",")
                kw.update(n0_rule="power", K0=float(k0), eps=float(e))
            else:
                raise ParameterError(f"bad n0 rule {n0!r}; use all, ratio:R, fixed:N or power:K0,EPS")
            sh, _, srest = sigma.partition(":")
            if sh == "median" and not srest:
                pass
            elif sh == "fixed":
                kw["sigma"] = float(srest)
            else:
                raise ParameterError(f"bad sigma rule {sigma!r}; use median or fixed:S")
        except ValueError as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"cannot parse KSD options: {exc}") from exc
        return cls(**kw)


@dataclass
class TestResult:
    """Outcome of a KSD test.

    ``statistic`` is ``n0 * S_hat``. ``p_value`` is ``None`` when no
    bootstrap was run.
    """

    __test__ = False  # not a pytest class

    statistic: float
    n0: int
    sigma: float
    null_spec: DistributionSpec
    bootstrap_stats: np.ndarray = field(default_factory=lambda: np.empty(0))
    p_value: float | None = None
    failed_replicates: int = 0

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n0": self.n0,
            "sigma": self.sigma,
            "m": int(self.bootstrap_stats.size),
            "failed_replicates": self.failed_replicates,
            "null": self.null_spec.to_string(),
            "null_spec": self.null_spec.to_dict(),
        }


def _median(c: np.ndarray) -> float:
    """Exact median; brackets the centre with a subsample, then selects inside the bracket.

    Equal to ``np.median`` but avoids a full partition of the O(n^2) array.
    """
    m = c.size
    if m < 50_000:
        return float(np.median(c))
    k_lo, k_hi = (m - 1) // 2, m // 2
    s = np.sort(c[:: max(1, m // 20_000)])
    lo = s[int(0.48 * s.size)]
    hi = s[int(0.52 * s.size)]
    below = int(np.count_nonzero(c < lo))
    buf = c[(c >= lo) & (c <= hi)]
    if below <= k_lo and below + buf.size > k_hi:
        buf.partition([k_lo - below, k_hi - below])
        return float(0.5 * (buf[k_lo - below] + buf[k_hi - below]))
    return float(np.median(c))


def median_bandwidth(residuals) -> float:
    """Median of the squared pairwise distances ``|x_i - x_j|^2``, ``i < j``.

    The median of the squared distances is used as sigma itself (not as
    sigma squared). For an even number of pairs the two central order
    statistics are averaged.

    Examples
    --------
    >>> median_bandwidth([[0, 0], [1, 0], [0, 2]])
    4.0
    """
    x = np.asarray(residuals, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DegenerateSampleError("the median bandwidth needs at least two rows")
    if not np.all(np.isfinite(x)):
        raise DomainError("residuals must be finite")
    chi = pdist(x, "sqeuclidean")
    sigma = _median(chi)
    if not sigma > 0:
        if not np.any(chi > 0):
            raise DegenerateSampleError("all pairwise distances are zero")
        raise DegenerateSampleError("median pairwise distance is zero; set a fixed bandwidth")
    return sigma


def ksd_statistic(residuals, null_spec: DistributionSpec, cfg: KsdConfig | None = None) -> tuple[float, int, float]:
    """Subsampled KSD U-statistic.

    Parameters
    ----------
    residuals : array_like, shape (n, d)
    null_spec : DistributionSpec
    cfg : KsdConfig, optional

    Returns
    -------
    S_hat : float
        Average of ``u`` over pairs of the last `n0` rows.
    n0 : int
    sigma : float
        The bandwidth used, from all `n` rows under the median rule.
    """
    cfg = cfg or KsdConfig()
    x = np.asarray(residuals, dtype=float)
    if x.ndim != 2 or x.shape[1] != null_spec.d:
        raise DomainError(f"residuals must be (n, {null_spec.d}), got shape {x.shape}")
    if not null_spec.has_score:
        raise ScoreUnavailableError(f"null law {null_spec} has no score")
    n = x.shape[0]
    if n < 2:
        raise DegenerateSampleError("need at least two residuals")
    n0 = cfg.resolve_n0(n)
    sigma = cfg.sigma if cfg.sigma is not None else median_bandwidth(x)
    sub = x[n - n0:]
    total = ustat_sum(sub, score(null_spec, sub), sigma)
    return 2.0 * total / (n0 * (n0 - 1)), n0, sigma


def test_statistic(residuals, null_spec: DistributionSpec, cfg: KsdConfig | None = None) -> float:
    """``n0 * S_hat``, the quantity compared against bootstrap replicates."""
    s_hat, n0, _ = ksd_statistic(residuals, null_spec, cfg)
    return n0 * s_hat


test_statistic.__test__ = False


def run_ksd_test(
    data,
    model: "ModelSpec",
    null_spec: DistributionSpec,
    cfg: KsdConfig | None = None,
    bootstrap_cfg: "BootstrapConfig | None" = None,
    *,
    fitted=None,
) -> TestResult:
    """Fit `model`, compute the KSD statistic on its residuals and bootstrap a p-value.

    Parameters
    ----------
    data : array_like, shape (n, d)
    model : ModelSpec
    null_spec : DistributionSpec
    cfg : KsdConfig, optional
    bootstrap_cfg : BootstrapConfig, optional
        ``None`` or ``m == 0`` skips the bootstrap.
    fitted : FittedModel, optional
        Reuse an existing fit of `data`.
    """
    from . import models
    from .bootstrap import KsdStatistic, parametric_bootstrap

    cfg = cfg or KsdConfig()
    y = np.asarray(data, dtype=float)
    fm = fitted if fitted is not None else models.fit(model, y)
    resid = models.residuals(fm, y)
    s_hat, n0, sigma = ksd_statistic(resid, null_spec, cfg)
    stat = n0 * s_hat
    result = TestResult(statistic=stat, n0=n0, sigma=sigma, null_spec=null_spec)
    if bootstrap_cfg is not None and bootstrap_cfg.m > 0:
        boot = parametric_bootstrap(
            fm, null_spec, KsdStatistic(null_spec, cfg), stat, bootstrap_cfg, y.shape[0]
        )
        result.p_value = boot.p_value
        result.bootstrap_stats = boot.stats
        result.failed_replicates = boot.failed
    return result
