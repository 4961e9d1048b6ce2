"""Parametric bootstrap p-values and warp-speed critical values.

A replicate draws i.i.d. errors from the null law, simulates a series of
the original length from the fitted model, refits the model, extracts
residuals and recomputes the statistic. Each replicate uses its own random
stream derived from ``(seed, replicate, attempt)``, so results do not depend
on the number of worker processes.
"""

from __future__ import annotations

import math
import multiprocessing
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _rng, models
from .distributions import DistributionSpec
from .errors import BootstrapError, ParameterError, SteinGofError
from .ksd import KsdConfig, test_statistic
from .models import FittedModel, ModelSpec

# fork is unsafe once the OpenMP runtime behind the numba kernels is active
_SPAWN = multiprocessing.get_context("spawn")
Statistic = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings.

    Parameters
    ----------
    m : int
        Number of replicates (full mode).
    seed : int
    mode : {"full", "warp"}
    workers : int
        Worker processes; 1 runs serially. Results are identical either way.
    max_retries : int
        Fresh draws tried after a failed replicate before counting it failed.
    max_fail_frac : float
        Abort when more than this fraction of replicates fail.
    """

    m: int = 1000
    seed: int = 0
    mode: str = "full"
    workers: int = 1
    max_retries: int = 3
    max_fail_frac: float = 0.05

    def __post_init__(self):
        if self.m < 0:
            raise ParameterError("m must be >= 0")
        if self.mode not in ("full", "warp"):
            raise ParameterError(f"unknown bootstrap mode {self.mode!r}")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if self.mode == "full" and 0 < self.m < 99:
            warnings.warn(f"m={self.m} bootstrap replicates is too few for a meaningful p-value (use >= 99)", stacklevel=3)


@dataclass
class BootstrapOutcome:
    stats: np.ndarray
    p_value: float
    failed: int = 0
    attempts: list = field(default_factory=list)


class KsdStatistic:
    """Picklable ``residuals -> n0 * S_hat`` for a fixed null and configuration."""

    def __init__(self, null_spec: DistributionSpec, cfg: KsdConfig | None = None):
        self.null_spec = null_spec
        self.cfg = cfg or KsdConfig()

    def __call__(self, resid: np.ndarray) -> float:
        return test_statistic(resid, self.null_spec, self.cfg)


def bootstrap_replicate(
    fm: FittedModel,
    null_spec: DistributionSpec,
    statistics: Sequence[Statistic],
    n: int,
    seed: int,
    index: int,
    *,
    tag: int = _rng.BOOT,
    max_retries: int = 3,
) -> tuple[np.ndarray | None, int]:
    """One bootstrap draw evaluated by every function in `statistics`.

    Returns ``(values, attempts_used)``; ``values`` is ``None`` when all
    attempts failed.
    """
    for attempt in range(max_retries + 1):
        rng = _rng.substream(seed, tag, index, attempt)
        try:
            y = models.simulate(fm, n, null_spec, rng, check=False)
            fm_star = models.fit(fm.spec, y, start=fm)
            resid = models.residuals(fm_star, y)
            vals = np.array([float(f(resid)) for f in statistics])
        except (SteinGofError, np.linalg.LinAlgError, FloatingPointError):
            continue
        if np.all(np.isfinite(vals)):
            return vals, attempt + 1
    return None, max_retries + 1


def _run_chunk(args):
    fm, null_spec, statistics, n, seed, indices, tag, retries = args
    return [bootstrap_replicate(fm, null_spec, statistics, n, seed, b, tag=tag, max_retries=retries) for b in indices]


def bootstrap_distribution(
    fm: FittedModel,
    null_spec: DistributionSpec,
    statistics: Sequence[Statistic],
    n: int,
    cfg: BootstrapConfig,
    *,
    tag: int = _rng.BOOT,
) -> tuple[np.ndarray, int]:
    """Replicate statistics, shape ``(m_ok, len(statistics))``, and the failure count.

    Raises
    ------
    BootstrapError
        If more than ``cfg.max_fail_frac`` of the replicates failed.
    """
    m = cfg.m
    idx = list(range(m))
    if cfg.workers > 1 and m > 1:
        chunks = [idx[i :: cfg.workers] for i in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers, mp_context=_SPAWN) as ex:
            parts = list(ex.map(_run_chunk, [(fm, null_spec, list(statistics), n, cfg.seed, c, tag, cfg.max_retries) for c in chunks]))
        results: list = [None] * m
        for c, part in zip(chunks, parts):
            for b, r in zip(c, part):
                results[b] = r
    else:
        results = _run_chunk((fm, null_spec, list(statistics), n, cfg.seed, idx, tag, cfg.max_retries))
    ok = [r[0] for r in results if r[0] is not None]
    failed = m - len(ok)
    if failed > cfg.max_fail_frac * m:
        raise BootstrapError(
            f"{failed} of {m} bootstrap replicates failed after {cfg.max_retries} retries each "
            f"(limit {cfg.max_fail_frac:.0%}); the fitted model may be near non-stationarity"
        )
    stats = np.vstack(ok) if ok else np.empty((0, len(statistics)))
    return stats, failed


def pvalue(observed: float, stats: np.ndarray) -> float:
    """``(1 + #{stats >= observed}) / (m + 1)``."""
    stats = np.asarray(stats, dtype=float)
    return (1.0 + np.count_nonzero(stats >= observed)) / (stats.size + 1.0)


def parametric_bootstrap(
    fm: FittedModel,
    null_spec: DistributionSpec,
    statistic: Statistic,
    observed: float,
    cfg: BootstrapConfig,
    n: int,
) -> BootstrapOutcome:
    """Bootstrap p-value of `observed` for an arbitrary residual statistic."""
    stats, failed = bootstrap_distribution(fm, null_spec, [statistic], n, cfg)
    col = stats[:, 0]
    return BootstrapOutcome(stats=col, p_value=pvalue(observed, col), failed=failed)


def bootstrap_pvalue(
    data,
    model_spec: ModelSpec,
    null_spec: DistributionSpec,
    ksd_cfg: KsdConfig | None,
    bcfg: BootstrapConfig,
    *,
    fitted: FittedModel | None = None,
) -> tuple[float, np.ndarray]:
    """Bootstrap p-value of the KSD statistic on `data`.

    Returns
    -------
    p_value : float
    bootstrap_stats : ndarray
        The ``n0 * S_hat*`` replicates that succeeded.
    """
    y = np.asarray(data, dtype=float)
    fm = fitted if fitted is not None else models.fit(model_spec, y)
    stat = KsdStatistic(null_spec, ksd_cfg)
    observed = stat(models.residuals(fm, y))
    out = parametric_bootstrap(fm, null_spec, stat, observed, bcfg, y.shape[0])
    return out.p_value, out.stats


def warp_speed_critical_values(stats_star, levels=(0.01, 0.05, 0.10)) -> dict[float, float]:
    """Critical values from one resample statistic per Monte Carlo repetition.

    ``c_alpha`` is the ``ceil((1 - alpha) J)``-th smallest of the J values.
    """
    s = np.sort(np.asarray(stats_star, dtype=float))
    J = s.size
    if J == 0:
        raise ParameterError("no resample statistics")
    if J < 100:
        warnings.warn(f"warp-speed critical values from J={J} < 100 repetitions are unreliable", stacklevel=2)
    out = {}
    for a in levels:
        if not 0 < a < 1:
            raise ParameterError(f"level must lie in (0, 1), got {a}")
        k = max(1, math.ceil((1.0 - a) * J - 1e-9))
        out[float(a)] = float(s[k - 1])
    return out


def warp_speed_rejection_rates(stats, stats_star, levels=(0.01, 0.05, 0.10)) -> dict[float, float]:
    """Fraction of repetitions with ``S_j > c_alpha`` for each level."""
    cv = warp_speed_critical_values(stats_star, levels)
    s = np.asarray(stats, dtype=float)
    return {a: float(np.mean(s > c)) for a, c in cv.items()}
