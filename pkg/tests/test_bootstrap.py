import numpy as np
import pytest

from steingof import models
from steingof.bootstrap import (
    BootstrapConfig,
    KsdStatistic,
    bootstrap_distribution,
    bootstrap_pvalue,
    bootstrap_replicate,
    parametric_bootstrap,
    pvalue,
    warp_speed_critical_values,
    warp_speed_rejection_rates,
)
from steingof.distributions import DistributionSpec, sample
from steingof.errors import BootstrapError, ParameterError
from steingof.ksd import KsdConfig, run_ksd_test
from steingof.models import FittedModel, ModelParams, ModelSpec

N2 = DistributionSpec.normal(2)
IDENTITY = FittedModel(ModelSpec("identity", 2), ModelParams())


def test_pvalue_rule():
    assert pvalue(5.0, np.array([1.0, 2.0, 6.0])) == pytest.approx(2 / 4)
    assert pvalue(5.0, np.array([5.0])) == 1.0
    assert pvalue(5.0, np.array([4.0])) == 0.5


def test_pvalue_with_one_replicate():
    for obs in (-1.0, 0.0, 1.0):
        assert pvalue(obs, np.array([0.0])) in (0.5, 1.0)


def test_config_validation():
    with pytest.raises(ParameterError):
        BootstrapConfig(m=-1)
    with pytest.raises(ParameterError):
        BootstrapConfig(mode="turbo")
    with pytest.warns(UserWarning):
        BootstrapConfig(m=10)


def test_replicate_is_deterministic():
    stat = KsdStatistic(N2)
    a, _ = bootstrap_replicate(IDENTITY, N2, [stat], 50, seed=3, index=7)
    b, _ = bootstrap_replicate(IDENTITY, N2, [stat], 50, seed=3, index=7)
    c, _ = bootstrap_replicate(IDENTITY, N2, [stat], 50, seed=3, index=8)
    np.testing.assert_array_equal(a, b)
    assert a[0] != c[0]


def test_distribution_independent_of_worker_count():
    fm = FittedModel(ModelSpec("const", 2), ModelParams(M=np.zeros(2), C=np.eye(2)))
    stat = KsdStatistic(N2)
    one, _ = bootstrap_distribution(fm, N2, [stat], 60, BootstrapConfig(m=120, seed=1, workers=1))
    two, _ = bootstrap_distribution(fm, N2, [stat], 60, BootstrapConfig(m=120, seed=1, workers=2))
    np.testing.assert_array_equal(one, two)


class _Flaky:
    """Fails for a fixed fraction of calls by inspecting the data."""

    def __init__(self, threshold):
        self.threshold = threshold

    def __call__(self, resid):
        return float("nan") if resid[0, 0] > self.threshold else 1.0


def test_failed_replicates_are_retried_and_counted():
    # nan in about 16% of draws; 3 retries make a total failure rare
    stats, failed = bootstrap_distribution(IDENTITY, N2, [_Flaky(1.0)], 20, BootstrapConfig(m=100, seed=0))
    assert failed <= 5 and stats.shape[0] == 100 - failed


def test_too_many_failures_abort():
    with pytest.raises(BootstrapError):
        bootstrap_distribution(IDENTITY, N2, [_Flaky(-10.0)], 20, BootstrapConfig(m=100, seed=0))


def test_multiple_statistics_share_a_draw():
    stat = KsdStatistic(N2)
    stats, _ = bootstrap_distribution(IDENTITY, N2, [stat, stat], 40, BootstrapConfig(m=99, seed=2))
    np.testing.assert_array_equal(stats[:, 0], stats[:, 1])


def test_bootstrap_pvalue_matches_run_ksd_test(rng):
    y = rng.normal(size=(80, 2))
    spec = ModelSpec("const", 2)
    bcfg = BootstrapConfig(m=99, seed=4)
    p, stats = bootstrap_pvalue(y, spec, N2, KsdConfig(), bcfg)
    res = run_ksd_test(y, spec, N2, KsdConfig(), bcfg)
    assert p == res.p_value
    np.testing.assert_array_equal(stats, res.bootstrap_stats)
    assert 0 < p <= 1


def test_warp_speed_quantile_rule():
    s = np.arange(1.0, 101.0)
    cv = warp_speed_critical_values(s, (0.01, 0.05, 0.10))
    assert cv == {0.01: 99.0, 0.05: 95.0, 0.10: 90.0}
    rates = warp_speed_rejection_rates(s, s)
    assert rates[0.05] == pytest.approx(0.05)


def test_warp_speed_single_point_warns():
    with pytest.warns(UserWarning):
        cv = warp_speed_critical_values([3.0], (0.05,))
    assert cv[0.05] == 3.0


@pytest.mark.slow
def test_size_identity_model_full_bootstrap():
    rng = np.random.default_rng(100)
    rejections = 0
    reps = 500
    stat = KsdStatistic(N2)
    for r in range(reps):
        y = sample(N2, 200, rng)
        out = parametric_bootstrap(IDENTITY, N2, stat, stat(y), BootstrapConfig(m=199, seed=r), 200)
        rejections += out.p_value <= 0.10
    assert 0.07 <= rejections / reps <= 0.13


@pytest.mark.slow
def test_power_against_t5_full_bootstrap():
    rng = np.random.default_rng(101)
    t5 = DistributionSpec.student_t(2, 5.0)
    spec = ModelSpec("const", 2)
    hits = 0
    for r in range(200):
        y = sample(t5, 500, rng)
        res = run_ksd_test(y, spec, N2, None, BootstrapConfig(m=199, seed=r))
        hits += res.p_value < 0.05
    assert hits / 200 >= 0.99
