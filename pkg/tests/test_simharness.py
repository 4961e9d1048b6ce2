import json
import warnings
from dataclasses import replace

import numpy as np
import pytest

from steingof import models, simharness
from steingof.distributions import DistributionSpec
from steingof.errors import ParameterError
from steingof.simharness import PRESETS, ExperimentManifest, load_manifest, run_experiment, sensitivity_sweep, sweep_csv


def test_case_models_embed_displayed_values():
    c1 = simharness.case_model(1, 2)
    np.testing.assert_allclose(models.sqrt_pd(c1.params.C), [[1, 0.5], [0.5, 1]], atol=1e-12)
    c2 = simharness.case_model(2, 5)
    assert c2.params.A.shape == (3, 5, 5) and c2.params.A[0, 0, 0] == 0.2
    c3 = simharness.case_model(3, 5)
    assert c3.params.Gamma[3, 0] == 0.1 and np.all(c3.params.W == 0.1)


@pytest.mark.parametrize("d", [2, 5])
def test_case2_dgp_is_stationary(d):
    from steingof.models.var import spectral_radius

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        models.check_stationarity(simharness.case_model(2, d))
    assert spectral_radius(simharness.case_model(2, d).params.A) < 1


def test_resolve_law_presets():
    assert simharness.resolve_law("sn", 2) == DistributionSpec.skew_normal((0.0, -0.6))
    assert simharness.resolve_law("st", 5) == DistributionSpec.skew_t(5.0, (1.1, 1.2, 1.3, 1.4, 1.5))
    assert simharness.resolve_law("t:5", 2) == DistributionSpec.student_t(2, 5.0)


@pytest.mark.parametrize(
    "kw",
    [
        dict(tests=("dh",), case=2),
        dict(tests=("hz",), null_law="t:5"),
        dict(tests=("bc1",), d=5),
        dict(tests=("hjm",), null_law="t:5"),
        dict(tests=("nonsense",)),
        dict(case=4),
        dict(mode="fast"),
        dict(J=0),
    ],
)
def test_manifest_validation(kw):
    with pytest.raises(ParameterError):
        ExperimentManifest(**kw)


def test_manifest_dict_round_trip():
    mf = PRESETS["table1-desk"]
    assert ExperimentManifest.from_dict(mf.to_dict()) == mf


def test_manifest_from_preset_with_override():
    mf = ExperimentManifest.from_dict({"preset": "size-case1-d2", "J": 7})
    assert mf.J == 7 and mf.case == 1
    with pytest.raises(ParameterError):
        ExperimentManifest.from_dict({"bogus": 1})


def test_load_manifest_json_and_toml(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps({"case": 1, "d": 2, "n": 50, "J": 5, "tests": ["ksd"], "seed": 9}))
    (tmp_path / "m.toml").write_text('case = 1\nd = 2\nn = 50\nJ = 5\ntests = ["ksd"]\nseed = 9\n')
    assert load_manifest(tmp_path / "m.json") == load_manifest(tmp_path / "m.toml")


def _small(**kw):
    base = ExperimentManifest(case=1, d=2, n=60, J=30, tests=("ksd", "mardia_skew", "mardia_kurt", "dh", "hz", "hjm", "bc1", "bc2", "bc3"))
    return replace(base, **kw)


def test_report_layout():
    with pytest.warns(UserWarning):
        rep = run_experiment(_small())
    rows = rep.csv_rows()
    assert len(rows) == 9 * 3
    assert list(rows[0]) == list(simharness.CSV_COLUMNS)
    for t in rep.manifest.tests:
        for a in (0.01, 0.05, 0.10):
            assert 0 <= rep.rates[t][a] <= 100
    obj = rep.to_dict()
    assert obj["schema_version"] == 1 and "runtime_seconds" in obj["metadata"]
    assert obj["critical_values"]["bc1"]["0.05"] == 2.469


def test_experiment_is_deterministic_and_worker_independent():
    mf = _small(J=12, tests=("ksd", "hjm", "dh"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = run_experiment(mf).to_csv()
        b = run_experiment(mf).to_csv()
        c = run_experiment(replace(mf, workers=2)).to_csv()
    assert a == b == c


def test_full_mode_runs():
    mf = ExperimentManifest(case=1, d=2, n=60, J=5, tests=("ksd",), mode="full", m=99)
    rep = run_experiment(mf)
    assert set(rep.rates["ksd"]) == {0.01, 0.05, 0.10}


def test_bai_chen_power_is_size_adjusted():
    mf = ExperimentManifest(case=1, d=2, n=100, J=40, error_law="t:5", tests=("bc1",))
    rep = run_experiment(mf)
    assert rep.size_adjusted
    assert rep.critical_values["bc1"][0.05] != 2.469


def test_single_value_sweep_matches_override():
    base = ExperimentManifest(case=1, d=2, n=60, J=20, tests=("ksd",))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sweep = sensitivity_sweep(base, "ratio", [0.8])
        direct = run_experiment(replace(base, n0_ratio=0.8))
    assert sweep[0].rates == direct.rates
    text = sweep_csv(sweep, "ratio")
    assert text.splitlines()[0].startswith("ratio,test,level")


def test_sweep_rejects_bad_values():
    base = ExperimentManifest(J=5)
    with pytest.raises(ParameterError):
        sensitivity_sweep(base, "ratio", [1.5])
    with pytest.raises(ParameterError):
        sensitivity_sweep(base, "sigma", [0.0])
    with pytest.raises(ParameterError):
        sensitivity_sweep(base, "kernel", [1.0])


@pytest.mark.slow
def test_case2_power_t5_against_normal():
    rep = run_experiment(ExperimentManifest(case=2, d=2, error_law="t:5", n=500, J=200, tests=("ksd",), seed=3))
    assert rep.rates["ksd"][0.05] >= 98


@pytest.mark.slow
def test_case3_d5_t_null_size():
    rep = run_experiment(ExperimentManifest(case=3, d=5, error_law="t:5", null_law="t:5", n=500, J=400, tests=("ksd",), seed=4))
    assert 7 <= rep.rates["ksd"][0.10] <= 14


@pytest.mark.slow
def test_ratio_sweep_sizes():
    base = ExperimentManifest(case=1, d=2, n=100, J=400, tests=("ksd",), seed=5)
    for rep in sensitivity_sweep(base, "ratio", [0.5, 0.8, 1.0]):
        assert abs(rep.rates["ksd"][0.05] - 5) <= 2 * 100 * np.sqrt(0.05 * 0.95 / 400) * 2


@pytest.mark.slow
def test_sigma_sweep_power():
    base = ExperimentManifest(case=1, d=2, error_law="t:5", n=500, J=100, tests=("ksd",), seed=6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for rep in sensitivity_sweep(base, "sigma", [1.1, 2.0, 4.0]):
            assert rep.rates["ksd"][0.05] == 100
