import json
import string

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from steingof import cli, models, simharness
from steingof.cli import DataError, ingest_csv, main, write_csv_matrix
from steingof.distributions import DistributionSpec


def _write(path, text):
    path.write_text(text)
    return path


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# -- ingestion --------------------------------------------------------------------------
def test_ingest_three_columns_with_header(tmp_path):
    y = np.random.default_rng(0).normal(size=(2275, 3))
    write_csv_matrix(tmp_path / "d.csv", y)
    back = ingest_csv(tmp_path / "d.csv")
    assert back.shape == (2275, 3)
    np.testing.assert_array_equal(back, y)


def test_ingest_single_column_without_header(tmp_path):
    x = ingest_csv(_write(tmp_path / "d.csv", "1\n2\n3.5\n"))
    assert x.shape == (3, 1)


@pytest.mark.parametrize(
    "text,line,col",
    [
        ("a,b\n1,2\n3,NaN\n", 3, 2),
        ("1,2\n3,x\n", 2, 2),
        ("1,2\n3,4,5\n", 2, None),
        ("1,2\ninf,4\n", 2, 1),
    ],
)
def test_ingest_errors_name_the_position(tmp_path, text, line, col):
    with pytest.raises(DataError) as info:
        ingest_csv(_write(tmp_path / "d.csv", text))
    assert info.value.line == line and info.value.column == col
    assert f"line {line}" in str(info.value)


@pytest.mark.parametrize("text", ["", "\n\n", "a,b\n", "1,2\n"])
def test_ingest_too_short(tmp_path, text):
    with pytest.raises(DataError):
        ingest_csv(_write(tmp_path / "d.csv", text))


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 4)), elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_ingest_round_trip(tmp_path, y):
    path = tmp_path / "rt.csv"
    write_csv_matrix(path, y)
    np.testing.assert_array_equal(ingest_csv(path), y)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(2, 6), st.integers(1, 3), st.data())
def test_ingest_reports_bad_cell(tmp_path, n, d, data):
    i = data.draw(st.integers(0, n - 1))
    j = data.draw(st.integers(0, d - 1))
    word = data.draw(st.text(string.ascii_letters, min_size=1, max_size=5).filter(lambda w: w.lower() not in ("nan", "inf", "infinity")))
    rows = [["1.0"] * d for _ in range(n)]
    rows[i][j] = word
    path = tmp_path / "bad.csv"
    path.write_text("\n".join(",".join(r) for r in rows) + "\n")
    if i == 0 and n >= 3:
        # a non-numeric first row is read as a header
        assert ingest_csv(path).shape == (n - 1, d)
        return
    with pytest.raises(DataError) as info:
        ingest_csv(path)
    if i > 0:
        assert (info.value.line, info.value.column) == (i + 1, j + 1)


# -- commands ---------------------------------------------------------------------------
@pytest.fixture
def normal_csv(tmp_path):
    y = np.random.default_rng(1).normal(size=(120, 2)) @ np.array([[1.0, 0.4], [0.0, 1.0]])
    path = tmp_path / "y.csv"
    write_csv_matrix(path, y)
    return path


def test_fit_command(normal_csv, tmp_path, capsys):
    code, out, _ = _run(["fit", "--data", normal_csv, "--model", "const", "--out", tmp_path / "m.json"], capsys)
    assert code == 0
    obj = json.loads((tmp_path / "m.json").read_text())
    assert obj["schema_version"] == 1 and obj["model"]["kind"] == "const"
    assert obj["config"]["command"] == "fit"


def test_test_command_report(normal_csv, tmp_path, capsys):
    argv = ["test", "--data", normal_csv, "--model", "const", "--null", "normal", "--null", "t:mle", "--boot", "99", "--seed", "5", "--tests", "ksd,mardia,dh,hz,hjm,bc", "--out", tmp_path / "r.json"]
    code, _, err = _run(argv, capsys)
    assert code == 0, err
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["schema_version"] == 1
    assert rep["config"]["seed"] == 5 and rep["config"]["boot"] == 99
    ksd = rep["results"][0]["ksd"]
    assert {"statistic", "p_value", "n0", "sigma", "m", "null"} <= set(ksd)
    assert ksd["m"] == 99 and 0 < ksd["p_value"] <= 1
    assert rep["results"][1]["null"].startswith("t:")
    assert set(rep["baselines"]) == {"mardia", "dh", "hz", "hjm"}
    assert len(rep["results"][0]["bai_chen"]) == 3


def test_test_command_is_reproducible(normal_csv, tmp_path, capsys):
    argv = ["test", "--data", normal_csv, "--boot", "99", "--seed", "3"]
    _, a, _ = _run(argv + ["--out", tmp_path / "a.json"], capsys)
    _, b, _ = _run(argv + ["--out", tmp_path / "b.json"], capsys)
    ja = json.loads((tmp_path / "a.json").read_text())
    jb = json.loads((tmp_path / "b.json").read_text())
    ja["config"].pop("data"), jb["config"].pop("data")
    assert ja == jb


def test_seed_from_environment(normal_csv, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("STEINGOF_SEED", "17")
    code, _, _ = _run(["test", "--data", normal_csv, "--boot", "0", "--out", tmp_path / "r.json"], capsys)
    assert code == 0
    assert json.loads((tmp_path / "r.json").read_text())["config"]["seed"] == 17


def test_missing_file_exit_code(tmp_path, capsys):
    code, _, err = _run(["test", "--data", tmp_path / "none.csv"], capsys)
    assert code == 3
    assert json.loads(err)["error"]["type"] == "data"


def test_bad_cell_exit_code(tmp_path, capsys):
    path = _write(tmp_path / "d.csv", "a,b\n1,2\n3,NaN\n4,5\n")
    code, _, err = _run(["test", "--data", path], capsys)
    assert code == 3
    e = json.loads(err)["error"]
    assert (e["line"], e["column"]) == (3, 2)


@pytest.mark.parametrize(
    "extra",
    [["--model", "arma"], ["--null", "cauchy"], ["--n0", "most"], ["--sigma", "mean"], ["--tests", "ksd,foo"], ["--boot", "-1"]],
)
def test_config_errors(normal_csv, capsys, extra):
    code, _, err = _run(["test", "--data", normal_csv, "--boot", "0"] + extra, capsys)
    assert code == 2
    assert json.loads(err)["error"]["type"] == "config"


def test_argparse_errors_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["test"]) == 2


def test_numeric_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    y = np.zeros((80, 2))
    y[:, 0] = np.random.default_rng(0).normal(size=80)
    write_csv_matrix(path, y)
    code, _, err = _run(["test", "--data", path, "--model", "ccc", "--boot", "0"], capsys)
    assert code == 4
    assert json.loads(err)["error"]["type"] == "numeric"


def test_simulate_then_test_var_ccc(tmp_path, capsys):
    mask_path = tmp_path / "mask.json"
    mask_path.write_text(json.dumps({"mask": simharness.application_model().spec.mask.to_dict()}))
    code, out, err = _run(["simulate", "--preset", "application", "--n", "600", "--errors", "t:8", "--seed", "1", "--out", tmp_path / "s.csv"], capsys)
    assert code == 0, err
    assert json.loads(out)["config"]["errors"] == "t:8"
    assert ingest_csv(tmp_path / "s.csv").shape == (600, 3)
    code, _, err = _run(["test", "--data", tmp_path / "s.csv", "--model", "var-ccc:3", "--mask", mask_path, "--null", "t:8", "--boot", "0", "--out", tmp_path / "r.json"], capsys)
    assert code == 0, err
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["model"]["model"]["kind"] == "var-ccc"
    assert rep["results"][0]["ksd"]["n0"] == 597


def test_simulate_from_fitted_model(normal_csv, tmp_path, capsys):
    _run(["fit", "--data", normal_csv, "--out", tmp_path / "m.json"], capsys)
    code, _, _ = _run(["simulate", "--fitted", tmp_path / "m.json", "--n", "50", "--out", tmp_path / "s.csv"], capsys)
    assert code == 0
    assert ingest_csv(tmp_path / "s.csv").shape == (50, 2)


def test_experiment_preset_writes_csv(tmp_path, capsys):
    argv = ["experiment", "--preset", "table1-desk", "--reps", "10", "--seed", "2", "--out", tmp_path / "a.csv", "--json-out", tmp_path / "a.json"]
    with pytest.warns(UserWarning):
        code, _, err = _run(argv, capsys)
    assert code == 0, err
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "test,level,rate,n,case,d,error_law,null_law,seed"
    assert len(lines) == 1 + 3 * 9
    with pytest.warns(UserWarning):
        _run(argv[:-4] + ["--out", tmp_path / "b.csv"], capsys)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    meta = json.loads((tmp_path / "a.json").read_text())
    assert meta["manifest"]["J"] == 10 and meta["schema_version"] == 1


def test_experiment_from_toml_manifest(tmp_path, capsys):
    path = _write(tmp_path / "m.toml", 'case = 1\nd = 2\nn = 40\nJ = 5\ntests = ["ksd"]\n')
    with pytest.warns(UserWarning):
        code, out, err = _run(["experiment", "--manifest", path], capsys)
    assert code == 0, err
    assert out.startswith("test,level,rate")


def test_unknown_preset_lists_available(capsys):
    code, _, err = _run(["experiment", "--preset", "nope"], capsys)
    assert code == 2
    msg = json.loads(err)["error"]["message"]
    assert "table1-desk" in msg


def test_sweep_command(tmp_path, capsys):
    argv = ["sweep", "--preset", "size-case1-d2", "--reps", "5", "--axis", "sigma", "--values", "1,2", "--out", tmp_path / "s.csv"]
    with pytest.warns(UserWarning):
        code, _, err = _run(argv, capsys)
    assert code == 0, err
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("sigma,test") and len(lines) == 1 + 2 * 3


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "steingof", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "steingof" in res.stdout
