"""Acceptance criteria 1-7 at their stated tolerances.

Each test appends one PASS/FAIL line that is echoed in the terminal summary.
"""

import json
import math
import time
import warnings

import numpy as np
import pytest

from steingof import _rng, cli, models, simharness
from steingof.distributions import DistributionSpec, log_density, score
from steingof.simharness import ExperimentManifest, run_experiment
from steingof.stein_kernel import KernelConfig, stein_matrix, u_stein, ustat_sum

from .conftest import ACCEPTANCE_LINES, fd_grad

pytestmark = pytest.mark.acceptance


def _record(number: int, ok: bool, text: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="module")
def table1_report():
    t0 = time.perf_counter()
    rep = run_experiment(ExperimentManifest(
        case=1, d=2, n=100, J=1000, seed=0,
        tests=("ksd", "mardia_skew", "mardia_kurt", "dh", "hz", "hjm", "bc1", "bc2", "bc3"),
    ))
    rep.wall = time.perf_counter() - t0
    return rep


def test_criterion_1_size(table1_report):
    rates = table1_report.rates["ksd"]
    target = {0.01: 1.0, 0.05: 5.5, 0.10: 11.5}
    ok = all(abs(rates[a] - target[a]) <= 2.5 for a in target)
    _record(1, ok, "KSD size Case 1 d=2 n=100 J=1000 (1%,5%,10%) = "
            f"({rates[0.01]:.1f}, {rates[0.05]:.1f}, {rates[0.10]:.1f}); target (1.0, 5.5, 11.5) +/- 2.5")
    assert ok


def test_criterion_2_power_t5():
    rep = run_experiment(ExperimentManifest(case=1, d=2, error_law="t:5", n=500, J=500, seed=1, tests=("ksd",)))
    r = rep.rates["ksd"][0.05]
    ok = r >= 97
    _record(2, ok, f"KSD power Normal null vs T5, Case 1 d=2 n=500 J=500, 5% level = {r:.1f}; target >= 97")
    assert ok


def test_criterion_3_power_skew_normal():
    rep = run_experiment(ExperimentManifest(case=1, d=5, error_law="sn", n=500, J=500, seed=2, tests=("ksd",)))
    r = rep.rates["ksd"][0.05]
    ok = r >= 95
    _record(3, ok, f"KSD power Normal null vs SN(0,0.2,-0.2,0,-0.1), Case 1 d=5 n=500 J=500, 5% level = {r:.1f}; target >= 95")
    assert ok


def test_criterion_4_t_null_size():
    rep = run_experiment(ExperimentManifest(case=2, d=2, error_law="t:5", null_law="t:5", n=500, J=500, seed=3, tests=("ksd",)))
    r = rep.rates["ksd"][0.05]
    ok = abs(r - 4.8) <= 3
    _record(4, ok, f"KSD size T5 null, Case 2 d=2 n=500 J=500, 5% level = {r:.1f}; target 4.8 +/- 3")
    assert ok


def test_criterion_5_baselines(table1_report):
    r = table1_report.rates
    size_tests = ("mardia_skew", "mardia_kurt", "dh", "hz", "hjm")
    sizes_ok = all(abs(r[t][0.05] - 5) <= 2.5 for t in size_tests)
    bc_ok = all(r[t][0.05] > 10 for t in ("bc1", "bc2", "bc3"))
    ok = sizes_ok and bc_ok
    text = ", ".join(f"{t}={r[t][0.05]:.1f}" for t in size_tests + ("bc1", "bc2", "bc3"))
    _record(5, ok, f"baseline sizes at 5% ({text}); target classical 5 +/- 2.5 "
            f"[{'ok' if sizes_ok else 'off'}], Bai-Chen > 10 [{'ok' if bc_ok else 'off'}]")
    assert sizes_ok, "classical baseline sizes"
    assert bc_ok, "Bai-Chen over-rejection"


def _thread_invariance() -> bool:
    from .test_stein_kernel import test_ustat_sum_bit_identical_across_thread_counts

    try:
        test_ustat_sum_bit_identical_across_thread_counts()
    except AssertionError:
        return False
    return True


def test_criterion_6_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    checks = {}

    laws = [DistributionSpec.normal(3), DistributionSpec.student_t(3, 5.0), DistributionSpec.skew_normal((0.0, 0.2, -0.2))]
    worst = 0.0
    for spec in laws:
        for x in rng.normal(size=(10, 3)):
            fd = fd_grad(lambda z: float(log_density(spec, z)), x)
            worst = max(worst, float(np.max(np.abs(score(spec, x) - fd) / np.maximum(np.abs(fd), 1e-3))))
    checks["score vs FD rel"] = (worst, worst <= 1e-4)

    worst = 0.0
    for spec in laws:
        x = rng.normal(size=(30, 3))
        cfg = KernelConfig(1.1)
        brute = math.fsum(u_stein(spec, cfg, x[i], x[j]) for i in range(30) for j in range(i + 1, 30))
        fast = ustat_sum(x, score(spec, x), 1.1)
        worst = max(worst, abs(fast - brute) / abs(brute))
    checks["U-stat vs loop rel"] = (worst, worst <= 1e-12)

    low = np.inf
    for spec in laws:
        for _ in range(200):
            x = rng.normal(scale=rng.uniform(0.2, 3.0), size=(5, 3))
            U = stein_matrix(x, score(spec, x), rng.uniform(0.3, 4.0))
            low = min(low, float(np.linalg.eigvalsh(0.5 * (U + U.T)).min()))
    checks["min eigenvalue"] = (low, low >= -1e-8)

    worst = 0.0
    for d in (2, 5):
        half = simharness.case_csqrt(d)
        worst = max(worst, float(np.abs(models.sqrt_pd(half @ half) - half).max()))
    checks["sqrt_pd round trip"] = (worst, worst <= 1e-10)

    x = rng.normal(size=(50, 3))
    sn0 = DistributionSpec.skew_normal((0.0, 0.0, 0.0))
    diff = max(float(np.abs(score(sn0, x) + x).max()),
               float(np.abs(log_density(sn0, x) - log_density(DistributionSpec.normal(3), x)).max()))
    checks["SN(0) vs Normal"] = (diff, diff <= 1e-10)

    checks["thread-count bit-exact"] = (0.0, _thread_invariance())
    elapsed = time.perf_counter() - t0
    checks["runtime <= 60 s"] = (elapsed, elapsed <= 60)

    ok = all(v[1] for v in checks.values())
    text = "; ".join(f"{k}: {v[0]:.2e} {'ok' if v[1] else 'FAIL'}" for k, v in checks.items())
    _record(6, ok, text)
    assert ok


N_SEEDS = 50
NEED = math.ceil(0.9 * N_SEEDS)


def test_criterion_7_application_workflow(tmp_path):
    """Simulated three-asset VAR(3)-CCC-GARCH(1,1) series with T3(8) errors run through ``steingof test``.

    The loop stops once the outcome cannot change: a null whose success
    count can no longer reach 90% of 50 seeds decides a failure.
    """
    truth = simharness.application_model()
    mask = tmp_path / "mask.json"
    mask.write_text(json.dumps({"mask": truth.spec.mask.to_dict()}))
    t8 = DistributionSpec.student_t(3, 8.0)
    hits = {"normal": 0, "sn:mle": 0, "t:8": 0}
    misses = dict.fromkeys(hits, 0)
    done = 0
    for seed in range(N_SEEDS):
        y = models.simulate(truth, 2275, t8, _rng.substream(seed, _rng.DATA, 7))
        data = tmp_path / f"app_{seed}.csv"
        cli.write_csv_matrix(data, y)
        out = tmp_path / f"r_{seed}.json"
        argv = ["test", "--data", str(data), "--model", "var-ccc:3", "--mask", str(mask),
                "--null", "normal", "--null", "sn:mle", "--null", "t:8",
                "--boot", "99", "--seed", str(seed), "--out", str(out)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            code = cli.main(argv)
        assert code == 0, f"cmd_test exited with {code} for seed {seed}"
        results = {r["null_input"]: r["ksd"]["p_value"] for r in json.loads(out.read_text())["results"]}
        good = {"normal": results["normal"] <= 0.01, "sn:mle": results["sn:mle"] <= 0.01, "t:8": results["t:8"] > 0.05}
        for k, g in good.items():
            hits[k] += g
            misses[k] += not g
        done += 1
        if any(m > N_SEEDS - NEED for m in misses.values()):
            break
    ok = done == N_SEEDS and all(h >= NEED for h in hits.values())
    text = (f"after {done}/{N_SEEDS} seeds: Normal rejected at 1% in {hits['normal']}, "
            f"SN(gamma_MLE) rejected at 1% in {hits['sn:mle']}, T3(8) not rejected at 5% in {hits['t:8']}; "
            f"target each >= {NEED} of {N_SEEDS}")
    if not ok:
        text += " (stopped early: outcome decided)" if done < N_SEEDS else ""
    _record(7, ok, text)
    assert ok
