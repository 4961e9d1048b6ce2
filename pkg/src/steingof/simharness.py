"""Monte Carlo size and power experiments with warp-speed bootstrap critical values.

Each repetition simulates a series from the case DGP, fits the case model,
computes every requested statistic on the fitted model and draws a single
bootstrap resample under the null. Critical values for the bootstrap-based
tests are quantiles of the pooled resample statistics.
"""

from __future__ import annotations

import csv
import io
import json
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _rng, models
from .baselines import bai_chen_critical_values, bai_chen_tests, doornik_hansen, henze_zirkler, mardia_tests
from .baselines.hjm import HjmStatistic, hjm_statistic
from .bootstrap import BootstrapConfig, KsdStatistic, bootstrap_distribution, bootstrap_replicate, pvalue, warp_speed_critical_values
from .distributions import DistributionSpec, parse_spec
from .errors import ParameterError, SteinGofError
from .ksd import KsdConfig, test_statistic
from .models import FittedModel, ModelParams, ModelSpec

# fork is unsafe once the OpenMP runtime behind the numba kernels is active
_SPAWN = multiprocessing.get_context("spawn")
SCHEMA_VERSION = 1
LEVELS = (0.01, 0.05, 0.10)
ALL_TESTS = ("ksd", "mardia_skew", "mardia_kurt", "dh", "hz", "hjm", "bc1", "bc2", "bc3")
CSV_COLUMNS = ("test", "level", "rate", "n", "case", "d", "error_law", "null_law", "seed")

# -- simulation designs ------------------------------------------------------
_CSQRT = {
    2: [[1, 0.5], [0.5, 1]],
    5: [
        [1, 0.5, 0.25, 0.125, 0.0625],
        [0.5, 1, 0.5, 0.25, 0.125],
        [0.25, 0.5, 1, 0.5, 0.25],
        [0.125, 0.25, 0.5, 1, 0.5],
        [0.0625, 0.125, 0.25, 0.5, 1],
    ],
}
_VAR_A = {
    2: [
        [[0.3, 0.65], [-0.2, -0.4]],
        [[-0.4, 0.4], [-0.6, 0.4]],
        [[0.5, 0.1], [0.1, 0.5]],
    ],
    5: [
        [[0.2, 0.1, -0.2, 0, 0], [0, -0.3, 0.1, -0.1, 0], [0, 0.05, 0.15, 0, 0], [-0.05, 0, 0.1, -0.2, 0], [0.05, -0.1, -0.1, 0, 0.3]],
        [[0.25, 0.05, 0.1, 0, 0], [-0.2, 0.1, 0.1, 0, 0], [0.1, 0.1, -0.2, 0, 0], [0, 0, 0, -0.1, 0.1], [0, 0, 0, 0.2, 0.3]],
        [[-0.3, 0.05, 0.1, 0, 0], [-0.2, 0.2, 0.1, 0, 0], [0.05, -0.1, 0.2, 0, 0], [0, 0, 0, -0.15, -0.1], [0, 0, 0, 0.05, 0.2]],
    ],
}
_GARCH = {
    2: dict(
        R=[[1, 0.5], [0.5, 1]],
        W=[0.1, 0.1],
        B=[[0.3, 0.1], [0.1, 0.2]],
        Gamma=[[0.2, 0.01], [0.1, 0.3]],
    ),
    5: dict(
        R=[[1 if i == j else 0.5 for j in range(5)] for i in range(5)],
        W=[0.1] * 5,
        B=[
            [0.3, 0.1, 0.1, 0.1, 0.1],
            [0.1, 0.2, 0.1, 0.1, 0.1],
            [0.1, 0.1, 0.25, 0.1, 0.1],
            [0.1, 0.1, 0.1, 0.15, 0.1],
            [0.1, 0.1, 0.1, 0.1, 0.1],
        ],
        Gamma=[
            [0.2, 0.01, 0.01, 0.1, 0.01],
            [0.1, 0.3, 0.01, 0.01, 0.01],
            [0.01, 0.1, 0.1, 0.01, 0.1],
            [0.1, 0.1, 0.1, 0.15, 0.01],
            [0.01, 0.01, 0.01, 0.1, 0.2],
        ],
    ),
}
SN_GAMMA = {2: (0.0, -0.6), 5: (0.0, 0.2, -0.2, 0.0, -0.1)}
ST_XI = {2: (1.0, 1.3), 5: (1.1, 1.2, 1.3, 1.4, 1.5)}
ST_NU = 5.0

#: fitted VAR(3)-CCC-GARCH(1,1) estimates for the three-asset return application
APPLICATION_PARAMS = dict(
    M=[0.071, 0.275, 0.164],
    A=[
        [[0, 0, 0], [0, 0, 0], [-0.236, 0, 0.053]],
        [[0, 0, 0], [0.282, -0.122, 0], [0, 0, 0]],
        [[-0.054, 0, 0], [0, 0, 0], [0, 0, 0]],
    ],
    R=[[1, 0.518, 0.489], [0.518, 1, 0.478], [0.489, 0.478, 1]],
    W=[0.004, 0.170, 0.053],
    B=[[0.044, 0, 0], [0, 0.058, 0.001], [0.013, 0, 0.017]],
    Gamma=[[0.942, 0, 0.001], [0, 0.921, 0], [0.001, 0, 0.978]],
)
APPLICATION_GAMMA_MLE = (-0.181, -0.023, 0.0)
APPLICATION_NU_MLE = 7.724


def case_csqrt(d: int) -> np.ndarray:
    """The displayed constant scale matrix ``C^{1/2}`` for Cases 1 and 2."""
    return np.array(_CSQRT[d], dtype=float)


def case_model(case: int, d: int) -> FittedModel:
    """True DGP for a simulation case with the displayed parameters."""
    if d not in (2, 5):
        raise ParameterError(f"case presets exist for d=2 and d=5, got d={d}")
    if case == 1:
        cs = case_csqrt(d)
        return FittedModel(ModelSpec("const", d), ModelParams(M=np.zeros(d), C=cs @ cs))
    if case == 2:
        cs = case_csqrt(d)
        return FittedModel(ModelSpec("var", d, 3), ModelParams(M=np.zeros(d), A=_VAR_A[d], C=cs @ cs))
    if case == 3:
        return FittedModel(ModelSpec("ccc", d), ModelParams(**_GARCH[d]))
    raise ParameterError(f"case must be 1, 2 or 3, got {case!r}")


def application_model() -> FittedModel:
    """The three-asset VAR(3)-CCC-GARCH(1,1) with zero restrictions from its nonzero pattern."""
    params = ModelParams(**APPLICATION_PARAMS)
    mask = models.ModelMask.from_params(params)
    return FittedModel(ModelSpec("var-ccc", 3, 3, mask), params)


def resolve_law(text: str, d: int) -> DistributionSpec:
    """Law from a string; ``sn`` and ``st`` alone select the case presets."""
    t = text.strip().lower()
    if t == "sn":
        return DistributionSpec.skew_normal(SN_GAMMA[d])
    if t == "st":
        return DistributionSpec.skew_t(ST_NU, ST_XI[d])
    if t in ("t5",):
        return DistributionSpec.student_t(d, 5.0)
    return parse_spec(t, d)


# -- manifest and report -------------------------------------------------------
@dataclass(frozen=True)
class ExperimentManifest:
    """Full description of a Monte Carlo experiment.

    Parameters
    ----------
    case : {1, 2, 3}
    d : {2, 5}
    error_law, null_law : str
        Law strings; ``sn`` and ``st`` select the preset skewness and
        asymmetry vectors for `d`.
    n : int
    J : int
        Repetitions.
    tests : tuple of str
        Subset of ``ksd, mardia_skew, mardia_kurt, dh, hz, hjm, bc1, bc2, bc3``.
    mode : {"warp", "full"}
        ``full`` computes an m-replicate bootstrap p-value per repetition.
    m : int
        Replicates per repetition in full mode.
    n0_ratio, sigma : float, optional
        KSD overrides.
    params : dict, optional
        Replace the case parameters (``ModelParams`` field names).
    bc_size_adjust : bool
        Calibrate Bai-Chen tests with an auxiliary null run when the error
        law differs from the null.
    """

    case: int = 1
    d: int = 2
    error_law: str = "normal"
    null_law: str = "normal"
    n: int = 100
    J: int = 1000
    tests: tuple = ("ksd",)
    levels: tuple = LEVELS
    seed: int = 0
    mode: str = "warp"
    m: int = 199
    n0_ratio: float | None = None
    sigma: float | None = None
    gamma0: float = 1.5
    params: dict | None = None
    bc_size_adjust: bool = True
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tests", tuple(self.tests))
        object.__setattr__(self, "levels", tuple(float(a) for a in self.levels))
        unknown = set(self.tests) - set(ALL_TESTS)
        if unknown:
            raise ParameterError(f"unknown tests {sorted(unknown)}; choose from {ALL_TESTS}")
        if self.case not in (1, 2, 3):
            raise ParameterError("case must be 1, 2 or 3")
        if self.J < 1 or self.n < 10:
            raise ParameterError("need J >= 1 and n >= 10")
        if self.mode not in ("warp", "full"):
            raise ParameterError("mode must be 'warp' or 'full'")
        null = self.null_spec
        self.error_spec  # validates
        classical = {"mardia_skew", "mardia_kurt", "dh", "hz"} & set(self.tests)
        if classical and (self.case != 1 or null.kind != "normal"):
            raise ParameterError(f"{sorted(classical)} apply only to Case 1 with a normal null")
        if "hjm" in self.tests and null.kind != "normal":
            raise ParameterError("hjm applies only to a normal null")
        if {"bc1", "bc2", "bc3"} & set(self.tests) and (self.d != 2 or null.kind not in ("normal", "t")):
            raise ParameterError("Bai-Chen tests need d = 2 and a normal or t null")

    @property
    def null_spec(self) -> DistributionSpec:
        return resolve_law(self.null_law, self.d)

    @property
    def error_spec(self) -> DistributionSpec:
        return resolve_law(self.error_law, self.d)

    @property
    def ksd_config(self) -> KsdConfig:
        if self.n0_ratio is not None and self.n0_ratio < 1:
            return KsdConfig(n0_rule="ratio", n0_ratio=self.n0_ratio, sigma=self.sigma)
        return KsdConfig(sigma=self.sigma)

    def true_model(self) -> FittedModel:
        fm = case_model(self.case, self.d)
        if self.params:
            merged = {**fm.params.to_dict(), **self.params}
            fm = FittedModel(fm.spec, ModelParams.from_dict(merged))
        return fm

    def to_dict(self) -> dict:
        out = asdict(self)
        out["tests"] = list(self.tests)
        out["levels"] = list(self.levels)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentManifest":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known - {"schema_version", "preset"}
        if unknown:
            raise ParameterError(f"unknown manifest fields {sorted(unknown)}")
        base = PRESETS[obj["preset"]] if "preset" in obj else cls()
        return replace(base, **{k: v for k, v in obj.items() if k in known})


@dataclass
class ExperimentReport:
    manifest: ExperimentManifest
    rates: dict  # test -> {level: percent}
    critical_values: dict = field(default_factory=dict)
    failures: int = 0
    runtime_seconds: float = 0.0
    size_adjusted: bool = False
    statistics: dict | None = None

    def to_dict(self, include_statistics: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "manifest": self.manifest.to_dict(),
            "rejection_rates": {t: {f"{a:g}": r for a, r in lv.items()} for t, lv in self.rates.items()},
            "critical_values": {t: {f"{a:g}": c for a, c in lv.items()} for t, lv in self.critical_values.items()},
            "failures": self.failures,
            "bc_size_adjusted": self.size_adjusted,
            "metadata": {"runtime_seconds": self.runtime_seconds},
        }
        if include_statistics and self.statistics is not None:
            out["statistics"] = {k: np.asarray(v).tolist() for k, v in self.statistics.items()}
        return out

    def csv_rows(self) -> list[dict]:
        mf = self.manifest
        rows = []
        for t in mf.tests:
            for a in mf.levels:
                rows.append(
                    {
                        "test": t,
                        "level": f"{a:g}",
                        "rate": f"{self.rates[t][a]:.2f}",
                        "n": mf.n,
                        "case": mf.case,
                        "d": mf.d,
                        "error_law": mf.error_law,
                        "null_law": mf.null_law,
                        "seed": mf.seed,
                    }
                )
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(self.csv_rows())
        return buf.getvalue()


# -- repetitions ----------------------------------------------------------------
def _baseline_stats(tests, y, fm, resid, null, gamma0) -> dict:
    out = {}
    if "mardia_skew" in tests or "mardia_kurt" in tests:
        ms, mk = mardia_tests(y)
        out["mardia_skew"], out["mardia_kurt"] = ms.p_value, mk.p_value
    if "dh" in tests:
        out["dh"] = doornik_hansen(y).p_value
    if "hz" in tests:
        out["hz"] = henze_zirkler(y).p_value
    if "hjm" in tests:
        out["hjm"] = hjm_statistic(resid, gamma0)
    if {"bc1", "bc2", "bc3"} & set(tests):
        b1, b2, b3 = bai_chen_tests(y, fm, null)
        out["bc1"], out["bc2"], out["bc3"] = b1.statistic, b2.statistic, b3.statistic
    return out


def _one_repetition(mf: ExperimentManifest, true_fm: FittedModel, j: int) -> dict | None:
    null, err = mf.null_spec, mf.error_spec
    spec = true_fm.spec
    tests = mf.tests
    cfg = mf.ksd_config
    for attempt in range(4):
        rng = _rng.substream(mf.seed, _rng.DATA, j, attempt)
        try:
            y = models.simulate(true_fm, mf.n, err, rng, check=False)
            fm = models.fit(spec, y)
            resid = models.residuals(fm, y)
            out = _baseline_stats(tests, y, fm, resid, null, mf.gamma0)
            if "ksd" in tests:
                out["ksd"] = test_statistic(resid, null, cfg)
        except SteinGofError:
            continue
        break
    else:
        return None
    boot_tests = [t for t in ("ksd", "hjm") if t in tests]
    if not boot_tests:
        return out
    fns = {"ksd": KsdStatistic(null, cfg), "hjm": HjmStatistic(mf.gamma0)}
    if mf.mode == "warp":
        vals, _ = bootstrap_replicate(fm, null, [fns[t] for t in boot_tests], mf.n, mf.seed, j, tag=_rng.WARP)
        if vals is None:
            return None
        for t, v in zip(boot_tests, vals):
            out[t + "*"] = float(v)
    else:
        seed = int(_rng.substream(mf.seed, _rng.BOOT, j).integers(2**62))
        bcfg = BootstrapConfig(m=mf.m, seed=seed, mode="full")
        stats, _ = bootstrap_distribution(fm, null, [fns[t] for t in boot_tests], mf.n, bcfg)
        for i, t in enumerate(boot_tests):
            out[t + "_p"] = pvalue(out[t], stats[:, i])
    return out


def _run_reps(args) -> list:
    mf, true_fm, indices = args
    return [_one_repetition(mf, true_fm, j) for j in indices]


def _collect(mf: ExperimentManifest, true_fm: FittedModel) -> list:
    idx = list(range(mf.J))
    if mf.workers > 1:
        chunks = [idx[i :: mf.workers] for i in range(mf.workers)]
        with ProcessPoolExecutor(max_workers=mf.workers, mp_context=_SPAWN) as ex:
            parts = list(ex.map(_run_reps, [(mf, true_fm, c) for c in chunks]))
        res: list = [None] * mf.J
        for c, part in zip(chunks, parts):
            for j, r in zip(c, part):
                res[j] = r
        return res
    return _run_reps((mf, true_fm, idx))


def run_experiment(manifest: ExperimentManifest, *, keep_statistics: bool = False) -> ExperimentReport:
    """Run a size/power experiment and aggregate rejection rates (percent)."""
    t0 = time.perf_counter()
    mf = manifest
    true_fm = mf.true_model()
    models.check_stationarity(true_fm)
    raw = _collect(mf, true_fm)
    reps = [r for r in raw if r is not None]
    failures = len(raw) - len(reps)
    if not reps:
        raise SteinGofError("every repetition failed")
    cols = {k: np.array([r[k] for r in reps]) for k in reps[0]}
    rates: dict = {}
    cvs: dict = {}
    size_adj = False
    for t in mf.tests:
        if t in ("ksd", "hjm"):
            if mf.mode == "warp":
                cv = warp_speed_critical_values(cols[t + "*"], mf.levels)
                cvs[t] = cv
                rates[t] = {a: 100.0 * float(np.mean(cols[t] > c)) for a, c in cv.items()}
            else:
                rates[t] = {a: 100.0 * float(np.mean(cols[t + "_p"] <= a)) for a in mf.levels}
        elif t.startswith("bc"):
            cvs[t] = bai_chen_critical_values(int(t[2]))
        else:
            rates[t] = {a: 100.0 * float(np.mean(cols[t] <= a)) for a in mf.levels}
    bc = [t for t in mf.tests if t.startswith("bc")]
    if bc:
        if mf.bc_size_adjust and mf.error_spec != mf.null_spec:
            aux = replace(mf, error_law=mf.null_law, tests=tuple(bc), seed=mf.seed + 7919)
            aux_raw = [r for r in _collect(aux, true_fm) if r is not None]
            for t in bc:
                cvs[t] = warp_speed_critical_values([r[t] for r in aux_raw], mf.levels)
            size_adj = True
        for t in bc:
            rates[t] = {a: 100.0 * float(np.mean(cols[t] > cvs[t][a])) for a in mf.levels}
    return ExperimentReport(
        manifest=mf,
        rates=rates,
        critical_values=cvs,
        failures=failures,
        runtime_seconds=time.perf_counter() - t0,
        size_adjusted=size_adj,
        statistics=cols if keep_statistics else None,
    )


def sensitivity_sweep(base: ExperimentManifest, axis: str, values) -> list[ExperimentReport]:
    """One experiment per value of the subsample ratio (``ratio``) or bandwidth (``sigma``)."""
    reports = []
    for v in values:
        v = float(v)
        if axis == "ratio":
            if not 0 < v <= 1:
                raise ParameterError(f"subsample ratio must lie in (0, 1], got {v}")
            mf = replace(base, n0_ratio=v)
        elif axis == "sigma":
            if not v > 0:
                raise ParameterError(f"sigma must be positive, got {v}")
            mf = replace(base, sigma=v)
        else:
            raise ParameterError(f"sweep axis must be 'ratio' or 'sigma', got {axis!r}")
        reports.append(run_experiment(mf))
    return reports


def sweep_csv(reports: list[ExperimentReport], axis: str) -> str:
    """Plot-ready CSV: the experiment columns plus the axis value."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=(axis,) + CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        v = rep.manifest.n0_ratio if axis == "ratio" else rep.manifest.sigma
        for row in rep.csv_rows():
            w.writerow({axis: f"{(1.0 if v is None else v):g}", **row})
    return buf.getvalue()


# -- presets and manifest files ---------------------------------------------------
PRESETS: dict[str, ExperimentManifest] = {
    "table1-desk": ExperimentManifest(
        case=1, d=2, n=100, J=1000, tests=("ksd", "mardia_skew", "mardia_kurt", "dh", "hz", "hjm", "bc1", "bc2", "bc3")
    ),
    "size-case1-d2": ExperimentManifest(case=1, d=2, n=100, J=1000, tests=("ksd",)),
    "power-t5-case1-d2": ExperimentManifest(case=1, d=2, error_law="t:5", n=500, J=500, tests=("ksd",)),
    "power-sn-case1-d5": ExperimentManifest(case=1, d=5, error_law="sn", n=500, J=500, tests=("ksd",)),
    "size-t5-case2-d2": ExperimentManifest(case=2, d=2, error_law="t:5", null_law="t:5", n=500, J=500, tests=("ksd",)),
    "size-case3-d5-t5": ExperimentManifest(case=3, d=5, error_law="t:5", null_law="t:5", n=500, J=1000, tests=("ksd",)),
    "power-t5-case2-d2": ExperimentManifest(case=2, d=2, error_law="t:5", n=500, J=500, tests=("ksd",)),
}


def load_manifest(path) -> ExperimentManifest:
    """Read a manifest from a JSON or TOML file."""
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        obj = tomllib.loads(text)
    else:
        obj = json.loads(text)
    return ExperimentManifest.from_dict(obj)
