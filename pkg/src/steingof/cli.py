"""Command-line interface: ``steingof {fit,test,simulate,experiment,sweep}``.

Results are JSON (or CSV for Monte Carlo tables) on stdout or in ``--out``.
Failures print ``{"error": {...}}`` to stderr and exit with

* 2 for configuration errors,
* 3 for data errors,
* 4 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, models, simharness
from .baselines import bai_chen_tests, doornik_hansen, henze_zirkler, hjm_test, mardia_tests
from .bootstrap import BootstrapConfig
from .distributions import DistributionSpec, fit_distribution, parse_spec
from .errors import (
    BootstrapError,
    DegenerateSampleError,
    DomainError,
    FitError,
    NumericError,
    ParameterError,
    SimulationError,
    SingularMatrixError,
    SteinGofError,
)
from .ksd import KsdConfig, run_ksd_test

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
BASELINE_TESTS = ("mardia", "dh", "hz", "hjm", "bc")


class ConfigError(Exception):
    """Invalid command-line configuration."""


class DataError(Exception):
    """Unreadable or malformed input data."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


# -- data ingestion ---------------------------------------------------------------
def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def ingest_csv(path) -> np.ndarray:
    """Read a rectangular numeric CSV (optional header row) into an ``(n, d)`` matrix.

    Raises
    ------
    DataError
        On a missing or empty file, ragged rows, non-numeric or non-finite
        cells, or fewer than two data rows. Line and column numbers are
        1-based.
    """
    p = Path(path)
    if not p.is_file():
        raise DataError(f"data file not found: {path}")
    with p.open(newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"data file is empty: {path}", line=1)
    if not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]  # header
    if len(rows) < 2:
        raise DataError("need at least two data rows", line=rows[0][0] if rows else 1)
    d = len(rows[0][1])
    out = np.empty((len(rows), d))
    for t, (line, row) in enumerate(rows):
        if len(row) != d:
            raise DataError(f"line {line}: expected {d} columns, found {len(row)}", line=line)
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"line {line}, column {j + 1}: non-numeric value {cell.strip()!r}", line, j + 1) from None
            if not math.isfinite(v):
                raise DataError(f"line {line}, column {j + 1}: non-finite value {cell.strip()!r}", line, j + 1)
            out[t, j] = v
    return out


def write_csv_matrix(path, y: np.ndarray) -> None:
    d = y.shape[1]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"y{j + 1}" for j in range(d)])
        w.writerows([[repr(float(v)) for v in row] for row in y])


# -- argument resolution -------------------------------------------------------------
def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("STEINGOF_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"STEINGOF_SEED must be an integer, got {env!r}") from None


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    import numba

    if n < 1:
        raise ConfigError("--threads must be positive")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _model_spec(args, d: int) -> models.ModelSpec:
    mask = models.load_mask(args.mask) if args.mask else None
    return models.ModelSpec.parse(args.model, d, mask)


def _resolve_null(text: str, resid: np.ndarray) -> DistributionSpec:
    """``t:mle`` and ``sn:mle`` fit the law to the residuals; other strings parse directly."""
    t = text.strip().lower()
    if t in ("t:mle", "sn:mle"):
        return fit_distribution(t.split(":")[0], resid)
    return parse_spec(t, resid.shape[1])


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands ------------------------------------------------------------------------
def cmd_fit(args) -> int:
    y = ingest_csv(args.data)
    spec = _model_spec(args, y.shape[1])
    fm = models.fit(spec, y)
    out = {
        "schema_version": SCHEMA_VERSION,
        "config": {"command": "fit", "data": str(args.data), "model": spec.to_string(), "mask": args.mask},
        **{k: v for k, v in models.model_to_dict(fm).items() if k != "schema_version"},
    }
    _emit(out, args.out)
    return EXIT_OK


def cmd_test(args) -> int:
    y = ingest_csv(args.data)
    d = y.shape[1]
    spec = _model_spec(args, d)
    seed = _seed(args)
    kcfg = KsdConfig.from_strings(args.n0, args.sigma)
    if args.boot < 0:
        raise ConfigError("--boot must be non-negative")
    bcfg = BootstrapConfig(m=args.boot, seed=seed, workers=args.workers) if args.boot > 0 else None
    tests = [t.strip() for t in args.tests.split(",") if t.strip()]
    unknown = set(tests) - {"ksd", *BASELINE_TESTS}
    if unknown:
        raise ConfigError(f"unknown tests {sorted(unknown)}; choose from ksd, {', '.join(BASELINE_TESTS)}")
    nulls = args.null or ["normal"]

    fm = models.fit(spec, y)
    resid = models.residuals(fm, y)
    results = []
    for text in nulls:
        null = _resolve_null(text, resid)
        entry = {"null_input": text, "null": null.to_string()}
        if "ksd" in tests:
            res = run_ksd_test(y, spec, null, kcfg, bcfg, fitted=fm)
            entry["ksd"] = res.to_dict()
        if "bc" in tests:
            if d != 2 or null.kind not in ("normal", "t"):
                raise ConfigError("the Bai-Chen tests need d = 2 and a normal or t null")
            entry["bai_chen"] = [r.to_dict() for r in bai_chen_tests(y, fm, null)]
        results.append(entry)

    baselines = {}
    if "mardia" in tests:
        baselines["mardia"] = [r.to_dict() for r in mardia_tests(resid)]
    if "dh" in tests:
        baselines["dh"] = doornik_hansen(resid).to_dict()
    if "hz" in tests:
        baselines["hz"] = henze_zirkler(resid).to_dict()
    if "hjm" in tests:
        hcfg = BootstrapConfig(m=args.boot or 199, seed=seed, workers=args.workers)
        baselines["hjm"] = hjm_test(y, spec, bootstrap_cfg=hcfg, fitted=fm).to_dict()

    out = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "command": "test",
            "data": str(args.data),
            "n": int(y.shape[0]),
            "d": d,
            "model": spec.to_string(),
            "mask": args.mask,
            "nulls": nulls,
            "tests": tests,
            "n0": args.n0,
            "sigma": args.sigma,
            "boot": args.boot,
            "seed": seed,
        },
        "model": models.model_to_dict(fm),
        "results": results,
    }
    if baselines:
        out["baselines"] = baselines
    _emit(out, args.out)
    return EXIT_OK


def _simulation_model(args) -> models.FittedModel:
    if args.fitted:
        return models.load_model(args.fitted)
    preset = args.preset
    if preset == "application":
        return simharness.application_model()
    if preset and preset.startswith("case"):
        case, _, dim = preset[4:].partition("-d")
        try:
            return simharness.case_model(int(case), int(dim or 2))
        except ValueError:
            pass
    raise ConfigError("simulate needs --fitted MODEL.json or --preset {case1-d2,...,case3-d5,application}")


def cmd_simulate(args) -> int:
    fm = _simulation_model(args)
    seed = _seed(args)
    law = simharness.resolve_law(args.errors, fm.spec.d)
    from . import _rng

    y = models.simulate(fm, args.n, law, _rng.substream(seed, _rng.DATA, 0))
    if not args.out:
        raise ConfigError("simulate needs --out FILE.csv")
    write_csv_matrix(args.out, y)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "config": {"command": "simulate", "n": args.n, "errors": law.to_string(), "seed": seed, "preset": args.preset, "fitted": args.fitted},
        "model": models.model_to_dict(fm),
        "output": str(args.out),
    }
    sys.stdout.write(json.dumps(meta, indent=2) + "\n")
    return EXIT_OK


def _manifest(args) -> simharness.ExperimentManifest:
    if args.manifest:
        mf = simharness.load_manifest(args.manifest)
    elif args.preset:
        if args.preset not in simharness.PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; available: {', '.join(sorted(simharness.PRESETS))}")
        mf = simharness.PRESETS[args.preset]
    else:
        raise ConfigError(f"give --manifest FILE or --preset NAME (available: {', '.join(sorted(simharness.PRESETS))})")
    kw = {}
    if args.seed is not None or os.environ.get("STEINGOF_SEED") is not None:
        kw["seed"] = _seed(args)
    if args.reps is not None:
        kw["J"] = args.reps
    if args.full_scale:
        kw["J"] = 10_000
    if args.workers:
        kw["workers"] = args.workers
    return replace(mf, **kw)


def cmd_experiment(args) -> int:
    mf = _manifest(args)
    report = simharness.run_experiment(mf)
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    _emit_text(report.to_csv(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    mf = _manifest(args)
    try:
        values = [float(v) for v in args.values.split(",")]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    reports = simharness.sensitivity_sweep(mf, args.axis, values)
    if args.json_out:
        Path(args.json_out).write_text(json.dumps([r.to_dict() for r in reports], indent=2) + "\n")
    _emit_text(simharness.sweep_csv(reports, args.axis), args.out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="steingof", description="Kernelized Stein discrepancy goodness-of-fit tests for multivariate time series models.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (falls back to $STEINGOF_SEED, then 0)")
    common.add_argument("--threads", type=int, default=None, help="threads for the statistic kernel (default: all cores)")
    common.add_argument("--workers", type=int, default=1, help="bootstrap / repetition worker processes")
    common.add_argument("--out", default=None, help="output file (default: stdout)")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--data", required=True, help="CSV with one column per series, rows in time order")
    model.add_argument("--model", default="const", help="const | var:P | ccc | var-ccc:P | identity")
    model.add_argument("--mask", default=None, help="JSON sparsity mask (1 = estimated, 0 = fixed at zero)")

    p = sub.add_parser("fit", parents=[common, model], help="fit a model and write its parameters as JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", parents=[common, model], help="test the error law of a fitted model")
    p.add_argument("--null", action="append", help="null law (repeatable): normal, t:NU, sn:G1,..., st:NU:XI1,..., t:mle, sn:mle")
    p.add_argument("--n0", default="all", help="all | ratio:R | fixed:N | power:K0,EPS")
    p.add_argument("--sigma", default="median", help="median | fixed:S")
    p.add_argument("--boot", type=int, default=1000, help="bootstrap replicates (0 skips the p-value)")
    p.add_argument("--tests", default="ksd", help="comma list of ksd, mardia, dh, hz, hjm, bc")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", parents=[common], help="simulate a series to CSV")
    p.add_argument("--fitted", default=None, help="model JSON written by 'fit'")
    p.add_argument("--preset", default=None, help="case1-d2 ... case3-d5 or application")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--errors", default="normal", help="error law string (sn and st alone select the case presets)")
    p.set_defaults(func=cmd_simulate)

    for name, func in (("experiment", cmd_experiment), ("sweep", cmd_sweep)):
        p = sub.add_parser(name, parents=[common], help=f"Monte Carlo {name}; CSV to --out, JSON to --json-out")
        p.add_argument("--manifest", default=None, help="JSON or TOML manifest")
        p.add_argument("--preset", default=None, help="named manifest: " + ", ".join(sorted(simharness.PRESETS)))
        p.add_argument("--reps", type=int, default=None, help="override the number of repetitions J")
        p.add_argument("--full-scale", action="store_true", help="J = 10000")
        p.add_argument("--json-out", default=None)
        if name == "sweep":
            p.add_argument("--axis", choices=("ratio", "sigma"), required=True)
            p.add_argument("--values", required=True, help="comma-separated axis values")
        p.set_defaults(func=func)
    return ap


def _error(kind: str, exc: BaseException, code: int, **extra) -> int:
    payload = {"error": {"type": kind, "exception": type(exc).__name__, "message": str(exc), "exit_code": code, **extra}}
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        _set_threads(args.threads)
        return args.func(args)
    except DataError as exc:
        return _error("data", exc, EXIT_DATA, line=exc.line, column=exc.column)
    except (ConfigError, ParameterError, json.JSONDecodeError) as exc:
        return _error("config", exc, EXIT_CONFIG)
    except (NumericError, FitError, SimulationError, BootstrapError, SingularMatrixError) as exc:
        return _error("numeric", exc, EXIT_NUMERIC, index=getattr(exc, "index", None))
    except (DomainError, DegenerateSampleError, FileNotFoundError) as exc:
        return _error("data", exc, EXIT_DATA)
    except SteinGofError as exc:
        return _error("numeric", exc, EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
