"""JSON import and export of fitted models.

Schema (version 1)::

    {
      "schema_version": 1,
      "model": {"kind": "var-ccc", "d": 3, "p": 3},
      "params": {"M": [...], "A": [[[...]]], "W": [...], "B": [[...]],
                 "Gamma": [[...]], "R": [[...]]},
      "mask": {"A": [[[0, 1, ...]]], ...}            # optional, 1 = estimated
    }

Matrices are nested row-major lists. ``A`` is a list of the p lag matrices.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import ParameterError
from .spec import FittedModel, ModelMask, ModelParams, ModelSpec

SCHEMA_VERSION = 1


def model_to_dict(fm: FittedModel) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "model": {"kind": fm.spec.kind, "d": fm.spec.d, "p": fm.spec.p},
        "params": fm.params.to_dict(),
        "init_policy": fm.init_policy,
    }
    if fm.spec.mask is not None:
        out["mask"] = fm.spec.mask.to_dict()
    if fm.info:
        out["info"] = {k: v for k, v in fm.info.items() if k != "trace"}
    return out


def model_from_dict(obj: dict) -> FittedModel:
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParameterError(f"unsupported model schema_version {version!r}")
    try:
        m = obj["model"]
        mask = ModelMask.from_dict(obj["mask"]) if obj.get("mask") else None
        spec = ModelSpec(m["kind"], int(m["d"]), int(m.get("p", 0)), mask)
        params = ModelParams.from_dict(obj["params"])
    except KeyError as exc:
        raise ParameterError(f"model JSON is missing field {exc}") from exc
    return FittedModel(spec, params, init_policy=obj.get("init_policy", "sample-variance"))


def save_model(fm: FittedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(fm), indent=2) + "\n")


def load_model(path) -> FittedModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def load_mask(path) -> ModelMask:
    """Read a mask file: a JSON object with any of M, A, B, Gamma (1 = estimated)."""
    obj = json.loads(Path(path).read_text())
    if "mask" in obj and isinstance(obj["mask"], dict):
        obj = obj["mask"]
    return ModelMask.from_dict(obj)
