"""Conditional mean / covariance models: VAR(p), CCC-GARCH(1,1) and combinations."""

from .api import BURN_IN, check_stationarity, conditional_moments, fit, residuals, simulate
from .io import SCHEMA_VERSION, load_mask, load_model, model_from_dict, model_to_dict, save_model
from .linalg import inv_sqrt_pd, sqrt_pd
from .spec import MODEL_KINDS, FittedModel, ModelMask, ModelParams, ModelSpec
from .var import spectral_radius

__all__ = [
    "BURN_IN",
    "MODEL_KINDS",
    "SCHEMA_VERSION",
    "FittedModel",
    "ModelMask",
    "ModelParams",
    "ModelSpec",
    "check_stationarity",
    "conditional_moments",
    "fit",
    "inv_sqrt_pd",
    "load_mask",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "residuals",
    "save_model",
    "simulate",
    "spectral_radius",
    "sqrt_pd",
]
