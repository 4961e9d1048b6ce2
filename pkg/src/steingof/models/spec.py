"""Model descriptions, parameter containers and masks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ParameterError

MODEL_KINDS = ("identity", "const", "var", "ccc", "var-ccc")


@dataclass(frozen=True)
class ModelMask:
    """Which coefficients are estimated (True) and which are fixed at zero (False).

    Only the entries that can be meaningfully zero are maskable: the
    intercept ``M``, the VAR lag matrices ``A`` and the GARCH matrices ``B``
    and ``Gamma``. ``W`` stays positive and ``R`` stays free.
    """

    M: np.ndarray | None = None
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    Gamma: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k).astype(int).tolist() for k in ("M", "A", "B", "Gamma") if getattr(self, k) is not None}

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelMask":
        unknown = set(obj) - {"M", "A", "B", "Gamma"}
        if unknown:
            raise ParameterError(f"unknown mask entries {sorted(unknown)}")
        return cls(**{k: np.asarray(v).astype(bool) for k, v in obj.items()})

    @classmethod
    def from_params(cls, params: "ModelParams", tol: float = 0.0) -> "ModelMask":
        """Mask whose free entries are the nonzero entries of `params`."""
        def nz(a):
            return None if a is None else np.abs(a) > tol

        return cls(M=nz(params.M), A=nz(params.A), B=nz(params.B), Gamma=nz(params.Gamma))


@dataclass(frozen=True)
class ModelSpec:
    """Structure of the conditional mean / covariance model.

    Parameters
    ----------
    kind : {"identity", "const", "var", "ccc", "var-ccc"}
        ``identity`` fixes M = 0 and C = I. ``const`` has constant mean and
        covariance. ``var`` is a VAR(p) with constant error covariance.
        ``ccc`` is a zero-mean CCC-GARCH(1,1). ``var-ccc`` is a VAR(p) whose
        errors follow a CCC-GARCH(1,1).
    d : int
    p : int
        VAR order; 0 for the kinds without lags.
    mask : ModelMask, optional
    """

    kind: str
    d: int
    p: int = 0
    mask: ModelMask | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ParameterError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        if self.d < 1:
            raise ParameterError("d must be >= 1")
        if self.kind in ("var", "var-ccc"):
            if self.p < 1:
                raise ParameterError("VAR kinds need p >= 1")
        elif self.p != 0:
            raise ParameterError(f"{self.kind!r} takes no lag order")
        if self.mask is not None:
            self._check_mask(self.mask)

    def _check_mask(self, mask: ModelMask):
        d, p = self.d, self.p
        shapes = {"M": (d,), "A": (p, d, d), "B": (d, d), "Gamma": (d, d)}
        for name, shape in shapes.items():
            arr = getattr(mask, name)
            if arr is None:
                continue
            if name not in self.param_names:
                raise ParameterError(f"mask entry {name} does not apply to model {self.kind!r}")
            if arr.shape != shape:
                raise ParameterError(f"mask {name} has shape {arr.shape}, expected {shape}")

    @property
    def has_var(self) -> bool:
        return self.kind in ("var", "var-ccc")

    @property
    def has_garch(self) -> bool:
        return self.kind in ("ccc", "var-ccc")

    @property
    def param_names(self) -> tuple[str, ...]:
        return {
            "identity": (),
            "const": ("M", "C"),
            "var": ("M", "A", "C"),
            "ccc": ("W", "B", "Gamma", "R"),
            "var-ccc": ("M", "A", "W", "B", "Gamma", "R"),
        }[self.kind]

    @property
    def n_lost(self) -> int:
        """Leading observations consumed as lags (no residual for them)."""
        return self.p

    def free(self, name: str) -> np.ndarray:
        """Boolean mask of estimated entries for parameter `name`."""
        d, p = self.d, self.p
        shape = {"M": (d,), "A": (p, d, d), "B": (d, d), "Gamma": (d, d)}[name]
        arr = None if self.mask is None else getattr(self.mask, name)
        return np.ones(shape, dtype=bool) if arr is None else arr

    def with_mask(self, mask: ModelMask | None) -> "ModelSpec":
        return replace(self, mask=mask)

    def to_string(self) -> str:
        return f"{self.kind}:{self.p}" if self.has_var else self.kind

    @classmethod
    def parse(cls, text: str, d: int, mask: ModelMask | None = None) -> "ModelSpec":
        """Parse ``identity``, ``const``, ``var:P``, ``ccc`` or ``var-ccc:P``."""
        head, _, rest = text.strip().lower().partition(":")
        if head in ("var", "var-ccc"):
            try:
                p = int(rest)
            except ValueError as exc:
                raise ParameterError(f"model {text!r} needs an integer lag order, e.g. {head}:3") from exc
            return cls(head, d, p, mask)
        if rest:
            raise ParameterError(f"model {head!r} takes no argument")
        return cls(head, d, 0, mask)


@dataclass(frozen=True)
class ModelParams:
    """Parameter values; entries not used by a model kind stay ``None``.

    Attributes
    ----------
    M : ndarray (d,)
        Intercept.
    A : ndarray (p, d, d)
        VAR lag matrices, ``A[k]`` multiplies ``Y_{t-k-1}``.
    C : ndarray (d, d)
        Constant error covariance.
    W : ndarray (d,)
    B : ndarray (d, d)
        ARCH matrix acting on squared lagged errors.
    Gamma : ndarray (d, d)
        GARCH matrix acting on lagged variances.
    R : ndarray (d, d)
        Constant conditional correlation.
    """

    M: np.ndarray | None = None
    A: np.ndarray | None = None
    C: np.ndarray | None = None
    W: np.ndarray | None = None
    B: np.ndarray | None = None
    Gamma: np.ndarray | None = None
    R: np.ndarray | None = None

    def __post_init__(self):
        for name in ("M", "A", "C", "W", "B", "Gamma", "R"):
            val = getattr(self, name)
            if val is not None:
                arr = np.array(val, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    def validate(self, spec: ModelSpec) -> None:
        d, p = spec.d, spec.p
        shapes = {"M": (d,), "A": (p, d, d), "C": (d, d), "W": (d,), "B": (d, d), "Gamma": (d, d), "R": (d, d)}
        for name in spec.param_names:
            val = getattr(self, name)
            if val is None:
                raise ParameterError(f"model {spec.kind!r} needs parameter {name}")
            if val.shape != shapes[name]:
                raise ParameterError(f"parameter {name} has shape {val.shape}, expected {shapes[name]}")
            if not np.all(np.isfinite(val)):
                raise ParameterError(f"parameter {name} is not finite")
        if "C" in spec.param_names:
            _check_pd(self.C, "C")
        if spec.has_garch:
            if np.any(self.W <= 0):
                raise ParameterError("W must be positive")
            if np.any(self.B < 0) or np.any(self.Gamma < 0):
                raise ParameterError("B and Gamma must be nonnegative")
            if not np.allclose(np.diag(self.R), 1.0, atol=1e-10):
                raise ParameterError("R must have unit diagonal")
            _check_pd(self.R, "R")

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("M", "A", "C", "W", "B", "Gamma", "R") if getattr(self, k) is not None}

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelParams":
        unknown = set(obj) - {"M", "A", "C", "W", "B", "Gamma", "R"}
        if unknown:
            raise ParameterError(f"unknown parameter names {sorted(unknown)}")
        return cls(**obj)


def _check_pd(mat: np.ndarray, name: str) -> None:
    if not np.allclose(mat, mat.T, atol=1e-10):
        raise ParameterError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() <= 0:
        raise ParameterError(f"{name} must be positive definite")


@dataclass(frozen=True)
class FittedModel:
    """A model together with parameter values.

    ``info`` holds estimation diagnostics such as the QMLE log-likelihood
    and the optimizer status; it is empty for parameters supplied by hand.
    """

    spec: ModelSpec
    params: ModelParams
    init_policy: str = "sample-variance"
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.params.validate(self.spec)
