from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class BaselineResult:
    """Outcome of a baseline test.

    Attributes
    ----------
    name : str
    statistic : float
    p_value : float or None
        ``None`` only when a bootstrap-calibrated test was run without
        replicates.
    reference : str
        One of ``chi2``, ``normal``, ``lognormal``, ``bootstrap``,
        ``tabulated``.
    params : dict
        Parameters of the reference law (e.g. ``{"df": 4}``).
    critical_values : dict, optional
        Level -> critical value, for tests decided against a table.
    """

    name: str
    statistic: float
    p_value: float | None
    reference: str
    params: dict = field(default_factory=dict)
    critical_values: dict | None = None

    def reject(self, level: float) -> bool:
        """Decision at `level`; tabulated critical values take precedence over the p-value."""
        if self.critical_values is not None and level in self.critical_values:
            return self.statistic > self.critical_values[level]
        if self.p_value is None:
            raise ValueError(f"{self.name}: no p-value available")
        return self.p_value <= level

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reference": self.reference,
            "params": self.params,
        }
        if self.critical_values is not None:
            out["critical_values"] = {str(k): v for k, v in self.critical_values.items()}
        return out
