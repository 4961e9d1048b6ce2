"""Kernelized Stein discrepancy tests for the error law of multivariate time-series models."""

from .distributions import DistributionSpec, log_density, parse_spec, sample, score, skew_normal_params
from .ksd import KsdConfig, TestResult, ksd_statistic, median_bandwidth, run_ksd_test
from .stein_kernel import KernelConfig, kernel, kernel_grads, u_stein

__version__ = "0.1.0"

__all__ = [
    "DistributionSpec",
    "KernelConfig",
    "KsdConfig",
    "TestResult",
    "kernel",
    "kernel_grads",
    "ksd_statistic",
    "log_density",
    "median_bandwidth",
    "parse_spec",
    "run_ksd_test",
    "sample",
    "score",
    "skew_normal_params",
    "u_stein",
]
