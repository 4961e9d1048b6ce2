"""Competing goodness-of-fit tests."""

from .bai_chen import PUBLISHED_CV as BAI_CHEN_PUBLISHED_CV
from .bai_chen import bai_chen_tests
from .bai_chen import critical_values as bai_chen_critical_values
from .hjm import HjmStatistic, hjm_statistic, hjm_test
from .normality import doornik_hansen, henze_zirkler, mardia_tests
from .result import BaselineResult

__all__ = [
    "BAI_CHEN_PUBLISHED_CV",
    "BaselineResult",
    "HjmStatistic",
    "bai_chen_critical_values",
    "bai_chen_tests",
    "doornik_hansen",
    "henze_zirkler",
    "hjm_statistic",
    "hjm_test",
    "mardia_tests",
]
