"""Adaptive sum/max/Cauchy-combination tests for high-dimensional quantile regression."""

from .numlin import DistributionKind, base_quantile, project_out, psd_sqrt, std_normal_cdf
from .qr_core import Dataset, QuantileFit, check_loss, fit_nuisance, quantile_score
from .stats import (
    CombinationRule,
    TestResult,
    combine,
    max_pvalue,
    max_statistic,
    run_full_test,
    sum_pvalue,
    sum_statistic,
    trace_sigma2_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "CombinationRule", "Dataset", "DistributionKind", "QuantileFit", "TestResult",
    "base_quantile", "check_loss", "combine", "fit_nuisance", "max_pvalue", "max_statistic",
    "project_out", "psd_sqrt", "quantile_score", "run_full_test", "std_normal_cdf",
    "sum_pvalue", "sum_statistic", "trace_sigma2_estimate",
]
