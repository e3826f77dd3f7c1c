"""
fastcmh: significant interval mining conditioned on a categorical covariate.

Cochran-Mantel-Haenszel tests over every window of binary sequences, with
Tarone's testability correction and exact search-space pruning.
"""

from fastcmh._common import (
    ConfigError,
    DatasetError,
    FastCMHError,
    GridExhaustedError,
    InfeasibleSpecError,
    SearchSpaceTooLargeError,
)
from fastcmh.baselines import METHOD_FUNCTIONS, MethodResult, bonferroni_cmh, fais_chi2, fais_cmh, fastcmh, run_method
from fastcmh.interval_miner import Dataset, Interval, filter_overlaps

__version__ = "1.0.0"
