"""Oracle-backed statistical experiments on 1D targets and scene slices."""
from .experiments import (
    ChainTestResult, TwoPixelConfig, TwoPixelResult, UnbiasednessResult, chain_distribution_test,
    run_reuse_trial, run_two_pixel_covariance, run_unbiasedness_trial, slice_distribution_test,
    variance_neutrality,
)
from .oracle import quad_oracle
from .targets import AnalyticTarget, named_target

__all__ = [
    "ChainTestResult", "TwoPixelConfig", "TwoPixelResult", "UnbiasednessResult",
    "chain_distribution_test", "run_reuse_trial", "run_two_pixel_covariance",
    "run_unbiasedness_trial", "slice_distribution_test", "variance_neutrality",
    "quad_oracle", "AnalyticTarget", "named_target",
]
