"""Bagging inclusion-probability sequential thresholding least squares."""

from ._backend import COMPILED
from .core import (
    Dataset,
    DesignStats,
    LinearFit,
    design_stats,
    fit_ols,
    fit_restricted_ols,
    read_dataset_csv,
    standardize,
    write_dataset_csv,
)
from .ensemble import (
    EnsembleDistribution,
    InclusionProfile,
    ResamplePlan,
    bip_fit,
    inclusion_gap,
    inclusion_probability,
    oob_weights,
    residual_bootstrap_uq,
    run_replicates,
    select_support,
)
from .sparse import SparseFit, ThresholdRule, lasso_fit, stls_fit, threshold_support

__version__ = "0.1.0"

__all__ = [
    "COMPILED",
    "Dataset",
    "DesignStats",
    "EnsembleDistribution",
    "InclusionProfile",
    "LinearFit",
    "ResamplePlan",
    "SparseFit",
    "ThresholdRule",
    "bip_fit",
    "design_stats",
    "fit_ols",
    "fit_restricted_ols",
    "inclusion_gap",
    "inclusion_probability",
    "lasso_fit",
    "oob_weights",
    "read_dataset_csv",
    "residual_bootstrap_uq",
    "run_replicates",
    "select_support",
    "standardize",
    "stls_fit",
    "threshold_support",
    "write_dataset_csv",
]
