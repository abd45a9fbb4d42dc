"""Scalar and functional regression models."""

from .functional import (
    CoefficientCurve,
    ConcurrentFit,
    FGenFit,
    LagSweep,
    collinearity_grid,
    concurrent_fit,
    fgen_cv_select,
    fgen_fit,
    fgen_lambda_max,
    fgen_path_ratios,
    fgen_stability,
    fos_joint,
    fos_marginal,
    lag_sweep,
)
from .paths import PathFit, StabilitySummary
from .scalar import (
    DesignMatrix,
    ElasticNetFit,
    cv_select,
    elastic_net_fit,
    joint_ols,
    lambda_max,
    marginal_ols,
    partial_r2,
    path_with_ratios,
    pca_first,
    stability,
    standardize,
    vif,
)

__all__ = [
    "CoefficientCurve",
    "ConcurrentFit",
    "FGenFit",
    "LagSweep",
    "collinearity_grid",
    "concurrent_fit",
    "fgen_cv_select",
    "fgen_fit",
    "fgen_lambda_max",
    "fgen_path_ratios",
    "fgen_stability",
    "fos_joint",
    "fos_marginal",
    "lag_sweep",
    "PathFit",
    "StabilitySummary",
    "DesignMatrix",
    "ElasticNetFit",
    "cv_select",
    "elastic_net_fit",
    "joint_ols",
    "lambda_max",
    "marginal_ols",
    "partial_r2",
    "path_with_ratios",
    "pca_first",
    "stability",
    "standardize",
    "vif",
]
