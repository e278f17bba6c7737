"""Treatment-effect estimation that weights an experimental and an observational
loss, with the weight chosen by cross-validation on the experiment."""

from .baselines import BaselineKind, BaselineResult, exp_only, obs_only, pool_all, ttest_then_pool
from .cv import (
    CvResult,
    EstimatorConfig,
    FoldPlan,
    Mode,
    cv_objective,
    cvci_estimate,
    default_grid,
    make_folds,
    select_lambda,
)
from .data import CausalDataset, DesignMatrix, ModelParams, Source, attach_treated, concat, design_matrix
from .erm import CustomLoss, Ridge, SquaredError, WeightedFit, fit_generic, fit_linear, fit_no_covariate
from .errors import CvciError
from .experimental import EstimatorKind, ExpEstimate, estimate, fit_ols
from .io import ResultDocument, emit, load_csv, read_document

__version__ = "0.1.0"

__all__ = [
    "BaselineKind", "BaselineResult", "exp_only", "obs_only", "pool_all", "ttest_then_pool",
    "CvResult", "EstimatorConfig", "FoldPlan", "Mode", "cv_objective", "cvci_estimate",
    "default_grid", "make_folds", "select_lambda", "CausalDataset", "DesignMatrix", "ModelParams",
    "Source", "attach_treated", "concat", "design_matrix", "CustomLoss", "Ridge", "SquaredError",
    "WeightedFit", "fit_generic", "fit_linear", "fit_no_covariate", "CvciError", "EstimatorKind",
    "ExpEstimate", "estimate", "fit_ols", "ResultDocument", "emit", "load_csv", "read_document",
]
