"""Bias-corrected out-of-sample evaluation for data-driven optimization.

The library estimates the first-order optimistic bias of in-sample
objective values directly from cost gradients and influence functions,
alongside the standard resampling baselines (cross-validation, bootstrap,
jackknife) and a reproducible experiment harness.
"""

from .baselines import Pipeline, bc_kfold_cv, bootstrap_debias, jackknife_debias, kfold_cv, loocv
from .core import (
    CostModel,
    Dataset,
    DecisionRule,
    EvaluationReport,
    FitDiagnostics,
    FittedPolicy,
    evaluate_empirical,
    identity_rule,
    load_dataset_csv,
    oracle_expected_bias,
    oracle_true_performance,
)
from .criteria import (
    ParametricModel,
    PoicEstimate,
    Regularizer,
    alo_estimate,
    context_misspecification,
    context_oic,
    misspecification_error,
    oic,
    oic_constrained,
    oic_regularized,
    oic_trace,
    poic,
)
from .influence import (
    Constraint,
    InfluenceEstimate,
    if_constrained,
    if_e2e,
    if_m_estimator,
    if_ols,
    mean_variance_influence,
    sandwich_covariance,
)
from .harness import ExperimentConfig, ResultRow, emit, run_experiment, rng_stream
from .solvers import (
    DroSettings,
    SolverSettings,
    chi2_worst_case,
    fit_chi2_dro,
    fit_constrained,
    implicit_decision_jacobian,
    kde,
    newton_minimize,
    smooth_cost,
    smooth_link,
)

__version__ = "0.1.0"

__all__ = [
    "CostModel",
    "Constraint",
    "Dataset",
    "DecisionRule",
    "DroSettings",
    "EvaluationReport",
    "ExperimentConfig",
    "FitDiagnostics",
    "FittedPolicy",
    "InfluenceEstimate",
    "ParametricModel",
    "Pipeline",
    "PoicEstimate",
    "Regularizer",
    "ResultRow",
    "SolverSettings",
    "alo_estimate",
    "bc_kfold_cv",
    "bootstrap_debias",
    "chi2_worst_case",
    "context_misspecification",
    "context_oic",
    "emit",
    "evaluate_empirical",
    "fit_chi2_dro",
    "fit_constrained",
    "identity_rule",
    "if_constrained",
    "if_e2e",
    "if_m_estimator",
    "if_ols",
    "implicit_decision_jacobian",
    "jackknife_debias",
    "kde",
    "kfold_cv",
    "load_dataset_csv",
    "loocv",
    "mean_variance_influence",
    "misspecification_error",
    "newton_minimize",
    "oic",
    "oic_constrained",
    "oic_regularized",
    "oic_trace",
    "oracle_expected_bias",
    "oracle_true_performance",
    "poic",
    "run_experiment",
    "rng_stream",
    "sandwich_covariance",
    "smooth_cost",
    "smooth_link",
]
