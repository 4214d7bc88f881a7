"""Prevalence estimation under prior probability shift."""

from .core import (
    CsvSchema,
    DataError,
    EstimationError,
    ExternalScore,
    KernelScore,
    LogisticScore,
    RawDataset,
    ScoreFunction,
    ScoredDataset,
    fit_logistic,
    fit_logistic_ovr,
    load_csv,
    rng_from,
    score_dataset,
)
from .estimators import (
    CombinedEstimate,
    SimplexEstimate,
    ThetaEstimate,
    classify_and_count,
    combined_estimate,
    em_estimate,
    empirical_mse,
    multiclass_ratio,
    project_simplex,
    ratio_ci,
    ratio_estimate,
    ratio_variance,
)
from .regression import (
    RegressionCurve,
    cc_regress,
    cv_bandwidth,
    nadaraya_watson,
    ratio_regress,
)
from .rkhs import (
    KernelMatrices,
    KernelSpec,
    RkhsSelection,
    build_matrices,
    median_bandwidth,
    select_g,
    solve_weights,
    stratified_split,
)
from .shift_test import KernelDensity, ShiftTestResult, kde_fit, shift_test, t_statistic
from .simulate import (
    ExperimentReport,
    ScenarioSpec,
    generate,
    null_gamma,
    run_combined_study,
    run_coverage_study,
    run_mse_study,
    run_multiclass_study,
    run_power_study,
    run_regression_study,
    symmetric_gaussian,
    table_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "CombinedEstimate",
    "CsvSchema",
    "DataError",
    "EstimationError",
    "ExperimentReport",
    "ExternalScore",
    "KernelDensity",
    "KernelMatrices",
    "KernelScore",
    "KernelSpec",
    "LogisticScore",
    "RawDataset",
    "RegressionCurve",
    "RkhsSelection",
    "ScenarioSpec",
    "ScoreFunction",
    "ScoredDataset",
    "ShiftTestResult",
    "SimplexEstimate",
    "ThetaEstimate",
    "build_matrices",
    "cc_regress",
    "classify_and_count",
    "combined_estimate",
    "cv_bandwidth",
    "em_estimate",
    "empirical_mse",
    "fit_logistic",
    "fit_logistic_ovr",
    "generate",
    "kde_fit",
    "load_csv",
    "median_bandwidth",
    "multiclass_ratio",
    "nadaraya_watson",
    "null_gamma",
    "project_simplex",
    "ratio_ci",
    "ratio_estimate",
    "ratio_regress",
    "ratio_variance",
    "rng_from",
    "run_combined_study",
    "run_coverage_study",
    "run_mse_study",
    "run_multiclass_study",
    "run_power_study",
    "run_regression_study",
    "score_dataset",
    "select_g",
    "shift_test",
    "solve_weights",
    "stratified_split",
    "symmetric_gaussian",
    "t_statistic",
    "table_scenario",
]
