"""Ordinary kriging with adaptive variogram fitting, and geographically
weighted conformal prediction intervals."""

from .data_io import (
    Dataset,
    Split,
    read_points_csv,
    split_811,
    synth_gaussian_field,
    write_results_csv,
)
from .geocp import (
    BandwidthSearch,
    CalibrationScores,
    KernelPolicy,
    PredictionInterval,
    baseline_predict_knn,
    geo_weights,
    nonconformity_abs,
    optimize_bandwidth,
    quantile_level,
    run_geocp,
    weighted_quantile_interpolated,
    weighted_quantile_stepwise,
)
from .kriging import (
    Fallback,
    KrigingModel,
    KrigingPrediction,
    Regularization,
    SolverPolicy,
    TransformState,
    adaptive_log_offset,
    assemble_ok_system,
    back_transform,
    condition_adaptive_epsilon,
    forward_transform,
    predict,
    solve_kriging_system,
)
from .metrics import interval_metrics, interval_score, regression_metrics
from .presets import resolve_preset
from .spatial import KnnIndex, Point2, PointSet, knn_query, pairwise_distances
from .variogram import (
    Criterion,
    EmpiricalVariogram,
    FitReport,
    Loss,
    VariogramKind,
    VariogramSpec,
    auto_n_lags,
    empirical_variogram_adaptive,
    empirical_variogram_fixed,
    fit_variogram,
    information_criteria,
    model_eval,
    select_variogram,
)

__version__ = "0.1.0"
