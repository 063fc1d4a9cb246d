"""Preset-driven workflows: fit and apply kriging, build GeoCP intervals, compare variants."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data_io import Dataset, Split, split_811
from .errors import DegenerateVariogram
from .geocp import GeoCPResult, baseline_predict_knn, run_geocp
from .kriging import KrigingModel, KrigingOutput, fit_transform, forward_transform
from .metrics import interval_metrics, regression_metrics
from .presets import PRESET_NAMES, GeoCPPreset, KrigingPreset, resolve_preset
from .spatial import PointSet
from .variogram import (
    EmpiricalVariogram,
    FitReport,
    VariogramKind,
    VariogramSpec,
    empirical_variogram_adaptive,
    empirical_variogram_fixed,
    fit_variogram,
    select_variogram,
)

logger = logging.getLogger(__name__)


def empirical_for_preset(ps: PointSet, preset: KrigingPreset) -> EmpiricalVariogram:
    if preset.binning == "fixed":
        return empirical_variogram_fixed(ps, preset.n_lags, preset.truncate_frac,
                                         preset.include_zero, preset.min_pairs)
    return empirical_variogram_adaptive(ps, preset.binning, preset.trim_frac,
                                        preset.min_pairs, preset.truncate_frac)


def fit_variogram_for_preset(emp: EmpiricalVariogram, preset: KrigingPreset,
                             seed: int = 0) -> FitReport:
    if len(preset.candidates) == 1 and preset.candidates[0] is not VariogramKind.POWERED_EXPONENTIAL:
        return fit_variogram(emp, preset.candidates[0], preset.loss, preset.n_starts,
                             seed=seed, method=preset.optimizer,
                             smart_start=preset.smart_start)
    return select_variogram(emp, preset.candidates, preset.loss, preset.criterion,
                            preset.n_starts, preset.p_grid, seed, preset.optimizer,
                            preset.smart_start)


@dataclass
class FittedKriging:
    model: KrigingModel
    empirical: EmpiricalVariogram
    report: FitReport | None

    def predict(self, targets) -> KrigingOutput:
        return self.model.predict(targets)


def fit_kriging(train: PointSet, preset: KrigingPreset, seed: int = 0) -> FittedKriging:
    """Transform, estimate and fit the variogram, and build the kriging model.

    A fit that collapses to a pure nugget is replaced by an explicit
    pure-nugget model (the kriging predictor then averages neighbours).
    """
    transform = fit_transform(train.values, preset.log_transform)
    z = forward_transform(train.values, transform)
    tps = train.with_values(z)
    emp = empirical_for_preset(tps, preset)
    try:
        report = fit_variogram_for_preset(emp, preset, seed)
        spec = report.spec
    except DegenerateVariogram:
        logger.warning("variogram fit is degenerate; using a pure-nugget model")
        report = None
        kind = preset.candidates[0]
        if kind is VariogramKind.POWERED_EXPONENTIAL:
            kind = VariogramKind.EXPONENTIAL
        spec = VariogramSpec(kind, float(np.mean(emp.gamma)), 0.0,
                             float(emp.lag_centers.max()) or 1.0)
    model = KrigingModel(train, spec, transform, preset.solver)
    return FittedKriging(model, emp, report)


@dataclass
class KrigingRun:
    preset: str
    fitted: FittedKriging
    test_output: KrigingOutput
    val_output: KrigingOutput
    test_metrics: object
    val_metrics: object | None


def run_kriging(data: Dataset, preset: KrigingPreset, split: Split, seed: int = 0) -> KrigingRun:
    train = data.pointset(split.train)
    fitted = fit_kriging(train, preset, seed)
    out_test = fitted.predict(data.coords[split.test])
    out_val = fitted.predict(data.coords[split.val])
    m_test = regression_metrics(out_test.value, data.target[split.test])
    m_val = (regression_metrics(out_val.value, data.target[split.val])
             if len(split.val) else None)
    return KrigingRun(preset.name, fitted, out_test, out_val, m_test, m_val)


@dataclass
class GeoCPRun:
    preset: str
    result: GeoCPResult
    metrics: object
    calib_predictions: np.ndarray
    test_predictions: np.ndarray


def base_predictions(data: Dataset, split: Split, feature_cols=None, k: int = 10,
                     prediction_col: str = "prediction"):
    """Base predictions for the validation and test rows.

    A ``prediction`` column in ``data.extra`` takes precedence; otherwise a
    k-NN regressor on the chosen features plus coordinates is trained on the
    training rows.
    """
    if prediction_col in data.extra:
        pred = data.extra[prediction_col]
        return pred[split.val], pred[split.test]
    feats = data.feature_matrix(feature_cols)
    X = np.column_stack([feats, data.coords])
    y = data.target
    p_val = baseline_predict_knn(X[split.train], y[split.train], X[split.val], k)
    p_test = baseline_predict_knn(X[split.train], y[split.train], X[split.test], k)
    return p_val, p_test


def run_geocp_preset(data: Dataset, preset: GeoCPPreset, split: Split, alpha: float = 0.1,
                     p_val=None, p_test=None, **base_kw) -> GeoCPRun:
    """Calibrate on the validation rows, build intervals on the test rows."""
    if p_val is None or p_test is None:
        p_val, p_test = base_predictions(data, split, **base_kw)
    res = run_geocp(p_val, data.target[split.val], data.coords[split.val],
                    p_test, data.coords[split.test], alpha, preset.policy,
                    preset.method, preset.level_rule)
    m = interval_metrics(res.lower, res.upper, data.target[split.test], alpha)
    return GeoCPRun(preset.name, res, m, np.asarray(p_val), np.asarray(p_test))


def compare_kriging(data: Dataset, seed: int = 0, names=PRESET_NAMES) -> list[dict]:
    split = split_811(len(data), seed)
    rows = []
    for name in names:
        run = run_kriging(data, resolve_preset("kriging", name), split, seed)
        m = run.test_metrics
        rows.append({"preset": name, "rmse": m.rmse, "mae": m.mae, "r2": m.r2})
    return rows


def compare_geocp(data: Dataset, seed: int = 0, alpha: float = 0.1, names=PRESET_NAMES,
                  **base_kw) -> list[dict]:
    split = split_811(len(data), seed)
    p_val, p_test = base_predictions(data, split, **base_kw)
    rows = []
    for name in names:
        run = run_geocp_preset(data, resolve_preset("geocp", name), split, alpha, p_val, p_test)
        m = run.metrics
        rows.append({
            "preset": name,
            "average_interval_size": m.mean_interval_size,
            "interval_score": m.mean_interval_score,
            "coverage": m.empirical_coverage,
            "coverage_deviation": m.coverage_deviation,
        })
    return rows
