"""Point-prediction and prediction-interval evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidBounds, LengthMismatch

WIDTH_FLOOR = 1e-6


@dataclass(frozen=True)
class RegressionMetrics:
    rmse: float
    mae: float
    r2: float
    r2_degenerate: bool = False

    def as_dict(self):
        return {"rmse": self.rmse, "mae": self.mae, "r2": self.r2,
                "r2_degenerate": self.r2_degenerate}


@dataclass(frozen=True)
class IntervalMetrics:
    mean_interval_score: float
    mean_interval_size: float
    empirical_coverage: float
    coverage_deviation: float

    def as_dict(self):
        return {
            "mean_interval_score": self.mean_interval_score,
            "mean_interval_size": self.mean_interval_size,
            "empirical_coverage": self.empirical_coverage,
            "coverage_deviation": self.coverage_deviation,
        }


def _paired(*arrays):
    arrs = [np.asarray(a, dtype=float).reshape(-1) for a in arrays]
    n = len(arrs[0])
    if any(len(a) != n for a in arrs):
        raise LengthMismatch("inputs must have equal lengths")
    if n == 0:
        raise LengthMismatch("inputs must be non-empty")
    return arrs


def regression_metrics(pred, obs) -> RegressionMetrics:
    """RMSE, MAE and R^2.

    When the observations have zero variance R^2 is undefined: it is
    reported as 0.0 if the fit is also exact, NaN otherwise, and
    ``r2_degenerate`` is set in both cases.
    """
    pred, obs = _paired(pred, obs)
    err = pred - obs
    ss_res = float(np.dot(err, err))
    ss_tot = float(np.sum((obs - obs.mean()) ** 2))
    rmse = float(np.sqrt(ss_res / len(obs)))
    mae = float(np.mean(np.abs(err)))
    if ss_tot == 0:
        return RegressionMetrics(rmse, mae, 0.0 if ss_res == 0 else float("nan"), True)
    return RegressionMetrics(rmse, mae, 1.0 - ss_res / ss_tot)


def interval_score(lower, upper, y, alpha: float, width_floor: float = WIDTH_FLOOR):
    """Interval score: floored width plus a 2/alpha penalty per unit of miss.

    Works elementwise on arrays; returns a float for scalar input.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    L = np.asarray(lower, dtype=float)
    U = np.asarray(upper, dtype=float)
    Y = np.asarray(y, dtype=float)
    if np.any(L > U):
        raise InvalidBounds("lower bound exceeds upper bound")
    below = np.where(Y < L, L - Y, 0.0)
    above = np.where(Y > U, Y - U, 0.0)
    score = np.maximum(U - L, width_floor) + (2.0 / alpha) * (below + above)
    return float(score) if np.ndim(score) == 0 else score


def interval_metrics(lower, upper, y, alpha: float) -> IntervalMetrics:
    L, U, Y = _paired(lower, upper, y)
    scores = interval_score(L, U, Y, alpha)
    coverage = float(np.mean((Y >= L) & (Y <= U)))
    return IntervalMetrics(
        float(np.mean(scores)),
        float(np.mean(U - L)),
        coverage,
        abs(coverage - (1 - alpha)),
    )
