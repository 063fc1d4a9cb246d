"""Geographically weighted conformal prediction intervals.

Calibration residuals are reweighted by a Gaussian kernel of the distance
between each calibration point and the test location; the interval
half-width is the weighted quantile of those residuals. All distances are
computed on coordinates standardised per axis with the calibration mean and
standard deviation, so bandwidths are in units of standard deviations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import optimize
from scipy.spatial.distance import cdist

from ._parallel import map_chunks
from .errors import InsufficientCalibration, LengthMismatch
from .metrics import WIDTH_FLOOR
from .spatial import KnnIndex

STEPWISE = "stepwise"
INTERPOLATED = "interpolated"
CEILING = "ceiling"
NO_CEILING = "no_ceiling"

# slack when comparing cumulative weights against the level
_CUM_TOL = 1e-12


@dataclass(frozen=True)
class CalibrationScores:
    coords: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        scores = np.asarray(self.scores, dtype=float).reshape(-1)
        if len(coords) != len(scores) or len(scores) < 1:
            raise LengthMismatch("need one score per calibration coordinate")
        if not np.all(np.isfinite(scores)) or np.any(scores < 0):
            raise ValueError("scores must be finite and nonnegative")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class BandwidthSearch:
    n_starts: int = 8
    sigma_bounds: tuple[float, float] = (0.01, 2.0)
    holdout_frac: float = 0.2
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.sigma_bounds
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if not 0 < lo <= hi:
            raise ValueError("sigma bounds need 0 < low <= high")
        if not 0 < self.holdout_frac <= 0.5:
            raise ValueError("holdout_frac must lie in (0, 0.5]")


@dataclass(frozen=True)
class KernelPolicy:
    """Bandwidth rule for the geographic kernel.

    kind
        ``fixed_legacy``: ``exp(-d^2 / 2)`` left unnormalised.
        ``fixed_sigma``: Gaussian with bandwidth ``sigma``.
        ``knn_adaptive``: per-test bandwidth equal to the distance to the
        ``k``-th nearest calibration point (optionally floored at half the
        standard deviation of that test point's distance row), clipped to
        ``clip``.
        ``optimized_sigma``: one global bandwidth chosen by
        :func:`optimize_bandwidth` under ``search``.
        ``uniform``: equal weights, i.e. ordinary split conformal.
    """

    kind: str
    sigma: float = 1.0
    k: int = 10
    clip: tuple[float, float] = (0.01, 2.0)
    dispersion_floor: bool = False
    search: BandwidthSearch | None = None

    _KINDS = ("fixed_legacy", "fixed_sigma", "knn_adaptive", "optimized_sigma", "uniform")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown kernel policy {self.kind!r}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        lo, hi = self.clip
        if not 0 < lo <= hi:
            raise ValueError("clip bounds need 0 < low <= high")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.kind == "optimized_sigma" and self.search is None:
            object.__setattr__(self, "search", BandwidthSearch())

    @property
    def normalized(self) -> bool:
        return self.kind != "fixed_legacy"

    @classmethod
    def fixed_legacy(cls):
        return cls("fixed_legacy")

    @classmethod
    def fixed_sigma(cls, sigma: float):
        return cls("fixed_sigma", sigma=sigma)

    @classmethod
    def knn_adaptive(cls, k=10, clip=(0.01, 2.0), dispersion_floor=False):
        return cls("knn_adaptive", k=k, clip=tuple(clip), dispersion_floor=dispersion_floor)

    @classmethod
    def optimized(cls, search: BandwidthSearch | None = None):
        return cls("optimized_sigma", search=search or BandwidthSearch())

    @classmethod
    def uniform(cls):
        return cls("uniform")


@dataclass(frozen=True)
class PredictionInterval:
    lower: float
    upper: float
    threshold: float
    center: float


def nonconformity_abs(prediction, observation):
    out = np.abs(np.asarray(prediction, dtype=float) - np.asarray(observation, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------


def _bandwidths(dist: np.ndarray, calib_coords: np.ndarray, test_coords: np.ndarray,
                policy: KernelPolicy) -> np.ndarray:
    if policy.kind == "fixed_sigma":
        return np.full(len(dist), policy.sigma)
    if policy.kind == "fixed_legacy":
        return np.ones(len(dist))
    if policy.kind == "knn_adaptive":
        kth = np.sort(dist, axis=1)[:, min(policy.k, dist.shape[1]) - 1]
        if policy.dispersion_floor:
            kth = np.maximum(kth, 0.5 * dist.std(axis=1))
        return np.clip(kth, *policy.clip)
    raise ValueError(f"policy {policy.kind!r} has no closed-form bandwidth; "
                     "resolve it with optimize_bandwidth first")


def weight_matrix(test_coords, calib_coords, policy: KernelPolicy):
    """Kernel weights for many test points.

    Returns
    -------
    W : ndarray, shape (t, m)
        Rows sum to one unless the policy is ``fixed_legacy``.
    degenerate : ndarray of bool, shape (t,)
        Rows whose raw weights all underflowed; those rows are uniform.
    sigma : ndarray, shape (t,)
        Bandwidth used for each row (NaN for ``uniform``).
    """
    test_coords = np.atleast_2d(np.asarray(test_coords, dtype=float))
    calib_coords = np.atleast_2d(np.asarray(calib_coords, dtype=float))
    t, m = len(test_coords), len(calib_coords)
    if policy.kind == "uniform":
        return np.full((t, m), 1.0 / m), np.zeros(t, bool), np.full(t, np.nan)
    dist = cdist(test_coords, calib_coords)
    sigma = _bandwidths(dist, calib_coords, test_coords, policy)
    W = np.exp(-0.5 * (dist / sigma[:, None]) ** 2)
    total = W.sum(axis=1)
    degenerate = ~(total > 0)
    if degenerate.any():
        W[degenerate] = 1.0 / m
        total = np.where(degenerate, 1.0, total)
    if policy.normalized:
        W = W / total[:, None]
    return W, degenerate, sigma


def geo_weights(test, calib, policy: KernelPolicy, return_flag: bool = False):
    """Weights of every calibration point for one test location.

    ``calib`` is a :class:`CalibrationScores` or an ``(m, 2)`` array of
    coordinates in the same (standardised) units as ``test``. With
    ``return_flag=True`` also returns whether the uniform fallback fired.
    """
    coords = calib.coords if isinstance(calib, CalibrationScores) else calib
    W, degenerate, _ = weight_matrix(np.asarray(test, float).reshape(1, -1), coords, policy)
    return (W[0], bool(degenerate[0])) if return_flag else W[0]


# --------------------------------------------------------------------------
# quantiles
# --------------------------------------------------------------------------


def quantile_level(n: int, alpha: float, rule: str = CEILING) -> float:
    """Finite-sample corrected level, capped at 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    raw = (1 - alpha) * (n + 1)
    if rule == CEILING:
        # round first so 9.000000000000002 does not ceil to 10
        q = math.ceil(round(raw, 9)) / n
    elif rule == NO_CEILING:
        q = raw / n
    else:
        raise ValueError(f"unknown level rule {rule!r}")
    return min(q, 1.0)


def _sorted_normalized(scores, weights):
    scores = np.asarray(scores, dtype=float).reshape(-1)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if len(scores) != len(weights) or len(scores) == 0:
        raise LengthMismatch("scores and weights must have equal, nonzero length")
    order = np.argsort(scores, kind="stable")
    w = weights[order]
    return scores[order], np.cumsum(w) / w.sum()


def weighted_quantile_stepwise(scores, weights, q: float) -> float:
    """Smallest score whose cumulative normalised weight reaches ``q``."""
    s, cum = _sorted_normalized(scores, weights)
    hit = np.flatnonzero(cum >= q - _CUM_TOL)
    return float(s[hit[0]] if hit.size else s[-1])


def weighted_quantile_interpolated(scores, weights, q: float) -> float:
    """Piecewise-linear weighted quantile through (cumulative weight, score)."""
    s, cum = _sorted_normalized(scores, weights)
    return float(np.interp(q, cum, s))


def _row_quantiles(sorted_scores, W_sorted, q, method):
    cum = np.cumsum(W_sorted, axis=1)
    cum /= cum[:, -1:]
    if method == STEPWISE:
        hit = cum >= q - _CUM_TOL
        idx = np.where(hit.any(axis=1), hit.argmax(axis=1), len(sorted_scores) - 1)
        return sorted_scores[idx]
    if method == INTERPOLATED:
        return np.array([np.interp(q, c, sorted_scores) for c in cum])
    raise ValueError(f"unknown quantile method {method!r}")


def _thresholds(W, scores, q, method):
    order = np.argsort(scores, kind="stable")
    return _row_quantiles(scores[order], W[:, order], q, method)


# --------------------------------------------------------------------------
# bandwidth search
# --------------------------------------------------------------------------


def _holdout_interval_score(sigma, fit_coords, fit_scores, hold_coords, hold_scores,
                            alpha, method, level_rule):
    W, _, _ = weight_matrix(hold_coords, fit_coords, KernelPolicy.fixed_sigma(sigma))
    q = quantile_level(len(fit_scores), alpha, level_rule)
    t = _thresholds(W, fit_scores, q, method)
    score = np.maximum(2 * t, WIDTH_FLOOR) + (2.0 / alpha) * np.maximum(hold_scores - t, 0.0)
    return float(score.mean())


def optimize_bandwidth(calib: CalibrationScores, search: BandwidthSearch, alpha: float,
                       method: str = STEPWISE, level_rule: str = NO_CEILING) -> float:
    """Global kernel bandwidth minimising the holdout interval score.

    The calibration set is split (seeded) into a fitting part and a holdout.
    Starts are log-spaced over ``search.sigma_bounds`` (endpoints included)
    and each is refined by a bounded Nelder-Mead search in log-bandwidth.
    Every evaluated bandwidth competes; the first one reaching the minimum
    wins, so the result is deterministic given the seed.
    """
    m = len(calib)
    if m < 10:
        raise InsufficientCalibration(f"bandwidth search needs >= 10 calibration points, got {m}")
    lo, hi = search.sigma_bounds
    if lo == hi:
        return float(lo)
    rng = np.random.default_rng(search.seed)
    perm = rng.permutation(m)
    n_hold = min(m - 1, max(1, int(round(search.holdout_frac * m))))
    hold, fit = perm[:n_hold], perm[n_hold:]
    args = (calib.coords[fit], calib.scores[fit], calib.coords[hold], calib.scores[hold],
            alpha, method, level_rule)

    log_lo, log_hi = math.log(lo), math.log(hi)
    cache: dict[float, float] = {}

    def objective(x):
        x = float(np.clip(np.ravel(x)[0], log_lo, log_hi))
        if x not in cache:
            cache[x] = _holdout_interval_score(math.exp(x), *args)
        return cache[x]

    if search.n_starts == 1:
        starts = [0.5 * (log_lo + log_hi)]
    else:
        starts = list(np.linspace(log_lo, log_hi, search.n_starts))
    step = (log_hi - log_lo) / (2 * max(1, search.n_starts))
    for x0 in starts:
        objective(x0)
        x1 = min(x0 + step, log_hi) if x0 + step <= log_hi else x0 - step
        optimize.minimize(
            objective, [x0], method="Nelder-Mead", bounds=[(log_lo, log_hi)],
            options={"initial_simplex": [[x0], [x1]], "xatol": 1e-3, "fatol": 1e-9,
                     "maxiter": 60},
        )
    best_x = min(cache, key=lambda x: (cache[x], list(cache).index(x)))
    return float(np.clip(math.exp(best_x), lo, hi))


# --------------------------------------------------------------------------
# end-to-end
# --------------------------------------------------------------------------


@dataclass
class GeoCPResult:
    lower: np.ndarray
    upper: np.ndarray
    threshold: np.ndarray
    center: np.ndarray
    degenerate: np.ndarray
    sigma: np.ndarray
    level: float
    optimized_sigma: float | None = None
    scores: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.center)

    def __getitem__(self, i) -> PredictionInterval:
        return PredictionInterval(float(self.lower[i]), float(self.upper[i]),
                                  float(self.threshold[i]), float(self.center[i]))

    def __iter__(self) -> Iterator[PredictionInterval]:
        return (self[i] for i in range(len(self)))

    @property
    def n_degenerate(self) -> int:
        return int(self.degenerate.sum())


def standardize_coords(calib_coords, test_coords):
    """Scale both sets by the calibration mean and per-axis standard deviation."""
    calib_coords = np.atleast_2d(np.asarray(calib_coords, dtype=float))
    test_coords = np.atleast_2d(np.asarray(test_coords, dtype=float))
    mu = calib_coords.mean(axis=0)
    sd = calib_coords.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (calib_coords - mu) / sd, (test_coords - mu) / sd


def run_geocp(
    pred_calib,
    obs_calib,
    coords_calib,
    pred_test,
    coords_test,
    alpha: float = 0.1,
    policy: KernelPolicy | None = None,
    method: str = STEPWISE,
    level_rule: str = CEILING,
    standardize: bool = True,
) -> GeoCPResult:
    """Conformal intervals ``pred_test +/- threshold`` with geographic weights."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    policy = policy or KernelPolicy.fixed_legacy()
    pred_calib = np.asarray(pred_calib, dtype=float).reshape(-1)
    obs_calib = np.asarray(obs_calib, dtype=float).reshape(-1)
    pred_test = np.asarray(pred_test, dtype=float).reshape(-1)
    if len(pred_calib) != len(obs_calib) or len(pred_calib) != len(np.atleast_2d(coords_calib)):
        raise LengthMismatch("calibration arrays must have equal lengths")
    if len(pred_test) != len(np.atleast_2d(coords_test)):
        raise LengthMismatch("test predictions and coordinates must have equal lengths")

    scores = nonconformity_abs(pred_calib, obs_calib)
    if standardize:
        c_cal, c_test = standardize_coords(coords_calib, coords_test)
    else:
        c_cal = np.atleast_2d(np.asarray(coords_calib, float))
        c_test = np.atleast_2d(np.asarray(coords_test, float))
    level = quantile_level(len(scores), alpha, level_rule)

    sigma_star = None
    if policy.kind == "optimized_sigma":
        sigma_star = optimize_bandwidth(CalibrationScores(c_cal, scores), policy.search,
                                        alpha, method, level_rule)
        policy = KernelPolicy.fixed_sigma(sigma_star)

    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]

    def run(start, stop):
        W, deg, sig = weight_matrix(c_test[start:stop], c_cal, policy)
        return _row_quantiles(sorted_scores, W[:, order], level, method), deg, sig

    parts = map_chunks(run, len(pred_test), chunk=256)
    if parts:
        thr = np.concatenate([p[0] for p in parts])
        deg = np.concatenate([p[1] for p in parts])
        sig = np.concatenate([p[2] for p in parts])
    else:
        thr, deg, sig = np.empty(0), np.empty(0, bool), np.empty(0)
    return GeoCPResult(pred_test - thr, pred_test + thr, thr, pred_test, deg, sig, level,
                       sigma_star, scores)


# --------------------------------------------------------------------------
# built-in base predictor
# --------------------------------------------------------------------------


def baseline_predict_knn(train_features, train_targets, query_features, k: int = 10) -> np.ndarray:
    """Mean target of the ``k`` nearest training rows in standardised feature space.

    Features are centred and scaled with the training mean and standard
    deviation (constant columns are left unscaled). Neighbour search is
    exact with ties broken by row index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    X = np.asarray(train_features, dtype=float)
    X = X.reshape(len(X), -1)
    y = np.asarray(train_targets, dtype=float).reshape(-1)
    Q = np.asarray(query_features, dtype=float).reshape(-1, X.shape[1])
    if len(X) != len(y):
        raise LengthMismatch("features and targets must have equal lengths")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    index = KnnIndex((X - mu) / sd)
    Qs = (Q - mu) / sd
    out = np.empty(len(Q))
    for i, q in enumerate(Qs):
        pos, _ = index.query_positions(q, k)
        out[i] = y[pos].mean()
    return out
