"""Semivariogram models, empirical estimation, fitting and model selection.

Parameter convention: ``nugget`` is the value at zero-plus lag, ``psill``
the partial sill (sill minus nugget) and ``range`` the distance scale. For
:attr:`VariogramKind.ORIGINAL_EXPONENTIAL` the third parameter is a raw
decay *rate* instead, i.e. ``nugget + psill * (1 - exp(-h * rate))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import optimize, stats
from scipy.spatial.distance import pdist
from scipy.stats import qmc

from .errors import AllBinsEmpty, DegenerateVariogram, FitFailed, InvalidSpec
from .spatial import PointSet


class VariogramKind(str, Enum):
    ORIGINAL_EXPONENTIAL = "original_exponential"
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    LINEAR = "linear"
    POWERED_EXPONENTIAL = "powered_exponential"


class Loss(str, Enum):
    L1 = "l1"
    WEIGHTED_L1 = "weighted_l1"
    L2 = "l2"
    WLS = "wls"


class Criterion(str, Enum):
    AIC = "aic"
    BIC = "bic"
    MIN_LOSS = "min_loss"


@dataclass(frozen=True)
class VariogramSpec:
    kind: VariogramKind
    nugget: float
    psill: float
    range: float
    exponent: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", VariogramKind(self.kind))
        for name in ("nugget", "psill", "range"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidSpec(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.nugget < 0:
            raise InvalidSpec("nugget must be >= 0")
        if self.psill < 0:
            raise InvalidSpec("partial sill must be >= 0")
        if self.range <= 0:
            raise InvalidSpec("range must be > 0")
        if self.kind is VariogramKind.POWERED_EXPONENTIAL:
            if self.exponent is None:
                raise InvalidSpec("powered exponential needs an exponent")
            p = float(self.exponent)
            if not 0 < p <= 2:
                raise InvalidSpec("exponent must lie in (0, 2]")
            object.__setattr__(self, "exponent", p)
        elif self.exponent is not None:
            raise InvalidSpec(f"{self.kind.value} takes no exponent")

    @property
    def sill(self) -> float:
        return self.nugget + self.psill

    @property
    def n_params(self) -> int:
        return 4 if self.kind is VariogramKind.POWERED_EXPONENTIAL else 3

    def __call__(self, h):
        return model_eval(self, h)


def _gamma(kind, nugget, psill, rng, exponent, h):
    if kind is VariogramKind.ORIGINAL_EXPONENTIAL:
        shape = -np.expm1(-h * rng)
    elif kind is VariogramKind.EXPONENTIAL:
        shape = -np.expm1(-h / rng)
    elif kind is VariogramKind.GAUSSIAN:
        shape = -np.expm1(-((h / rng) ** 2))
    elif kind is VariogramKind.LINEAR:
        shape = np.minimum(h / rng, 1.0)
    elif kind is VariogramKind.POWERED_EXPONENTIAL:
        shape = -np.expm1(-((h / rng) ** exponent))
    else:  # pragma: no cover
        raise InvalidSpec(f"unknown kind {kind}")
    return nugget + psill * shape


def model_eval(spec: VariogramSpec, h):
    """Semivariance of ``spec`` at lag(s) ``h``.

    At ``h = 0`` this returns the nugget, the right-hand limit. Kriging
    systems override exact zero lags with 0 themselves.
    """
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise ValueError("lags must be nonnegative")
    out = _gamma(spec.kind, spec.nugget, spec.psill, spec.range, spec.exponent, h_arr)
    return float(out) if np.ndim(out) == 0 else out


def covariance_eval(spec: VariogramSpec, h):
    """Covariance ``C(h) = sill - gamma(h)`` with ``C(0) = sill``."""
    h_arr = np.asarray(h, dtype=float)
    c = spec.sill - model_eval(spec, h_arr)
    return np.where(h_arr == 0, spec.sill, c)


# --------------------------------------------------------------------------
# empirical variogram
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned semivariance estimates.

    ``bin_edges`` has shape ``(k, 2)`` holding the lower and upper edge of
    each retained bin.
    """

    lag_centers: np.ndarray
    gamma: np.ndarray
    pair_counts: np.ndarray
    bin_weights: np.ndarray
    bin_edges: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("lag_centers", "gamma", "bin_weights"):
            arrays[name] = np.asarray(getattr(self, name), dtype=float).reshape(-1)
        arrays["pair_counts"] = np.asarray(self.pair_counts, dtype=np.int64).reshape(-1)
        edges = np.asarray(self.bin_edges, dtype=float)
        n = len(arrays["lag_centers"])
        if any(len(a) != n for a in arrays.values()):
            raise ValueError("empirical variogram arrays must share one length")
        if edges.shape != (n, 2):
            raise ValueError("bin_edges must have shape (k, 2)")
        if np.any(arrays["gamma"] < 0):
            raise ValueError("semivariance estimates must be >= 0")
        for name, a in arrays.items():
            object.__setattr__(self, name, a)
        object.__setattr__(self, "bin_edges", edges)

    def __len__(self):
        return len(self.lag_centers)

    @classmethod
    def from_model(cls, spec: VariogramSpec, lags, pair_counts=None) -> EmpiricalVariogram:
        """Noiseless variogram sampled from ``spec`` at ``lags``."""
        lags = np.asarray(lags, dtype=float)
        counts = np.ones(len(lags), dtype=int) if pair_counts is None else pair_counts
        half = np.diff(lags).min() / 2 if len(lags) > 1 else lags[0] / 2
        edges = np.column_stack([lags - half, lags + half])
        return cls(lags, model_eval(spec, lags), counts, np.asarray(counts, float), edges)


def auto_n_lags(n: int) -> int:
    """Bin count growing like sqrt(n), clamped to [8, 20]."""
    if n < 2:
        raise ValueError("need at least two points")
    return int(min(20, max(8, math.floor(math.sqrt(n) + 0.5))))


def _pairs(ps: PointSet) -> tuple[np.ndarray, np.ndarray]:
    if len(ps) < 2:
        raise ValueError("need at least two points for a variogram")
    d = pdist(ps.coords)
    half_sq = 0.5 * pdist(ps.values.reshape(-1, 1), "sqeuclidean")
    return d, half_sq


def _trim_consistency(trim_frac: float) -> float:
    # Expected trimmed mean of a chi2(1) variable; x*f_1(x) = f_3(x).
    if trim_frac <= 0:
        return 1.0
    lo, hi = stats.chi2.ppf([trim_frac, 1 - trim_frac], 1)
    return float((stats.chi2.cdf(hi, 3) - stats.chi2.cdf(lo, 3)) / (1 - 2 * trim_frac))


def _bin_stats(d, half_sq, which, n_bins, edges, min_pairs, trim_frac):
    centers, gammas, counts, lo_hi = [], [], [], []
    corr = _trim_consistency(trim_frac)
    for b in range(n_bins):
        sel = which == b
        cnt = int(sel.sum())
        if cnt == 0 or cnt < min_pairs:
            continue
        vals = half_sq[sel]
        if trim_frac > 0:
            g = stats.trim_mean(vals, trim_frac) / corr
        else:
            g = vals.mean()
        if not np.isfinite(g):
            continue
        centers.append(d[sel].mean())
        gammas.append(g)
        counts.append(cnt)
        lo_hi.append((edges[b], edges[b + 1]))
    if not centers:
        raise AllBinsEmpty("no variogram bin survived filtering")
    counts = np.asarray(counts)
    return EmpiricalVariogram(
        np.asarray(centers), np.asarray(gammas), counts, counts.astype(float), np.asarray(lo_hi)
    )


def empirical_variogram_fixed(
    ps: PointSet,
    n_lags: int = 12,
    truncate_frac: float = 1.0,
    include_zero: bool = True,
    min_pairs: int = 1,
) -> EmpiricalVariogram:
    """Equal-width bins over ``[0, truncate_frac * max distance]``.

    Each bin holds the classical estimator, half the mean squared value
    difference over its pairs. ``include_zero=False`` discards coincident
    pairs. Bins with fewer than ``min_pairs`` pairs are dropped.
    """
    if n_lags < 2:
        raise ValueError("n_lags must be >= 2")
    if not 0 < truncate_frac <= 1:
        raise ValueError("truncate_frac must lie in (0, 1]")
    d, half_sq = _pairs(ps)
    cutoff = truncate_frac * d.max()
    if cutoff <= 0:
        raise AllBinsEmpty("all points coincide")
    keep = d <= cutoff
    if not include_zero:
        keep &= d > 0
    d, half_sq = d[keep], half_sq[keep]
    edges = np.linspace(0.0, cutoff, n_lags + 1)
    which = np.minimum((d / (cutoff / n_lags)).astype(int), n_lags - 1)
    return _bin_stats(d, half_sq, which, n_lags, edges, min_pairs, 0.0)


def silverman_bin_count(distances: np.ndarray, n_points: int) -> int:
    """Bin count from Silverman's rule-of-thumb width on the pair distances."""
    d = np.asarray(distances, dtype=float)
    sd = d.std(ddof=1) if len(d) > 1 else 0.0
    iqr = np.subtract(*np.percentile(d, [75, 25]))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    span = d.max() - d.min()
    if spread <= 0 or span <= 0:
        count = 8
    else:
        width = 0.9 * spread * len(d) ** (-0.2)
        count = min(20, max(8, math.ceil(span / width)))
    return min(count, auto_n_lags(n_points))


def empirical_variogram_adaptive(
    ps: PointSet,
    binning: str = "silverman",
    trim_frac: float = 0.1,
    min_pairs: int = 1,
    truncate_frac: float = 1.0,
) -> EmpiricalVariogram:
    """Variogram with data-driven bins and a robust per-bin estimate.

    Parameters
    ----------
    binning : {"silverman", "quantile"}
        ``"silverman"`` uses equal-width bins whose count comes from
        Silverman's rule on the pair-distance sample (capped by
        :func:`auto_n_lags`); ``"quantile"`` places edges at equal-probability
        quantiles of the pair distances.
    trim_frac : float
        Fraction trimmed from each tail of the squared half-differences.
        The trimmed mean is rescaled by its expectation under Gaussian
        increments so it stays unbiased for the semivariance.
    truncate_frac : float
        Only pairs closer than this fraction of the maximum distance are used.
    """
    if len(ps) < 8:
        raise ValueError("adaptive binning needs at least 8 points")
    if not 0 <= trim_frac <= 0.25:
        raise ValueError("trim_frac must lie in [0, 0.25]")
    d, half_sq = _pairs(ps)
    cutoff = truncate_frac * d.max()
    if cutoff <= 0:
        raise AllBinsEmpty("all points coincide")
    keep = d <= cutoff
    d, half_sq = d[keep], half_sq[keep]
    n_auto = auto_n_lags(len(ps))
    if binning == "silverman":
        n_bins = silverman_bin_count(d, len(ps))
        edges = np.linspace(d.min(), d.max(), n_bins + 1)
    elif binning == "quantile":
        n_bins = n_auto
        edges = np.quantile(d, np.linspace(0, 1, n_bins + 1))
    else:
        raise ValueError(f"unknown binning {binning!r}")
    which = np.clip(np.searchsorted(edges, d, side="right") - 1, 0, n_bins - 1)
    return _bin_stats(d, half_sq, which, n_bins, edges, min_pairs, trim_frac)


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FitReport:
    spec: VariogramSpec
    loss_value: float
    aic: float
    bic: float
    n_starts_tried: int
    converged: bool
    residuals: np.ndarray = field(default=None, repr=False)
    candidates: tuple = field(default=(), repr=False)

    @property
    def n_params(self) -> int:
        return self.spec.n_params


def information_criteria(residuals, k: int, n: int | None = None) -> tuple[float, float]:
    """AIC and BIC under a Gaussian pseudo-likelihood of the bin residuals."""
    r = np.asarray(residuals, dtype=float)
    n = len(r) if n is None else int(n)
    if n < k:
        raise ValueError("need at least as many bins as parameters")
    rss = float(np.dot(r, r))
    s2 = max(rss / n, 1e-12)
    log_l = -0.5 * n * (math.log(2 * math.pi * s2) + 1)
    return 2 * k - 2 * log_l, k * math.log(n) - 2 * log_l


def default_bounds(emp: EmpiricalVariogram, kind: VariogramKind, free_exponent: bool = False):
    """Per-parameter ``(low, high)`` intervals keeping fits physical."""
    g_max = float(emp.gamma.max())
    lags = emp.lag_centers
    pos = lags[lags > 0]
    h_min = float(pos.min()) if len(pos) else 1e-12
    h_max = float(lags.max())
    floor = 1e-10 * g_max
    b = [(0.0, g_max), (floor, 2 * g_max)]
    if kind is VariogramKind.ORIGINAL_EXPONENTIAL:
        b.append((1.0 / (2 * h_max), 1.0 / h_min))
    else:
        b.append((h_min, 2 * h_max))
    if free_exponent:
        b.append((0.1, 2.0))
    return b


def _loss_fn(loss: Loss, emp: EmpiricalVariogram):
    g = emp.gamma
    if loss in (Loss.WEIGHTED_L1, Loss.WLS):
        w = emp.bin_weights / emp.bin_weights.sum()
    else:
        w = np.full(len(g), 1.0 / len(g))
    if loss in (Loss.L1, Loss.WEIGHTED_L1):
        return lambda model: float(np.sum(w * np.abs(g - model)))
    return lambda model: float(np.sum(w * (g - model) ** 2))


def _smart_start(emp, kind, bounds):
    g0 = float(emp.gamma[0])
    sill = float(emp.gamma.max()) - g0
    half = 0.5 * float(emp.lag_centers.max())
    third = 1.0 / half if kind is VariogramKind.ORIGINAL_EXPONENTIAL else half
    x = [g0, sill, third, 1.0][: len(bounds)]
    return np.array([min(max(v, lo), hi) for v, (lo, hi) in zip(x, bounds)])


def _local_minimize(obj, u0, method, polish=False):
    k = len(u0)
    unit = [(0.0, 1.0)] * k
    if method == "L-BFGS-B":
        tol = {"ftol": 1e-15, "gtol": 1e-12} if polish else {"ftol": 1e-10, "gtol": 1e-8}
        res = optimize.minimize(obj, u0, method="L-BFGS-B", bounds=unit,
                                options={**tol, "maxiter": 2000})
        return res.x, res.fun
    if not polish:
        res = optimize.minimize(obj, u0, method="Nelder-Mead", bounds=unit,
                                options={"xatol": 1e-4, "fatol": 1e-12, "maxiter": 150 * k})
        return res.x, res.fun
    # restarting the simplex escapes the stalls L1 kinks cause
    best_x, best_f = np.asarray(u0, float), obj(u0)
    for _ in range(3):
        res = optimize.minimize(
            obj, best_x, method="Nelder-Mead", bounds=unit,
            options={"xatol": 1e-11, "fatol": 1e-17, "maxiter": 500 * k, "maxfev": 500 * k},
        )
        improved = res.fun < best_f - 1e-15 * max(1.0, abs(best_f))
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
        if not improved:
            break
    return best_x, best_f


def fit_variogram(
    emp: EmpiricalVariogram,
    kind: VariogramKind | str,
    loss: Loss | str = Loss.L1,
    n_starts: int = 1,
    bounds: Sequence[tuple[float, float]] | None = None,
    seed: int = 0,
    exponent: float | None = None,
    method: str = "auto",
    smart_start: bool = True,
) -> FitReport:
    """Fit one variogram model by multi-start bounded minimisation.

    The first start is the data-driven "smart" guess (nugget from the first
    bin, partial sill from the largest estimate, range at half the maximum
    lag) or the centre of the bounds box when ``smart_start`` is False. The
    remaining ``n_starts - 1`` starts come from a seeded Latin hypercube.

    ``kind=POWERED_EXPONENTIAL`` with ``exponent=None`` fits the exponent
    as a fourth free parameter.

    Parameters
    ----------
    loss : Loss
        ``l1`` / ``l2`` weight bins equally; ``weighted_l1`` / ``wls`` weight
        bins by ``emp.bin_weights``.
    method : {"auto", "L-BFGS-B", "Nelder-Mead"}
        ``auto`` picks L-BFGS-B for squared losses and Nelder-Mead for L1.
    """
    kind = VariogramKind(kind)
    loss = Loss(loss)
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    free_p = kind is VariogramKind.POWERED_EXPONENTIAL and exponent is None
    n_free = 4 if free_p else 3
    k_params = 4 if kind is VariogramKind.POWERED_EXPONENTIAL else 3
    if len(emp) < k_params:
        raise FitFailed(f"{len(emp)} bins cannot determine {k_params} parameters")
    if float(emp.gamma.max()) <= 0:
        raise DegenerateVariogram("empirical semivariance is identically zero")

    if bounds is None:
        bounds = default_bounds(emp, kind, free_p)
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    if len(bounds) != n_free:
        raise ValueError(f"expected {n_free} bounds, got {len(bounds)}")
    lo = np.array([b[0] for b in bounds])
    width = np.array([b[1] - b[0] for b in bounds])
    if np.any(width < 0):
        raise ValueError("each bound needs low <= high")

    if method == "auto":
        method = "Nelder-Mead" if loss in (Loss.L1, Loss.WEIGHTED_L1) else "L-BFGS-B"
    loss_of = _loss_fn(loss, emp)
    h = emp.lag_centers

    def params(u):
        return lo + u * width

    def predict(theta):
        p = theta[3] if free_p else exponent
        return _gamma(kind, theta[0], theta[1], theta[2], p, h)

    def objective(u):
        val = loss_of(predict(params(u)))
        return val if np.isfinite(val) else np.inf

    safe_width = np.where(width > 0, width, 1.0)
    if smart_start:
        first = (_smart_start(emp, kind, bounds) - lo) / safe_width
    else:
        first = np.full(n_free, 0.5)
    starts = [np.where(width > 0, first, 0.0)]
    if n_starts > 1:
        lhs = qmc.LatinHypercube(d=n_free, seed=np.random.default_rng(seed))
        starts.extend(lhs.random(n_starts - 1))

    best_u, best_f = None, np.inf
    for u0 in starts:
        try:
            u, f = _local_minimize(objective, np.asarray(u0, float), method)
        except (ValueError, FloatingPointError):
            continue
        if np.isfinite(f) and f < best_f:
            best_u, best_f = u, f
    if best_u is None:
        raise FitFailed(f"no start converged for {kind.value}")
    best_u, best_f = _local_minimize(objective, best_u, method, polish=True)

    theta = params(best_u)
    p = float(theta[3]) if free_p else exponent
    spec = VariogramSpec(kind, theta[0], theta[1], theta[2], p)
    if spec.psill <= 1e-10 * float(emp.gamma.max()) * (1 + 1e-6):
        raise DegenerateVariogram(f"{kind.value} fit collapsed to a pure nugget")
    resid = emp.gamma - model_eval(spec, h)
    aic, bic = information_criteria(resid, spec.n_params, len(emp))
    return FitReport(spec, float(best_f), aic, bic, n_starts, True, resid)


def matern_exponent_grid(nus: Sequence[float] = (0.2, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)) -> tuple:
    """Map a smoothness grid onto powered-exponential exponents, p = 2nu/(nu+1)."""
    return tuple(min(2.0, 2 * nu / (nu + 1)) for nu in nus)


def select_variogram(
    emp: EmpiricalVariogram,
    candidates: Sequence[VariogramKind | str],
    loss: Loss | str = Loss.L1,
    criterion: Criterion | str = Criterion.AIC,
    n_starts: int = 1,
    p_grid: Sequence[float] = (),
    seed: int = 0,
    method: str = "auto",
    smart_start: bool = True,
) -> FitReport:
    """Fit each candidate and keep the one minimising ``criterion``.

    Powered-exponential candidates are expanded over ``p_grid`` (or fitted
    with a free exponent if the grid is empty). Values within a relative
    1e-9 of the best count as ties, resolved by fewer parameters and then
    by candidate order.
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    criterion = Criterion(criterion)
    expanded = []
    for kind in candidates:
        kind = VariogramKind(kind)
        if kind is VariogramKind.POWERED_EXPONENTIAL and len(p_grid):
            expanded.extend((kind, float(p)) for p in p_grid)
        else:
            expanded.append((kind, None))

    reports, errors = [], []
    for kind, p in expanded:
        try:
            reports.append(fit_variogram(emp, kind, loss, n_starts, None, seed, p,
                                         method, smart_start))
        except FitFailed as exc:
            errors.append(exc)
    if not reports:
        if all(isinstance(e, DegenerateVariogram) for e in errors):
            raise DegenerateVariogram("every candidate collapsed to a pure nugget")
        raise FitFailed("all candidate variograms failed to fit")

    def score(r):
        if criterion is Criterion.AIC:
            return r.aic
        if criterion is Criterion.BIC:
            return r.bic
        return r.loss_value

    scores = np.array([score(r) for r in reports])
    best = scores.min()
    tol = 1e-9 * max(1.0, abs(best))
    tied = [i for i in range(len(reports)) if scores[i] <= best + tol]
    pick = min(tied, key=lambda i: (reports[i].n_params, i))
    return replace(reports[pick], candidates=tuple(reports))
