"""Ordinary kriging: system assembly, regularised solves and prediction.

The system is written in semivariogram form,

    [ G   1 ] [lam]   [g0]
    [ 1'  0 ] [ mu] = [ 1]

with ``G[i, j] = gamma(|s_i - s_j|)`` and ``g0[i] = gamma(|s_i - s0|)``.
Exactly zero lags contribute ``gamma = 0`` (the semivariogram vanishes at
the origin; the nugget is its right-hand limit).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from scipy.spatial.distance import cdist

from ._parallel import map_chunks
from .errors import NonPositiveAfterOffset, SingularSystem
from .spatial import KnnIndex, PointSet, pairwise_distances
from .variogram import VariogramSpec, model_eval

logger = logging.getLogger(__name__)

LOG_OFFSET_EPS = 1e-6
_SVD_MAX_SIZE = 64


class Regularization(str, Enum):
    NONE = "none"
    FIXED = "fixed"
    CONDITION_ADAPTIVE = "condition_adaptive"


class Fallback(str, Enum):
    FAIL = "fail"
    PSEUDO_INVERSE = "pseudo_inverse"
    NEIGHBOR_MEAN = "neighbor_mean"


@dataclass(frozen=True)
class SolverPolicy:
    """How each kriging system is built and solved.

    ``mode="global"`` uses every training point; ``mode="local"`` uses the
    ``k`` nearest. ``epsilon`` is the diagonal term for
    ``Regularization.FIXED``.
    """

    mode: str = "global"
    k: int = 25
    regularization: Regularization = Regularization.NONE
    epsilon: float = 1e-10
    fallback: Fallback = Fallback.FAIL

    def __post_init__(self):
        if self.mode not in ("global", "local"):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if self.mode == "local" and self.k < 2:
            raise ValueError("local kriging needs k >= 2")
        object.__setattr__(self, "regularization", Regularization(self.regularization))
        object.__setattr__(self, "fallback", Fallback(self.fallback))


# --------------------------------------------------------------------------
# log transform
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TransformState:
    enabled: bool = False
    delta: float = 0.0


def adaptive_log_offset(values) -> float:
    """Offset making ``log(values + delta)`` well defined.

    ``delta`` is the 1st percentile (linear interpolation) of the positive
    values plus 1e-6, raised if needed so the smallest value still maps
    above zero.
    """
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("values must be non-empty")
    pos = v[v > 0]
    if pos.size:
        delta = float(np.percentile(pos, 1)) + LOG_OFFSET_EPS
    else:
        delta = abs(float(v.min())) + LOG_OFFSET_EPS
    lowest = float(v.min())
    if lowest + delta <= 0:
        delta = -lowest + LOG_OFFSET_EPS
    return delta


def fit_transform(values, enabled: bool) -> TransformState:
    if not enabled:
        return TransformState(False, 0.0)
    return TransformState(True, adaptive_log_offset(values))


def forward_transform(v, state: TransformState):
    if not state.enabled:
        return v
    shifted = np.asarray(v, dtype=float) + state.delta
    if np.any(shifted <= 0):
        raise NonPositiveAfterOffset("value + delta must be positive before the log")
    out = np.log(shifted)
    return float(out) if np.ndim(out) == 0 else out


def back_transform(t, state: TransformState):
    if not state.enabled:
        return t
    out = np.exp(np.asarray(t, dtype=float)) - state.delta
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# systems
# --------------------------------------------------------------------------


def _gamma_matrix(spec, d):
    g = model_eval(spec, d)
    return np.where(d == 0, 0.0, g)


def assemble_ok_system(spec: VariogramSpec, neighbors, target) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange-augmented ordinary-kriging matrix and right-hand side.

    ``neighbors`` is a :class:`PointSet` or an ``(m, 2)`` coordinate array.
    ``target`` may be one point or an ``(t, 2)`` array, in which case ``b``
    has one column per target.
    """
    coords = neighbors.coords if isinstance(neighbors, PointSet) else np.atleast_2d(neighbors)
    m = len(coords)
    if m < 1:
        raise ValueError("need at least one neighbour")
    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = _gamma_matrix(spec, pairwise_distances(coords))
    A[:m, m] = 1.0
    A[m, :m] = 1.0
    tgt = np.asarray(target, dtype=float)
    single = tgt.ndim == 1
    tgt = np.atleast_2d(tgt)
    b = np.ones((m + 1, len(tgt)))
    b[:m] = _gamma_matrix(spec, cdist(coords, tgt))
    return A, (b[:, 0] if single else b)


def condition_number(A: np.ndarray) -> float:
    """2-norm condition number for small systems, LAPACK 1-norm estimate otherwise."""
    A = np.asarray(A, dtype=float)
    if len(A) <= _SVD_MAX_SIZE:
        s = np.linalg.svd(A, compute_uv=False)
        return float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, _ = sla.lu_factor(A, check_finite=False)
    rcond, info = lapack.dgecon(lu, np.linalg.norm(A, 1), norm="1")
    return float(1.0 / rcond) if rcond > 0 else np.inf


def condition_adaptive_epsilon(kappa: float) -> float:
    """Diagonal regularisation stepped up with the condition number."""
    if kappa < 1e8:
        return 1e-10
    if kappa < 1e10:
        return 1e-8
    if kappa < 1e12:
        return 1e-6
    return 1e-4


def _regularize(A: np.ndarray, policy: SolverPolicy) -> tuple[np.ndarray, float]:
    if policy.regularization is Regularization.NONE:
        return A, 0.0
    if policy.regularization is Regularization.FIXED:
        eps = policy.epsilon
    else:
        eps = condition_adaptive_epsilon(condition_number(A))
    m = len(A) - 1
    A = A.copy()
    # lowering the zero-lag diagonal is the semivariogram form of adding a
    # nugget to the covariance diagonal
    A[np.arange(m), np.arange(m)] -= eps
    return A, eps


def _factor(A: np.ndarray):
    """LU factors, or None when the matrix is numerically singular."""
    if not np.all(np.isfinite(A)):
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            lu, piv = sla.lu_factor(A, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            return None
    if np.any(np.diag(lu) == 0):
        return None
    rcond, _ = lapack.dgecon(lu, np.linalg.norm(A, 1), norm="1")
    if not rcond >= np.finfo(float).eps:
        return None
    return lu, piv


@dataclass
class KrigingSolution:
    weights: np.ndarray
    lagrange: float
    prediction: float
    variance: float
    used_fallback: bool
    clamped: bool = False
    epsilon: float = 0.0


def _finish(x, b, values, used_fallback, eps):
    m = len(values)
    lam, mu = x[:m], float(x[m])
    raw_var = float(b[:m] @ lam + mu)
    return KrigingSolution(lam, mu, float(lam @ values), max(raw_var, 0.0),
                           used_fallback, raw_var < 0, eps)


def _neighbor_mean(values, eps=0.0):
    m = len(values)
    var = float(np.var(values, ddof=1)) if m > 1 else 0.0
    return KrigingSolution(np.full(m, 1.0 / m), 0.0, float(np.mean(values)), var, True, False, eps)


def _fallback(A, b, values, policy, eps, reason):
    if policy.fallback is Fallback.FAIL:
        raise SingularSystem(reason)
    if policy.fallback is Fallback.PSEUDO_INVERSE:
        x = np.linalg.lstsq(A, b, rcond=None)[0]
        return _finish(x, b, values, True, eps)
    return _neighbor_mean(values, eps)


def solve_kriging_system(A, b, policy: SolverPolicy, neighbor_values) -> KrigingSolution:
    """Solve one augmented system, applying the policy's regularisation and fallback.

    A system counts as failed when LU factorisation hits an exact zero pivot
    or the reciprocal condition estimate drops below machine epsilon.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    values = np.asarray(neighbor_values, dtype=float)
    if A.shape != (len(b), len(b)) or len(values) != len(b) - 1:
        raise ValueError("A, b and neighbour values are not conformal")
    A_reg, eps = _regularize(A, policy)
    fac = _factor(A_reg)
    if fac is None:
        return _fallback(A_reg, b, values, policy, eps, "kriging system is singular")
    x = sla.lu_solve(fac, b, check_finite=False)
    if not np.all(np.isfinite(x)):
        return _fallback(A_reg, b, values, policy, eps, "kriging solve produced non-finite weights")
    return _finish(x, b, values, False, eps)


def _conflicting_duplicates(coords, values) -> bool:
    """True when two coincident points carry different values."""
    if len(coords) < 2:
        return False
    order = np.lexsort((coords[:, 1], coords[:, 0]))
    c, v = coords[order], values[order]
    same = np.all(c[1:] == c[:-1], axis=1)
    return bool(np.any(same & (v[1:] != v[:-1])))


# --------------------------------------------------------------------------
# model + prediction
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KrigingPrediction:
    value: float
    variance: float
    used_fallback: bool


@dataclass
class KrigingOutput:
    """Predictions for a batch of targets.

    ``variance`` is in transformed (log) units when ``log_variance`` is True.
    ``n_clamped`` counts targets whose raw kriging variance was negative.
    """

    value: np.ndarray
    variance: np.ndarray
    used_fallback: np.ndarray
    n_clamped: int = 0
    log_variance: bool = False

    def __len__(self):
        return len(self.value)

    def __getitem__(self, i) -> KrigingPrediction:
        return KrigingPrediction(float(self.value[i]), float(self.variance[i]),
                                 bool(self.used_fallback[i]))

    def __iter__(self) -> Iterator[KrigingPrediction]:
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class KrigingModel:
    train: PointSet
    spec: VariogramSpec
    transform: TransformState = field(default_factory=TransformState)
    solver: SolverPolicy = field(default_factory=SolverPolicy)

    def __post_init__(self):
        z = forward_transform(self.train.values, self.transform)
        object.__setattr__(self, "_z", np.asarray(z, dtype=float))
        if self.solver.mode == "local":
            object.__setattr__(self, "_index", KnnIndex.from_pointset(self.train))

    def predict(self, targets) -> KrigingOutput:
        return predict(self, targets)


def _predict_global(model: KrigingModel, targets: np.ndarray):
    coords, z, policy = model.train.coords, model._z, model.solver
    A, B = assemble_ok_system(model.spec, coords, targets)
    A_reg, eps = _regularize(A, policy)
    fac = None if _conflicting_duplicates(coords, z) else _factor(A_reg)
    n_t = len(targets)
    if fac is None:
        sols = [_fallback(A_reg, B[:, j], z, policy, eps, "global kriging system is singular")
                for j in range(n_t)]
        return (np.array([s.prediction for s in sols]), np.array([s.variance for s in sols]),
                np.ones(n_t, bool), sum(s.clamped for s in sols))
    X = sla.lu_solve(fac, B, check_finite=False)
    m = len(z)
    pred = z @ X[:m]
    raw_var = np.einsum("ij,ij->j", B[:m], X[:m]) + X[m]
    return pred, np.maximum(raw_var, 0.0), np.zeros(n_t, bool), int(np.sum(raw_var < 0))


def _predict_local(model: KrigingModel, targets: np.ndarray):
    coords, z, policy, index = model.train.coords, model._z, model.solver, model._index

    def run(start, stop):
        out = []
        for t in targets[start:stop]:
            pos, _ = index.query_positions(t, policy.k)
            nc, nz = coords[pos], z[pos]
            A, b = assemble_ok_system(model.spec, nc, t)
            if _conflicting_duplicates(nc, nz):
                A_reg, eps = _regularize(A, policy)
                out.append(_fallback(A_reg, b, nz, policy, eps, "conflicting duplicate neighbours"))
            else:
                out.append(solve_kriging_system(A, b, policy, nz))
        return out

    sols = [s for part in map_chunks(run, len(targets)) for s in part]
    return (np.array([s.prediction for s in sols]), np.array([s.variance for s in sols]),
            np.array([s.used_fallback for s in sols], dtype=bool), sum(s.clamped for s in sols))


def predict(model: KrigingModel, targets) -> KrigingOutput:
    """Krige every target, in input order.

    Predictions are back-transformed when the model carries a log
    transform; variances stay in log units and ``log_variance`` is set.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[1] != 2:
        raise ValueError("targets must have shape (t, 2)")
    if len(targets) == 0:
        return KrigingOutput(np.empty(0), np.empty(0), np.empty(0, bool), 0,
                             model.transform.enabled)
    if model.solver.mode == "global":
        pred, var, fb, n_clamped = _predict_global(model, targets)
    else:
        pred, var, fb, n_clamped = _predict_local(model, targets)
    if n_clamped:
        logger.info("clamped %d negative kriging variances to zero", n_clamped)
    value = np.asarray(back_transform(pred, model.transform), dtype=float).reshape(-1)
    return KrigingOutput(value, var, fb, int(n_clamped), model.transform.enabled)
