"""Frozen configurations for the four compared variants of each method.

Names, in order of increasing sophistication: ``original``,
``openevolve``, ``openevolve_geoknow`` and ``geoevolve``.

Notes
-----
The ``original`` GeoCP preset keeps unnormalised legacy weights, but the
stepwise quantile still divides by their total mass (a cumulative threshold
needs one). Its behaviour therefore matches normalised weights with the
legacy unit bandwidth.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Any

from .errors import ConfigError, UnknownPreset
from .geocp import (
    CEILING,
    INTERPOLATED,
    NO_CEILING,
    STEPWISE,
    BandwidthSearch,
    KernelPolicy,
)
from .kriging import Fallback, Regularization, SolverPolicy
from .variogram import Criterion, Loss, VariogramKind, matern_exponent_grid

PRESET_NAMES = ("original", "openevolve", "openevolve_geoknow", "geoevolve")


@dataclass(frozen=True)
class KrigingPreset:
    name: str
    candidates: tuple[VariogramKind, ...]
    loss: Loss
    n_starts: int
    criterion: Criterion
    p_grid: tuple[float, ...]
    optimizer: str
    smart_start: bool
    binning: str  # "fixed", "silverman" or "quantile"
    n_lags: int
    truncate_frac: float
    include_zero: bool
    min_pairs: int
    trim_frac: float
    solver: SolverPolicy
    log_transform: bool

    def to_dict(self) -> dict[str, Any]:
        return _plain(asdict(self))


@dataclass(frozen=True)
class GeoCPPreset:
    name: str
    policy: KernelPolicy
    method: str
    level_rule: str
    metrics: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str)):
        return obj.value
    if isinstance(obj, str) and hasattr(obj, "value"):
        return obj.value
    return obj


_BASIC = (VariogramKind.EXPONENTIAL, VariogramKind.GAUSSIAN, VariogramKind.LINEAR)
_FULL_METRICS = ("interval_score", "interval_size", "coverage", "coverage_deviation")

_KRIGING = {
    "original": KrigingPreset(
        name="original",
        candidates=(VariogramKind.ORIGINAL_EXPONENTIAL,),
        loss=Loss.L1,
        n_starts=1,
        criterion=Criterion.MIN_LOSS,
        p_grid=(),
        optimizer="L-BFGS-B",
        smart_start=False,
        binning="fixed",
        n_lags=12,
        truncate_frac=1.0,
        include_zero=True,
        min_pairs=1,
        trim_frac=0.0,
        solver=SolverPolicy("global", regularization=Regularization.NONE,
                            fallback=Fallback.FAIL),
        log_transform=False,
    ),
    "openevolve": KrigingPreset(
        name="openevolve",
        candidates=_BASIC,
        loss=Loss.L1,
        n_starts=1,
        criterion=Criterion.MIN_LOSS,
        p_grid=(),
        optimizer="L-BFGS-B",
        smart_start=True,
        binning="fixed",
        n_lags=12,
        truncate_frac=0.85,
        include_zero=True,
        min_pairs=1,
        trim_frac=0.0,
        solver=SolverPolicy("global", regularization=Regularization.FIXED, epsilon=1e-10,
                            fallback=Fallback.PSEUDO_INVERSE),
        log_transform=False,
    ),
    "openevolve_geoknow": KrigingPreset(
        name="openevolve_geoknow",
        candidates=_BASIC,
        loss=Loss.L2,
        n_starts=1,
        criterion=Criterion.MIN_LOSS,
        p_grid=(),
        optimizer="L-BFGS-B",
        smart_start=True,
        binning="fixed",
        n_lags=12,
        truncate_frac=0.85,
        include_zero=True,
        min_pairs=5,
        trim_frac=0.0,
        solver=SolverPolicy("global", regularization=Regularization.FIXED, epsilon=1e-10,
                            fallback=Fallback.PSEUDO_INVERSE),
        log_transform=False,
    ),
    "geoevolve": KrigingPreset(
        name="geoevolve",
        candidates=(*_BASIC, VariogramKind.POWERED_EXPONENTIAL),
        loss=Loss.WEIGHTED_L1,
        n_starts=16,
        criterion=Criterion.AIC,
        p_grid=matern_exponent_grid(),
        optimizer="auto",
        smart_start=True,
        binning="silverman",
        n_lags=0,
        truncate_frac=1.0,
        include_zero=True,
        min_pairs=1,
        trim_frac=0.1,
        solver=SolverPolicy("local", k=25, regularization=Regularization.CONDITION_ADAPTIVE,
                            fallback=Fallback.NEIGHBOR_MEAN),
        log_transform=True,
    ),
}

_GEOCP = {
    "original": GeoCPPreset(
        name="original",
        policy=KernelPolicy.fixed_legacy(),
        method=STEPWISE,
        level_rule=CEILING,
        metrics=("interval_score",),
    ),
    "openevolve": GeoCPPreset(
        name="openevolve",
        policy=KernelPolicy.knn_adaptive(k=10, clip=(0.01, 2.0), dispersion_floor=True),
        method=INTERPOLATED,
        level_rule=CEILING,
        metrics=("interval_score", "interval_size"),
    ),
    "openevolve_geoknow": GeoCPPreset(
        name="openevolve_geoknow",
        policy=KernelPolicy.knn_adaptive(k=10, clip=(0.05, 0.5)),
        method=INTERPOLATED,
        level_rule=NO_CEILING,
        metrics=_FULL_METRICS,
    ),
    "geoevolve": GeoCPPreset(
        name="geoevolve",
        policy=KernelPolicy.optimized(BandwidthSearch(n_starts=8, sigma_bounds=(0.01, 2.0),
                                                      holdout_frac=0.2, seed=0)),
        method=STEPWISE,
        level_rule=NO_CEILING,
        metrics=_FULL_METRICS,
    ),
}


def resolve_preset(task: str, name: str):
    """Look up the frozen configuration for ``(task, name)``."""
    table = {"kriging": _KRIGING, "geocp": _GEOCP}.get(task)
    if table is None:
        raise ConfigError(f"unknown task {task!r}; expected 'kriging' or 'geocp'")
    try:
        return table[name]
    except KeyError:
        raise UnknownPreset(f"unknown {task} preset {name!r}; choose from {PRESET_NAMES}") from None


# --------------------------------------------------------------------------
# overrides from config files
# --------------------------------------------------------------------------

_ENUM_FIELDS = {"loss": Loss, "criterion": Criterion}


def apply_overrides(preset, overrides: dict[str, Any]):
    """Return ``preset`` with fields replaced from a plain mapping.

    Nested ``solver`` (kriging) and ``policy`` / ``search`` (GeoCP) entries
    are merged field by field. Unknown keys raise :class:`ConfigError`.
    """
    if not overrides:
        return preset
    names = {f.name for f in fields(preset)}
    changes: dict[str, Any] = {}
    try:
        for key, val in overrides.items():
            if key not in names or key == "name":
                raise ConfigError(f"unknown or read-only config field {key!r}")
            if key == "solver":
                changes[key] = _merge(preset.solver, val)
            elif key == "policy":
                pol = dict(val)
                search = pol.pop("search", None)
                new = _merge(preset.policy, pol)
                if search is not None:
                    new = replace(new, search=_merge(new.search or BandwidthSearch(), search))
                changes[key] = new
            elif key == "candidates":
                changes[key] = tuple(VariogramKind(v) for v in val)
            elif key in ("p_grid", "metrics"):
                changes[key] = tuple(val)
            elif key in _ENUM_FIELDS:
                changes[key] = _ENUM_FIELDS[key](val)
            else:
                changes[key] = val
        return replace(preset, **changes)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config override: {exc}") from exc


def _merge(obj, val: dict[str, Any]):
    if not isinstance(val, dict):
        raise ConfigError("nested config entries must be objects")
    known = {f.name for f in fields(obj)}
    bad = set(val) - known
    if bad:
        raise ConfigError(f"unknown config fields {sorted(bad)}")
    val = {k: (tuple(v) if isinstance(v, list) else v) for k, v in val.items()}
    return replace(obj, **val)
