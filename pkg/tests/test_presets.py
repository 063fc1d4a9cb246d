import dataclasses

import pytest

from geostat import Fallback, Regularization, VariogramKind, resolve_preset
from geostat.errors import ConfigError, UnknownPreset
from geostat.geocp import CEILING, INTERPOLATED, NO_CEILING, STEPWISE
from geostat.presets import PRESET_NAMES, apply_overrides
from geostat.variogram import Criterion, Loss, matern_exponent_grid

BASIC = (VariogramKind.EXPONENTIAL, VariogramKind.GAUSSIAN, VariogramKind.LINEAR)


def test_kriging_original():
    p = resolve_preset("kriging", "original")
    assert p.candidates == (VariogramKind.ORIGINAL_EXPONENTIAL,)
    assert p.loss is Loss.L1 and p.n_starts == 1
    assert (p.binning, p.n_lags, p.truncate_frac, p.include_zero, p.min_pairs) == ("fixed", 12, 1.0, True, 1)
    assert p.solver.mode == "global"
    assert p.solver.regularization is Regularization.NONE and p.solver.fallback is Fallback.FAIL
    assert not p.log_transform


def test_kriging_openevolve_variants():
    oe = resolve_preset("kriging", "openevolve")
    assert oe.candidates == BASIC and oe.criterion is Criterion.MIN_LOSS and oe.smart_start
    assert oe.truncate_frac == 0.85 and oe.loss is Loss.L1
    assert oe.solver.regularization is Regularization.FIXED and oe.solver.epsilon == 1e-10
    assert oe.solver.fallback is Fallback.PSEUDO_INVERSE
    gk = resolve_preset("kriging", "openevolve_geoknow")
    assert gk.candidates == BASIC and gk.loss is Loss.L2 and gk.min_pairs == 5
    assert gk.criterion is Criterion.MIN_LOSS


def test_kriging_geoevolve():
    p = resolve_preset("kriging", "geoevolve")
    assert p.candidates == (*BASIC, VariogramKind.POWERED_EXPONENTIAL)
    assert p.p_grid == matern_exponent_grid()
    assert p.n_starts == 16 and p.criterion is Criterion.AIC
    assert p.binning == "silverman" and p.trim_frac == 0.1
    assert p.solver.mode == "local" and p.solver.k == 25
    assert p.solver.regularization is Regularization.CONDITION_ADAPTIVE
    assert p.solver.fallback is Fallback.NEIGHBOR_MEAN
    assert p.log_transform


def test_geocp_presets():
    o = resolve_preset("geocp", "original")
    assert (o.policy.kind, o.method, o.level_rule) == ("fixed_legacy", STEPWISE, CEILING)
    assert o.metrics == ("interval_score",)
    oe = resolve_preset("geocp", "openevolve")
    assert oe.policy.kind == "knn_adaptive" and oe.policy.k == 10 and oe.policy.dispersion_floor
    assert oe.policy.clip == (0.01, 2.0) and (oe.method, oe.level_rule) == (INTERPOLATED, CEILING)
    gk = resolve_preset("geocp", "openevolve_geoknow")
    assert gk.policy.clip == (0.05, 0.5) and (gk.method, gk.level_rule) == (INTERPOLATED, NO_CEILING)
    g = resolve_preset("geocp", "geoevolve")
    assert g.policy.kind == "optimized_sigma" and g.policy.normalized
    assert (g.method, g.level_rule) == (STEPWISE, NO_CEILING)
    assert g.policy.search.n_starts == 8 and g.policy.search.sigma_bounds == (0.01, 2.0)
    assert g.policy.search.holdout_frac == 0.2


def test_unknown_preset_and_task():
    with pytest.raises(UnknownPreset):
        resolve_preset("kriging", "bogus")
    with pytest.raises(KeyError):
        resolve_preset("geocp", "bogus")
    with pytest.raises(ConfigError):
        resolve_preset("regression", "original")


def test_lookup_is_pure_and_frozen():
    for task in ("kriging", "geocp"):
        for n in PRESET_NAMES:
            a, b = resolve_preset(task, n), resolve_preset(task, n)
            assert a == b and a.to_dict() == b.to_dict()
            with pytest.raises(dataclasses.FrozenInstanceError):
                a.name = "x"


def test_overrides_merge_field_by_field():
    p = resolve_preset("kriging", "geoevolve")
    q = apply_overrides(p, {"loss": "wls", "solver": {"k": 10}, "candidates": ["gaussian"]})
    assert q.loss is Loss.WLS and q.solver.k == 10 and q.candidates == (VariogramKind.GAUSSIAN,)
    assert q.solver.regularization is Regularization.CONDITION_ADAPTIVE  # untouched
    g = apply_overrides(resolve_preset("geocp", "geoevolve"),
                        {"policy": {"search": {"n_starts": 2}}, "level_rule": "ceiling"})
    assert g.policy.search.n_starts == 2 and g.policy.search.holdout_frac == 0.2
    assert g.level_rule == "ceiling"


def test_overrides_reject_bad_input():
    p = resolve_preset("kriging", "original")
    for bad in ({"nonsense": 1}, {"name": "x"}, {"solver": {"bogus": 1}}, {"solver": {"k": 1, "mode": "local"}},
                {"loss": "l3"}, {"solver": 5}):
        with pytest.raises(ConfigError):
            apply_overrides(p, bad)


def test_to_dict_round_trips_through_overrides():
    for task in ("kriging", "geocp"):
        for n in PRESET_NAMES:
            p = resolve_preset(task, n)
            d = {k: v for k, v in p.to_dict().items() if k != "name"}
            assert apply_overrides(p, d) == p
