import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from geostat import (
    BandwidthSearch,
    CalibrationScores,
    KernelPolicy,
    baseline_predict_knn,
    geo_weights,
    nonconformity_abs,
    optimize_bandwidth,
    quantile_level,
    run_geocp,
    weighted_quantile_interpolated,
    weighted_quantile_stepwise,
)
from geostat.errors import InsufficientCalibration
from geostat.geocp import (
    CEILING,
    INTERPOLATED,
    NO_CEILING,
    STEPWISE,
    _holdout_interval_score,
    weight_matrix,
)


def test_nonconformity_examples():
    assert nonconformity_abs(3, 3) == 0
    assert nonconformity_abs(1, 4) == 3
    assert nonconformity_abs(-2, 2) == 4
    np.testing.assert_array_equal(nonconformity_abs([1, 5], [4, 2]), [3, 3])


# -- weights --------------------------------------------------------------

def test_coincident_point_gets_largest_weight():
    calib = np.array([[0, 0], [1, 0], [0, 1], [2, 2]], float)
    w = geo_weights([1, 0], calib, KernelPolicy.fixed_sigma(0.7))
    assert np.argmax(w) == 1 and np.sum(w == w.max()) == 1
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


def test_equidistant_pair_half_weights():
    for pol in (KernelPolicy.fixed_sigma(0.3), KernelPolicy.knn_adaptive(1),
                KernelPolicy.uniform()):
        w = geo_weights([0, 0], np.array([[1.0, 0], [-1.0, 0]]), pol)
        np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-15)


def test_fixed_legacy_unnormalized():
    w = geo_weights([0, 0], np.array([[0.0, 0], [1.0, 0], [0, 2.0]]), KernelPolicy.fixed_legacy())
    assert w[0] == 1.0
    np.testing.assert_allclose(w[1:], [math.exp(-0.5), math.exp(-2.0)], rtol=1e-15)


def test_knn_adaptive_bandwidth_and_clip():
    rng = np.random.default_rng(0)
    calib = rng.normal(size=(40, 2))
    test = rng.normal(size=(5, 2))
    _, _, sig = weight_matrix(test, calib, KernelPolicy.knn_adaptive(k=10, clip=(0.05, 0.5)))
    d = np.sqrt(((test[:, None] - calib[None]) ** 2).sum(-1))
    kth = np.sort(d, axis=1)[:, 9]
    np.testing.assert_allclose(sig, np.clip(kth, 0.05, 0.5))
    _, _, sig2 = weight_matrix(test, calib, KernelPolicy.knn_adaptive(10, (0.01, 2.0), True))
    np.testing.assert_allclose(sig2, np.clip(np.maximum(kth, 0.5 * d.std(axis=1)), 0.01, 2.0))


def test_underflow_falls_back_to_uniform():
    w, flag = geo_weights([100, 100], np.array([[0.0, 0], [1, 1], [2, 0]]),
                          KernelPolicy.fixed_sigma(0.01), return_flag=True)
    assert flag
    np.testing.assert_allclose(w, 1 / 3)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), kind=st.sampled_from(["fixed_sigma", "knn_adaptive", "uniform"]))
def test_normalized_weights_sum_to_one(seed, kind):
    rng = np.random.default_rng(seed)
    pol = {"fixed_sigma": KernelPolicy.fixed_sigma(rng.uniform(0.01, 3)),
           "knn_adaptive": KernelPolicy.knn_adaptive(int(rng.integers(1, 15))),
           "uniform": KernelPolicy.uniform()}[kind]
    W, _, _ = weight_matrix(rng.normal(size=(20, 2)) * 3, rng.normal(size=(30, 2)), pol)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-10)


def test_policy_validation():
    with pytest.raises(ValueError):
        KernelPolicy("gaussian")
    with pytest.raises(ValueError):
        KernelPolicy.fixed_sigma(0.0)
    with pytest.raises(ValueError):
        KernelPolicy.knn_adaptive(clip=(0.0, 1.0))
    with pytest.raises(ValueError):
        BandwidthSearch(sigma_bounds=(0.0, 1.0))
    with pytest.raises(ValueError):
        BandwidthSearch(holdout_frac=0.7)


# -- quantile levels and estimators -------------------------------------------

def test_quantile_level_examples():
    assert quantile_level(10, 0.1, CEILING) == 1.0
    assert quantile_level(10, 0.1, NO_CEILING) == pytest.approx(0.99, abs=1e-15)
    assert quantile_level(9, 0.1, CEILING) == 1.0
    assert quantile_level(9, 0.1, NO_CEILING) == 1.0
    assert quantile_level(99, 0.1, CEILING) == 0.9090909090909091  # ceil(90)/99
    assert quantile_level(100, 0.05, CEILING) == 0.96


def test_stepwise_examples():
    s, w = [1, 2, 3], [0.5, 0.3, 0.2]
    assert weighted_quantile_stepwise(s, w, 0.7) == 2
    assert weighted_quantile_stepwise(s, w, 0.5) == 1
    assert weighted_quantile_stepwise(s, w, 1.0) == 3
    assert weighted_quantile_stepwise(s, [5, 3, 2], 0.7) == 2  # normalised internally


def test_stepwise_ties_keep_input_order():
    assert weighted_quantile_stepwise([2, 1, 2], [0.2, 0.3, 0.5], 0.4) == 2


def test_interpolated_examples():
    assert weighted_quantile_interpolated([0, 10], [0.5, 0.5], 0.75) == 5.0
    assert weighted_quantile_interpolated([0, 10], [0.5, 0.5], 1.0) == 10
    assert weighted_quantile_interpolated([0, 10], [0.5, 0.5], 1.3) == 10
    assert weighted_quantile_interpolated([0, 10], [0.5, 0.5], 0.2) == 0
    for q in (0.0, 0.3, 1.0):
        assert weighted_quantile_interpolated([4.2], [1.0], q) == 4.2
        assert weighted_quantile_stepwise([4.2], [1.0], q) == 4.2


def test_stepwise_uniform_equals_rank_rule():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        m = int(rng.integers(1, 60))
        s = rng.integers(0, 20, m).astype(float) if rng.random() < 0.3 else rng.exponential(size=m)
        q = float(rng.choice([rng.random(), int(rng.integers(1, m + 1)) / m]))
        assert weighted_quantile_stepwise(s, np.ones(m), q) == oracles.uniform_quantile(s.tolist(), q)


def test_stepwise_matches_cumsum_oracle():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        m = int(rng.integers(1, 50))
        s = rng.normal(size=m)
        w = rng.exponential(size=m)
        q = float(rng.random())
        assert weighted_quantile_stepwise(s, w, q) == oracles.weighted_quantile_stepwise(
            s.tolist(), w.tolist(), q)


@settings(max_examples=200, deadline=None)
@given(
    scores=st.lists(st.floats(0, 100), min_size=1, max_size=30),
    data=st.data(),
)
def test_interpolated_monotone_and_bounded(scores, data):
    w = data.draw(st.lists(st.floats(1e-3, 10), min_size=len(scores), max_size=len(scores)))
    qs = np.linspace(0, 1.2, 61)
    vals = [weighted_quantile_interpolated(scores, w, q) for q in qs]
    assert np.all(np.diff(vals) >= 0)
    assert min(scores) <= min(vals) and max(vals) <= max(scores)


def test_weight_scaling_invariance():
    rng = np.random.default_rng(3)
    s, w = rng.exponential(size=25), rng.uniform(size=25)
    for q in (0.1, 0.5, 0.93):
        assert weighted_quantile_stepwise(s, w, q) == weighted_quantile_stepwise(s, 1e3 * w, q)
        assert weighted_quantile_interpolated(s, w, q) == pytest.approx(
            weighted_quantile_interpolated(s, 7.5 * w, q), abs=1e-12)


# -- bandwidth search -----------------------------------------------------

def _calib(m, seed, hetero=False):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0, 1, (m, 2))
    scale = 0.2 + 3 * (xy[:, 0] > 0.5) if hetero else 1.0
    return CalibrationScores(xy, np.abs(rng.normal(size=m)) * scale)


def test_bandwidth_degenerate_bounds():
    assert optimize_bandwidth(_calib(30, 0), BandwidthSearch(sigma_bounds=(0.3, 0.3)), 0.1) == 0.3


def test_bandwidth_too_few_points():
    with pytest.raises(InsufficientCalibration):
        optimize_bandwidth(_calib(9, 0), BandwidthSearch(), 0.1)


def test_bandwidth_beats_both_bounds_and_is_deterministic():
    calib = _calib(200, 1)
    search = BandwidthSearch(n_starts=6, sigma_bounds=(0.01, 2.0), seed=4)
    sig = optimize_bandwidth(calib, search, 0.1)
    assert sig == optimize_bandwidth(calib, search, 0.1)
    assert 0.01 <= sig <= 2.0
    # rebuild the same holdout split to evaluate the objective at 3 points
    perm = np.random.default_rng(4).permutation(200)
    hold, fit = perm[:40], perm[40:]
    obj = lambda s: _holdout_interval_score(s, calib.coords[fit], calib.scores[fit],
                                            calib.coords[hold], calib.scores[hold],
                                            0.1, STEPWISE, NO_CEILING)
    assert obj(sig) <= obj(0.01) and obj(sig) <= obj(2.0)


def test_calibration_scores_validation():
    with pytest.raises(Exception):
        CalibrationScores(np.zeros((2, 2)), [-1.0, 1.0])
    with pytest.raises(Exception):
        CalibrationScores(np.zeros((2, 2)), [1.0])


# -- end to end ------------------------------------------------------------

POLICIES = [KernelPolicy.fixed_legacy(), KernelPolicy.fixed_sigma(0.4),
            KernelPolicy.knn_adaptive(10, (0.05, 0.5)), KernelPolicy.uniform(),
            KernelPolicy.optimized(BandwidthSearch(n_starts=3))]


@pytest.mark.parametrize("policy", POLICIES, ids=lambda p: p.kind)
@pytest.mark.parametrize("method", [STEPWISE, INTERPOLATED])
def test_constant_scores_give_constant_width(policy, method):
    rng = np.random.default_rng(0)
    cc, ct = rng.uniform(0, 1, (50, 2)), rng.uniform(0, 1, (20, 2))
    obs = rng.normal(size=50)
    res = run_geocp(obs + 1.5, obs, cc, np.zeros(20), ct, 0.1, policy, method, CEILING)
    np.testing.assert_allclose(res.threshold, 1.5)
    np.testing.assert_allclose(res.upper - res.lower, 3.0)


def test_uniform_ceiling_is_split_conformal():
    rng = np.random.default_rng(1)
    for m in (19, 50, 99, 200):
        cc = rng.uniform(0, 1, (m, 2))
        obs = rng.normal(size=m)
        pred = obs + rng.normal(size=m)
        scores = np.abs(pred - obs)
        res = run_geocp(pred, obs, cc, np.zeros(5), rng.uniform(0, 1, (5, 2)), 0.1,
                        KernelPolicy.uniform(), STEPWISE, CEILING)
        np.testing.assert_array_equal(res.threshold,
                                      oracles.split_conformal_threshold(scores.tolist(), 0.1))


def test_tiny_alpha_gives_max_score():
    rng = np.random.default_rng(2)
    obs = rng.normal(size=40)
    pred = obs + rng.normal(size=40)
    res = run_geocp(pred, obs, rng.uniform(0, 1, (40, 2)), np.zeros(6), rng.uniform(0, 1, (6, 2)),
                    1e-6, KernelPolicy.fixed_sigma(0.3), STEPWISE, CEILING)
    np.testing.assert_array_equal(res.threshold, np.abs(pred - obs).max())


def test_width_is_twice_threshold_and_order_kept():
    rng = np.random.default_rng(3)
    obs = rng.normal(size=60)
    pred = obs + rng.normal(size=60) * (1 + rng.uniform(size=60))
    ct = rng.uniform(0, 1, (30, 2))
    pt = rng.normal(size=30)
    cc = rng.uniform(0, 1, (60, 2))
    res = run_geocp(pred, obs, cc, pt, ct, 0.2, KernelPolicy.knn_adaptive(), INTERPOLATED, NO_CEILING)
    np.testing.assert_allclose(res.upper - res.lower, 2 * res.threshold, rtol=1e-14)
    assert np.all(res.threshold >= 0)
    np.testing.assert_array_equal(res.center, pt)
    rev = run_geocp(pred, obs, cc, pt[::-1], ct[::-1], 0.2,
                    KernelPolicy.knn_adaptive(), INTERPOLATED, NO_CEILING)
    np.testing.assert_array_equal(rev.threshold, res.threshold[::-1])


def test_coverage_on_exchangeable_data():
    covs = []
    for trial in range(200):
        rng = np.random.default_rng(trial)
        y = rng.normal(size=400)
        f = np.zeros(400)
        xy = rng.uniform(0, 1, (400, 2))
        res = run_geocp(f[:200], y[:200], xy[:200], f[200:], xy[200:], 0.1,
                        KernelPolicy.uniform(), STEPWISE, CEILING)
        covs.append(np.mean((y[200:] >= res.lower) & (y[200:] <= res.upper)))
    assert 0.88 <= np.mean(covs) <= 1.0


def test_geocp_thread_invariance(monkeypatch):
    rng = np.random.default_rng(4)
    obs = rng.normal(size=100)
    pred = obs + rng.normal(size=100)
    args = (pred, obs, rng.uniform(0, 1, (100, 2)), np.zeros(300), rng.uniform(0, 1, (300, 2)), 0.1)
    monkeypatch.setenv("GEOSTAT_THREADS", "1")
    a = run_geocp(*args, KernelPolicy.knn_adaptive(), INTERPOLATED, CEILING)
    monkeypatch.setenv("GEOSTAT_THREADS", "4")
    b = run_geocp(*args, KernelPolicy.knn_adaptive(), INTERPOLATED, CEILING)
    np.testing.assert_array_equal(a.lower, b.lower)
    np.testing.assert_array_equal(a.upper, b.upper)


# -- baseline predictor ---------------------------------------------------

def test_knn_baseline_examples():
    X = np.array([[0.0, 0], [1, 1], [3, 0], [5, 2]])
    y = np.array([1.0, 2.0, 4.0, 8.0])
    np.testing.assert_array_equal(baseline_predict_knn(X, y, X, 1), y)
    np.testing.assert_allclose(baseline_predict_knn(X, y, np.array([[9.0, 9.0], [-1, 0]]), 4), 3.75)
    X2 = np.array([[-1.0], [1.0], [5.0]])
    assert baseline_predict_knn(X2, np.array([2.0, 4.0, 100.0]), np.array([[0.0]]), 2)[0] == 3.0
