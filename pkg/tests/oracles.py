"""Brute-force reference implementations.

Each oracle is written directly from the defining formula with plain Python
loops (or the most literal numpy), deliberately sharing no code with the
package. Tests compare the package against these.
"""

from __future__ import annotations

import math

import numpy as np


def distance_matrix(coords):
    n = len(coords)
    D = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i][j] = math.hypot(coords[i][0] - coords[j][0], coords[i][1] - coords[j][1])
    return np.array(D)


def knn(coords, q, k):
    """(id, distance) pairs: full scan, sort by distance then id."""
    cand = []
    for i, c in enumerate(coords):
        cand.append((math.hypot(c[0] - q[0], c[1] - q[1]), i))
    cand.sort()
    return [(i, d) for d, i in cand[:k]]


def gamma(kind, nugget, psill, rng, h, p=None):
    """Semivariance at a single lag h > 0."""
    if kind == "exponential":
        return nugget + psill * (1 - math.exp(-h / rng))
    if kind == "original_exponential":
        return nugget + psill * (1 - math.exp(-h * rng))
    if kind == "gaussian":
        return nugget + psill * (1 - math.exp(-(h / rng) ** 2))
    if kind == "linear":
        return nugget + psill * min(h / rng, 1.0)
    if kind == "powered_exponential":
        return nugget + psill * (1 - math.exp(-(h / rng) ** p))
    raise ValueError(kind)


def empirical_fixed(coords, values, n_lags, truncate_frac=1.0, include_zero=True, min_pairs=1):
    """Classical binned estimator by explicit pair enumeration.

    Returns a list of (mean pair distance, gamma_hat, pair count) for the
    retained bins, in ascending lag order.
    """
    n = len(coords)
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            d = math.hypot(coords[i][0] - coords[j][0], coords[i][1] - coords[j][1])
            pairs.append((d, 0.5 * (values[i] - values[j]) ** 2))
    cutoff = truncate_frac * max(d for d, _ in pairs)
    width = cutoff / n_lags
    bins = [[] for _ in range(n_lags)]
    for d, g in pairs:
        if d > cutoff or (not include_zero and d == 0):
            continue
        k = min(int(d / width), n_lags - 1)
        bins[k].append((d, g))
    out = []
    for b in bins:
        if len(b) and len(b) >= min_pairs:
            out.append((sum(d for d, _ in b) / len(b), sum(g for _, g in b) / len(b), len(b)))
    return out


def ordinary_kriging(coords, values, target, cov):
    """Ordinary kriging in covariance form with an explicit variance formula.

    ``cov(h)`` is the covariance function, including ``cov(0)`` = sill.
    Returns (prediction, variance, weights), where the variance is
    E[(Z_hat - Z0)^2] = w'Cw - 2 w'c0 + C(0), avoiding any Lagrange sign
    convention.
    """
    n = len(coords)
    A = np.zeros((n + 1, n + 1))
    b = np.zeros(n + 1)
    for i in range(n):
        for j in range(n):
            A[i, j] = cov(math.hypot(coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]))
        A[i, n] = A[n, i] = 1.0
        b[i] = cov(math.hypot(coords[i][0] - target[0], coords[i][1] - target[1]))
    b[n] = 1.0
    x = np.linalg.solve(A, b)
    w = x[:n]
    C = A[:n, :n]
    var = float(w @ C @ w - 2 * w @ b[:n] + cov(0.0))
    return float(w @ np.asarray(values)), var, w


def weighted_quantile_stepwise(scores, weights, q):
    """Sort scores (stable), accumulate normalised weights, first reaching q."""
    total = sum(weights)
    order = sorted(range(len(scores)), key=lambda i: scores[i])  # sorted() is stable
    cum = 0.0
    for i in order:
        cum += weights[i] / total
        if cum >= q:
            return scores[i]
    return scores[order[-1]]


def uniform_quantile(scores, q):
    """Smallest sorted score whose rank / m reaches q (ranks from 1)."""
    s = sorted(scores)
    m = len(s)
    for r in range(1, m + 1):
        if r / m >= q:
            return s[r - 1]
    return s[-1]


def split_conformal_threshold(scores, alpha):
    """Classical split-conformal threshold: the ceil((1-a)(m+1))-th smallest score."""
    m = len(scores)
    r = math.ceil((1 - alpha) * (m + 1) - 1e-9)
    s = sorted(scores)
    return s[min(r, m) - 1]


def interval_score(lo, hi, y, alpha, floor=1e-6):
    width = max(hi - lo, floor)
    pen = 0.0
    if y < lo:
        pen += lo - y
    if y > hi:
        pen += y - hi
    return width + 2.0 / alpha * pen


def regression(pred, obs):
    n = len(obs)
    err = [p - o for p, o in zip(pred, obs)]
    rmse = math.sqrt(sum(e * e for e in err) / n)
    mae = sum(abs(e) for e in err) / n
    mean = sum(obs) / n
    ss_tot = sum((o - mean) ** 2 for o in obs)
    ss_res = sum(e * e for e in err)
    r2 = 1 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return rmse, mae, r2


def gaussian_loglik_aic_bic(residuals, k):
    n = len(residuals)
    s2 = max(sum(r * r for r in residuals) / n, 1e-12)
    ll = -0.5 * n * (math.log(2 * math.pi * s2) + 1)
    return 2 * k - 2 * ll, k * math.log(n) - 2 * ll
