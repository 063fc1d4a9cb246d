"""CSV input/output, the seeded 8:1:1 split and synthetic Gaussian fields.

Every stochastic routine takes an explicit integer seed and draws from
``numpy.random.default_rng(seed)`` (PCG64), whose streams are identical
across platforms.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadCell,
    CovarianceNotPD,
    FileNotFound,
    IoError,
    MissingColumn,
    TooFewRows,
)
from .spatial import PointSet, pairwise_distances
from .variogram import VariogramSpec, covariance_eval

logger = logging.getLogger(__name__)

MAX_SYNTH_POINTS = 2000
KING_COUNTY_URL = "https://geodacenter.github.io/data-and-lab/KingCounty-HouseSales2015/"


@dataclass
class Dataset:
    coords: np.ndarray
    target: np.ndarray
    features: dict[str, np.ndarray] = field(default_factory=dict)
    source: str = ""
    columns: dict[str, str] = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.target)

    def pointset(self, index=None) -> PointSet:
        if index is None:
            return PointSet(self.coords, self.target)
        index = np.asarray(index)
        return PointSet(self.coords[index], self.target[index], index)

    def feature_matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = list(self.features) if names is None else list(names)
        if not names:
            return np.empty((len(self), 0))
        return np.column_stack([self.features[n] for n in names])


def _parse(raw: str, row: int, col: str) -> float:
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise BadCell(row, col, raw) from None
    if not math.isfinite(v):
        raise BadCell(row, col, raw)
    return v


def read_points_csv(
    path,
    x_col: str = "x",
    y_col: str = "y",
    value_col: str = "value",
    feature_cols: Sequence[str] = (),
    optional_cols: Sequence[str] = (),
) -> Dataset:
    """Read point observations from a headed, comma-separated UTF-8 file.

    Rows are numbered from 1 starting at the first data row. A missing or
    non-numeric cell in any declared column raises :class:`BadCell`.
    ``optional_cols`` are parsed into ``Dataset.extra`` when present.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFound(f"file not found: {path}")
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        wanted = [x_col, y_col, value_col, *feature_cols]
        for name in wanted:
            if name not in header:
                raise MissingColumn(name)
        present_optional = [c for c in optional_cols if c in header]
        rows = {c: [] for c in [*wanted, *present_optional]}
        for i, rec in enumerate(reader, start=1):
            for c in rows:
                rows[c].append(_parse(rec.get(c), i, c))
    if not rows[x_col]:
        raise TooFewRows(f"{path} has no data rows")
    coords = np.column_stack([rows[x_col], rows[y_col]])
    return Dataset(
        coords=coords,
        target=np.asarray(rows[value_col]),
        features={c: np.asarray(rows[c]) for c in feature_cols},
        source=path,
        columns={"x": x_col, "y": y_col, "value": value_col},
        extra={c: np.asarray(rows[c]) for c in present_optional},
    )


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_results_csv(path, rows: Iterable[Mapping] | Iterable[Sequence],
                      header: Sequence[str] | None = None) -> None:
    """Write rows with a header; floats use 17 significant digits.

    ``rows`` are mappings (header taken from the first row unless given) or
    sequences (``header`` required).
    """
    rows = list(rows)
    if header is None:
        if not rows or not isinstance(rows[0], Mapping):
            raise ValueError("header is required unless rows are mappings")
        header = list(rows[0].keys())
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                vals = [r[h] for h in header] if isinstance(r, Mapping) else list(r)
                w.writerow([_fmt(v) for v in vals])
    except OSError as exc:
        raise IoError(str(exc)) from exc


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int


def split_811(n: int, seed: int) -> Split:
    """Shuffle ``0..n-1``; first 80% train, next 10% validation, rest test."""
    if n < 3:
        raise TooFewRows("need at least 3 rows to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(math.floor(0.8 * n))
    n_val = int(math.floor(0.1 * n))
    return Split(perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:], seed)


def _draw_field(coords, spec: VariogramSpec, rng) -> np.ndarray:
    n = len(coords)
    if spec.sill == 0:
        return np.zeros(n)
    C = covariance_eval(spec, pairwise_distances(coords))
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        logger.info("covariance not positive definite; retrying with 1e-10 jitter")
        try:
            L = np.linalg.cholesky(C + 1e-10 * np.eye(n))
        except np.linalg.LinAlgError:
            raise CovarianceNotPD("covariance is not positive definite even with jitter") from None
    return L @ rng.standard_normal(n)


def synth_gaussian_field(n: int, spec: VariogramSpec, domain=(0.0, 0.0, 1.0, 1.0),
                         seed: int = 0) -> Dataset:
    """Zero-mean Gaussian field at uniform random locations.

    ``domain`` is ``(xmin, ymin, xmax, ymax)``. The covariance is
    ``sill - gamma(h)`` off the diagonal and the full sill on it, so the
    nugget acts as independent noise.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > MAX_SYNTH_POINTS:
        raise ValueError(f"n={n} exceeds the dense-factorisation limit {MAX_SYNTH_POINTS}")
    xmin, ymin, xmax, ymax = map(float, domain)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("domain must have positive extent")
    rng = np.random.default_rng(seed)
    coords = np.column_stack([rng.uniform(xmin, xmax, n), rng.uniform(ymin, ymax, n)])
    values = _draw_field(coords, spec, rng)
    return Dataset(coords, values, source=f"synthetic:{spec.kind.value}:seed={seed}")


def synth_skewed_field(n: int, spec: VariogramSpec, domain=(0.0, 0.0, 1.0, 1.0),
                       seed: int = 0, mean_log: float = 1.0,
                       noise_sd: tuple[float, float] = (0.05, 0.6)) -> Dataset:
    """Log-normal field with spatially heteroskedastic noise.

    A Gaussian field ``g`` with covariance from ``spec`` is exponentiated,
    ``exp(mean_log + g + e)``, where the log-scale noise ``e`` has standard
    deviation rising linearly across x from ``noise_sd[0]`` to
    ``noise_sd[1]``.
    """
    base = synth_gaussian_field(n, spec, domain, seed)
    rng = np.random.default_rng([seed, 1])
    xmin, _, xmax, _ = map(float, domain)
    frac = (base.coords[:, 0] - xmin) / (xmax - xmin)
    sd = noise_sd[0] + (noise_sd[1] - noise_sd[0]) * frac
    values = np.exp(mean_log + base.target + sd * rng.standard_normal(n))
    return Dataset(base.coords, values, source=f"synthetic-lognormal:seed={seed}")


def synth_heteroskedastic_regression(n: int, seed: int = 0, n_features: int = 3,
                                     noise: tuple[float, float] = (0.2, 3.0)) -> Dataset:
    """Tabular regression data whose noise level varies smoothly in space.

    Coordinates are uniform on the unit square; the target is a smooth
    function of the features plus Gaussian noise whose standard deviation is
    a bump centred at (0.7, 0.3) ranging from ``noise[0]`` to ``noise[1]``.
    """
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, 1, size=(n, 2))
    X = rng.normal(size=(n, n_features))
    signal = 2.0 * X[:, 0] + np.sin(2 * X[:, 1]) + 0.5 * X[:, 2 % n_features] ** 2
    signal += 3.0 * coords[:, 0]
    r2 = (coords[:, 0] - 0.7) ** 2 + (coords[:, 1] - 0.3) ** 2
    sd = noise[0] + (noise[1] - noise[0]) * np.exp(-r2 / (2 * 0.15 ** 2))
    y = signal + sd * rng.standard_normal(n)
    feats = {f"f{i}": X[:, i] for i in range(n_features)}
    return Dataset(coords, y, feats, source=f"synthetic-hetero:seed={seed}")
