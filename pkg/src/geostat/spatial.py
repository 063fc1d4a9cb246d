"""Planar point sets, pairwise distances and an exact k-nearest-neighbour index."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class PointSet:
    """Planar coordinates with one scalar observation per point.

    Parameters
    ----------
    coords : array_like, shape (n, 2)
        Projected coordinates.
    values : array_like, shape (n,)
        Observations at ``coords``.
    ids : array_like of int, optional
        Stable integer ids; defaults to ``0..n-1``.
    """

    coords: np.ndarray
    values: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float, copy=True)
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if coords.ndim == 1 and coords.size == 2:
            coords = coords.reshape(1, 2)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must have shape (n, 2), got {coords.shape}")
        if len(coords) < 1:
            raise ValueError("PointSet needs at least one point")
        if len(coords) != len(values):
            raise ValueError(
                f"{len(coords)} coordinates but {len(values)} values"
            )
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if self.ids is None:
            ids = np.arange(len(coords))
        else:
            ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
            if len(ids) != len(coords):
                raise ValueError("ids must match the number of points")
        coords.setflags(write=False)
        values.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.values)

    def subset(self, index) -> PointSet:
        index = np.asarray(index)
        return PointSet(self.coords[index], self.values[index], self.ids[index])

    def with_values(self, values) -> PointSet:
        return PointSet(self.coords, values, self.ids)

    @property
    def has_duplicates(self) -> bool:
        """True if two points share exactly the same coordinates."""
        return len(np.unique(self.coords, axis=0)) < len(self.coords)


def pairwise_distances(ps: PointSet | np.ndarray) -> np.ndarray:
    """Symmetric matrix of Euclidean distances with an exactly zero diagonal."""
    coords = ps.coords if isinstance(ps, PointSet) else np.atleast_2d(ps)
    if len(coords) == 1:
        return np.zeros((1, 1))
    return squareform(pdist(coords))


def _distances_to(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    diff = points - q
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


class KnnIndex:
    """Exact k-nearest-neighbour index.

    Results match a brute-force scan: the ``k`` smallest Euclidean
    distances, ties broken by ascending point id. A k-d tree narrows the
    candidate set; distances are then recomputed directly and sorted by
    ``(distance, id)``.

    Parameters
    ----------
    coords : array_like, shape (n, d)
        Indexed points. Works in any dimension, which the feature-space
        nearest-neighbour regressor relies on.
    ids : array_like of int, optional
        Ids used for the tie rule and returned by queries.
    """

    def __init__(self, coords, ids=None):
        coords = np.array(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        if len(coords) == 0:
            raise ValueError("cannot index an empty point set")
        self._coords = coords
        self._coords.setflags(write=False)
        self._ids = np.arange(len(coords)) if ids is None else np.asarray(ids)
        self._tree = cKDTree(coords)

    @classmethod
    def from_pointset(cls, ps: PointSet) -> KnnIndex:
        return cls(ps.coords, ps.ids)

    def __len__(self):
        return len(self._coords)

    def _query_positions(self, q: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        n = len(self._coords)
        k = min(k, n)
        if k == n:
            cand = np.arange(n)
        else:
            # one extra neighbour tells us whether a tie straddles the cut
            d, idx = self._tree.query(q, k=k + 1)
            kth = d[k - 1]
            if d[k] > kth * (1 + 1e-9) + 1e-300:
                cand = np.asarray(idx[:k])
            else:
                radius = kth * (1 + 1e-9) + 1e-12
                cand = np.asarray(self._tree.query_ball_point(q, radius), dtype=int)
        dist = _distances_to(self._coords[cand], q)
        order = np.lexsort((self._ids[cand], dist))[:k]
        return cand[order], dist[order]

    def query(self, q, k: int) -> list[tuple[int, float]]:
        """Return ``[(id, distance), ...]`` of length ``min(k, n)``, nearest first."""
        pos, dist = self.query_positions(q, k)
        return [(int(self._ids[p]), float(d)) for p, d in zip(pos, dist)]

    def query_positions(self, q, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Like :meth:`query` but returns row positions into the indexed array."""
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self._coords.shape[1]:
            raise ValueError("query dimension does not match the index")
        return self._query_positions(q, int(k))

    def kth_distance(self, queries, k: int) -> np.ndarray:
        """Distance from each query row to its k-th nearest indexed point."""
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        k = min(int(k), len(self._coords))
        d, _ = self._tree.query(queries, k=k)
        d = np.asarray(d).reshape(len(queries), -1)
        return d[:, -1]


def knn_query(index: KnnIndex, q, k: int) -> list[tuple[int, float]]:
    return index.query(q, k)
