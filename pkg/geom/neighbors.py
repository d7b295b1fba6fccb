"""Spatial index for k-nearest and radius queries.

Distances are compared as squared Euclidean distances computed component-wise, and
ties are broken by ascending point index, so results equal a brute-force scan that
uses `squared_distances`.
"""

from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

import config
from errors import InvalidParameter


def squared_distances(points, query):
    """Squared distances from `query` (broadcastable) to `points`, summed x, y, z in order."""
    d = np.asarray(points, dtype=float) - np.asarray(query, dtype=float)
    return d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]


def _inflate(radius):
    return radius * (1.0 + config.Neighbors.RADIUS_INFLATE) + 1e-12


class NeighborIndex:
    """Immutable index over a point set (array or PointCloud); built once, then queried."""

    def __init__(self, points):
        if hasattr(points, "points"):
            points = points.points
        self._points = np.array(points, dtype=float).reshape(-1, 3)
        self._points.setflags(write=False)
        self._tree = cKDTree(self._points) if len(self._points) else None

    def __len__(self):
        return len(self._points)

    @property
    def points(self):
        return self._points

    def knn(self, query, k) -> Tuple[np.ndarray, np.ndarray]:
        """Indices and distances of the k nearest points to one query point."""
        idx, dist = self.knn_batch(np.asarray(query, dtype=float).reshape(1, 3), k)
        return idx[0], dist[0]

    def knn_batch(self, queries, k) -> Tuple[np.ndarray, np.ndarray]:
        """(M, k) indices and distances, sorted by (distance, index)."""
        queries = np.asarray(queries, dtype=float).reshape(-1, 3)
        n = len(self)
        if k < 1:
            raise InvalidParameter("k must be >= 1")
        if n == 0:
            raise InvalidParameter("cannot query an empty index")
        k = min(k, n)
        m = min(n, k + config.Neighbors.KNN_TIE_MARGIN)

        _, cand = self._tree.query(queries, k=m)
        cand = np.asarray(cand).reshape(len(queries), m)
        d2 = squared_distances(self._points[cand], queries[:, None, :])
        order = np.lexsort((cand, d2), axis=-1)
        cand = np.take_along_axis(cand, order, axis=-1)
        d2 = np.take_along_axis(d2, order, axis=-1)

        out_idx = cand[:, :k].copy()
        out_d2 = d2[:, :k].copy()

        if m < n:
            kth = d2[:, k - 1]
            # rows whose candidate list may not hold every point tied with the k-th one
            unsafe = d2[:, -1] <= kth * (1.0 + 1e-9) + 1e-300
            for row in np.flatnonzero(unsafe):
                ball = np.asarray(self._tree.query_ball_point(queries[row], _inflate(np.sqrt(kth[row]))),
                                  dtype=int)
                bd2 = squared_distances(self._points[ball], queries[row])
                sel = np.lexsort((ball, bd2))[:k]
                out_idx[row] = ball[sel]
                out_d2[row] = bd2[sel]

        return out_idx, np.sqrt(out_d2)

    def radius(self, query, r) -> np.ndarray:
        """Indices (ascending) of all points within distance r (inclusive) of one query."""
        if len(self) == 0:
            return np.zeros(0, dtype=int)
        query = np.asarray(query, dtype=float).reshape(3)
        cand = np.asarray(self._tree.query_ball_point(query, _inflate(r)), dtype=int)
        if len(cand) == 0:
            return cand
        keep = squared_distances(self._points[cand], query) <= r * r
        return np.sort(cand[keep])

    def has_neighbor_within(self, queries, r) -> np.ndarray:
        """Boolean per query: is any indexed point within distance r (inclusive)."""
        queries = np.asarray(queries, dtype=float).reshape(-1, 3)
        n = len(self)
        if n == 0 or len(queries) == 0:
            return np.zeros(len(queries), dtype=bool)
        _, idx = self._tree.query(queries, k=1, distance_upper_bound=_inflate(r))
        idx = np.asarray(idx).reshape(-1)
        found = idx < n
        result = np.zeros(len(queries), dtype=bool)
        rows = np.flatnonzero(found)
        d2 = squared_distances(self._points[idx[rows]], queries[rows])
        result[rows] = d2 <= r * r
        # nearest by tree sits in the rounding band: settle with an exact ball scan
        for row in rows[d2 > r * r]:
            result[row] = len(self.radius(queries[row], r)) > 0
        return result

    def nearest(self, queries) -> Tuple[np.ndarray, np.ndarray]:
        """Distance and index of the nearest indexed point for each query."""
        queries = np.asarray(queries, dtype=float).reshape(-1, 3)
        if len(self) == 0:
            raise InvalidParameter("cannot query an empty index")
        dist, idx = self._tree.query(queries, k=1)
        return np.asarray(dist).reshape(-1), np.asarray(idx).reshape(-1)
