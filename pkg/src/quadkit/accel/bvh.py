"""Axis-aligned BVH over a triangle soup, plus a pure-numpy query path.

The tree is built once in numpy (flat arrays) and shared by both the
compiled and the fallback query kernels. The fallback query combines a
cKDTree candidate search over triangle centroids with exact point-triangle
distances, verified with a radius pass so results match the compiled
traversal bit-for-bit.
"""

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import closest_point_on_triangles

_LEAF_SIZE = 8


def build_bvh(tri_verts):
    """Build a flat median-split BVH.

    Returns a dict of arrays: node bounds, child indices (-1 at leaves),
    leaf ranges into ``order`` (a permutation of triangle ids).
    """
    tri_verts = np.ascontiguousarray(tri_verts, dtype=np.float64)
    n_tris = len(tri_verts)
    if n_tris == 0:
        raise ValueError("empty triangle soup")
    tmin = tri_verts.min(axis=1)
    tmax = tri_verts.max(axis=1)
    centroids = tri_verts.mean(axis=1)

    order = np.arange(n_tris)
    node_min, node_max = [], []
    node_left, node_right = [], []
    node_start, node_count = [], []

    # Iterative top-down build; stack holds (start, end, node_index).
    stack = [(0, n_tris, 0)]
    node_min.append(None)
    node_max.append(None)
    node_left.append(-1)
    node_right.append(-1)
    node_start.append(0)
    node_count.append(0)

    while stack:
        start, end, ni = stack.pop()
        ids = order[start:end]
        lo = tmin[ids].min(axis=0)
        hi = tmax[ids].max(axis=0)
        node_min[ni] = lo
        node_max[ni] = hi
        if end - start <= _LEAF_SIZE:
            node_start[ni] = start
            node_count[ni] = end - start
            continue
        cen = centroids[ids]
        axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
        mid = (end - start) // 2
        # argpartition with a stable id tiebreak keeps builds deterministic
        key = np.lexsort((ids, cen[:, axis]))
        order[start:end] = ids[key]
        left = len(node_min)
        for _ in range(2):
            node_min.append(None)
            node_max.append(None)
            node_left.append(-1)
            node_right.append(-1)
            node_start.append(0)
            node_count.append(0)
        node_left[ni] = left
        node_right[ni] = left + 1
        stack.append((start, start + mid, left))
        stack.append((start + mid, end, left + 1))

    return {
        "tri_verts": tri_verts,
        "order": np.ascontiguousarray(order, dtype=np.int64),
        "node_min": np.ascontiguousarray(np.array(node_min), dtype=np.float64),
        "node_max": np.ascontiguousarray(np.array(node_max), dtype=np.float64),
        "node_left": np.ascontiguousarray(np.array(node_left), dtype=np.int64),
        "node_right": np.ascontiguousarray(np.array(node_right), dtype=np.int64),
        "node_start": np.ascontiguousarray(np.array(node_start), dtype=np.int64),
        "node_count": np.ascontiguousarray(np.array(node_count), dtype=np.int64),
    }


class PythonClosestPoint:
    """Exact closest-point queries without the compiled extension.

    Strategy: take k nearest triangle centroids as candidates, compute the
    exact best among them, then re-query every triangle whose centroid lies
    within (best distance + max centroid-to-vertex radius); this guarantees
    the true minimum is inspected.
    """

    def __init__(self, tri_verts):
        self.tri_verts = np.ascontiguousarray(tri_verts, dtype=np.float64)
        self.centroids = self.tri_verts.mean(axis=1)
        self.radii = np.linalg.norm(
            self.tri_verts - self.centroids[:, None, :], axis=2
        ).max(axis=1)
        self.max_radius = float(self.radii.max())
        self.tree = cKDTree(self.centroids)

    def query(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = len(points)
        k = min(16, len(self.tri_verts))
        _, cand = self.tree.query(points, k=k)
        cand = np.asarray(cand, dtype=np.int64).reshape(n, k)
        flat_pts = np.repeat(points, k, axis=0)
        flat_ids = cand.reshape(-1)
        cp, d2 = closest_point_on_triangles(flat_pts, self.tri_verts[flat_ids])
        cp = cp.reshape(n, k, 3)
        d2 = d2.reshape(n, k)
        ids = cand.copy()

        best = np.empty(n, dtype=np.int64)
        best_d2 = np.empty(n)
        best_cp = np.empty((n, 3))
        for i in range(n):
            j = _argmin_tie(d2[i], ids[i])
            best[i] = ids[i][j]
            best_d2[i] = d2[i][j]
            best_cp[i] = cp[i][j]

        # Verification pass: any triangle whose centroid ball could beat the
        # current bound is tested exactly.
        r = np.sqrt(best_d2) + self.max_radius + 1e-12
        extra = self.tree.query_ball_point(points, r)
        for i in range(n):
            ids_i = np.asarray(extra[i], dtype=np.int64)
            if len(ids_i) == 0:
                continue
            cpi, d2i = closest_point_on_triangles(
                np.repeat(points[i][None], len(ids_i), axis=0),
                self.tri_verts[ids_i],
            )
            j = _argmin_tie(d2i, ids_i)
            if d2i[j] < best_d2[i] or (d2i[j] == best_d2[i] and ids_i[j] < best[i]):
                best[i] = ids_i[j]
                best_d2[i] = d2i[j]
                best_cp[i] = cpi[j]
        return np.sqrt(best_d2), best_cp, best


def _argmin_tie(values, ids):
    """Index of the minimum value; ties resolved toward the lowest id."""
    m = values.min()
    tied = np.flatnonzero(values == m)
    return tied[np.argmin(ids[tied])]
