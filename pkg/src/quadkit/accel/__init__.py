"""Backend selection for the closest-point kernel.

The compiled extension (``quadkit._accel``) is preferred; a pure
numpy/scipy implementation with identical results is used when the
extension is unavailable or ``QUADKIT_NO_NATIVE=1`` is set.
"""

import logging
import os

import numpy as np

from .bvh import PythonClosestPoint, build_bvh

log = logging.getLogger(__name__)

_native = None
if not os.environ.get("QUADKIT_NO_NATIVE"):
    try:
        from .. import _accel as _native
    except ImportError:  # pragma: no cover - depends on build environment
        log.info("quadkit._accel extension not built; using pure-python kernel")


def backend_name():
    return "native" if _native is not None else "python"


class SurfaceIndex:
    """Closest-point queries against a triangle soup.

    Build once, query many times. ``query`` returns (dist, closest_point,
    tri_id) arrays; ties in distance resolve to the lowest triangle id on
    both backends.
    """

    def __init__(self, tri_verts):
        tri_verts = np.ascontiguousarray(tri_verts, dtype=np.float64)
        if tri_verts.ndim != 3 or tri_verts.shape[1:] != (3, 3):
            raise ValueError("tri_verts must have shape (T, 3, 3)")
        self.n_triangles = len(tri_verts)
        if _native is not None:
            self._tree = build_bvh(tri_verts)
            self._fallback = None
        else:
            self._tree = None
            self._fallback = PythonClosestPoint(tri_verts)

    def query(self, points):
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if self._fallback is not None:
            return self._fallback.query(points)
        t = self._tree
        return _native.bvh_closest_points(
            points, t["tri_verts"], t["order"], t["node_min"], t["node_max"],
            t["node_left"], t["node_right"], t["node_start"], t["node_count"],
        )
