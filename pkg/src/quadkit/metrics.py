"""Layout simplicity and mesh quality metrics.

Loop simplicity scores the area share controlled by simple loops (no
self-intersections, rotation index <= 1); the overall score is the minimum
of the face-loop and edge-loop ratios. Also provides scaled Jacobian and a
sampled symmetric Hausdorff distance.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .accel import SurfaceIndex
from .loops import EdgeLoop, FaceLoop, enumerate_edge_loops, enumerate_face_loops, irregular_vertices
from .mesh import QuadMesh

log = logging.getLogger(__name__)

_IND_TOL = 1e-9


@dataclass
class LoopMeasure:
    self_intersections: int
    rotation_index: float

    @property
    def is_simple(self):
        return self.self_intersections == 0 and self.rotation_index <= 1.0 + _IND_TOL


@dataclass
class SimplicityReport:
    s_fl: float
    s_el: float
    n_charts: int | None = None
    n_irregular: int | None = None
    face_loop_measures: list = field(default_factory=list)
    edge_loop_measures: list = field(default_factory=list)

    @property
    def s_l(self):
        return min(self.s_fl, self.s_el)

    def to_json_dict(self):
        d = {"S_fl": self.s_fl, "S_el": self.s_el, "S_l": self.s_l}
        if self.n_charts is not None:
            d["N_c"] = self.n_charts
        if self.n_irregular is not None:
            d["N_I"] = self.n_irregular
        return d


def self_intersection_count(loop):
    """Repeated faces (face-loops) or repeated vertices (edge-loops).

    Counted as total occurrences minus distinct items; the closure vertex
    of a closed loop is stored once and never counts as a repeat.
    """
    if isinstance(loop, FaceLoop):
        items = loop.faces
    elif isinstance(loop, EdgeLoop):
        items = loop.vertices
    else:
        raise TypeError("expected EdgeLoop or FaceLoop")
    return len(items) - len(set(items))


def polyline_rotation_index(points, closed, signed=True):
    """Turning of a polyline projected to its best-fit plane, over 2*pi.

    ``signed=True`` (default) accumulates signed turning angles and returns
    the absolute total - the spirality measure (figure-eight shapes are
    instead caught by their self-intersections). ``signed=False`` sums
    absolute per-node turning. Degenerate (near-collinear) polylines give 0.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 3:
        return 0.0
    origin, normal, bu, bv = geometry.best_fit_plane(pts)
    q = pts - origin
    xy = np.stack([q @ bu, q @ bv], axis=1)

    if closed:
        seg = np.roll(xy, -1, axis=0) - xy       # segment i -> i+1
        pairs = zip(seg, np.roll(seg, -1, axis=0))
    else:
        seg = xy[1:] - xy[:-1]
        pairs = zip(seg[:-1], seg[1:])

    lens = np.linalg.norm(seg, axis=1)
    scale = lens.max()
    if scale <= 0:
        return 0.0
    # collinearity guard: all nodes within 1e-9 (relative) of a line
    _, s, _ = np.linalg.svd(xy - xy.mean(axis=0), full_matrices=False)
    if s[1] <= 1e-9 * max(s[0], 1.0):
        return 0.0

    total = 0.0
    total_abs = 0.0
    for a, b in pairs:
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na <= 1e-15 * scale or nb <= 1e-15 * scale:
            continue
        ang = np.arctan2(a[0] * b[1] - a[1] * b[0], a @ b)
        total += ang
        total_abs += abs(ang)
    turning = abs(total) if signed else total_abs
    return float(turning / (2.0 * np.pi))


def rotation_index(loop, mesh, signed=True):
    """Rotation index of a traced loop on ``mesh``.

    Face-loops use the polyline of face centers; edge-loops use their
    vertex polyline.
    """
    if isinstance(loop, FaceLoop):
        centers = [mesh.face_points(f).mean(axis=0) for f in loop.faces]
        return polyline_rotation_index(centers, loop.closed, signed)
    return polyline_rotation_index(mesh.vertices[np.asarray(loop.vertices)],
                                   loop.closed, signed)


def measure_loop(loop, mesh, signed=True):
    return LoopMeasure(self_intersection_count(loop),
                       rotation_index(loop, mesh, signed))


def loop_simplicity(mesh, complex_=None, signed=True):
    """Simplicity report over every face-loop and edge-loop of ``mesh``.

    Ratio denominators sum face area per loop occurrence, so a face shared
    by two loop directions is counted twice and a self-crossing strip
    counts its repeated faces twice; numerators use the same terms,
    restricted to simple loops, so an all-simple mesh scores exactly 1.0.

    Quad-dominant input is scored on its quad subset (with a warning).
    """
    if isinstance(mesh, QuadMesh) and not mesh.is_pure_quad:
        log.warning("mesh is not pure quad; scoring the quad subset only")
        mesh = QuadMesh(mesh.vertices,
                        [f for f in mesh.faces if len(f) == 4])
    areas = mesh.face_areas()
    edge_area = np.zeros(mesh.n_edges)
    for e in range(mesh.n_edges):
        f0, f1 = mesh.edge_faces(e)
        edge_area[e] = areas[f0] + (areas[f1] if f1 >= 0 else 0.0)

    fl_meas, el_meas = [], []
    num = den = 0.0
    for loop in enumerate_face_loops(mesh):
        m = measure_loop(loop, mesh, signed)
        fl_meas.append(m)
        term = float(sum(areas[f] for f in loop.faces))
        den += term
        if m.is_simple:
            num += term
    s_fl = num / den if den > 0 else 1.0

    num = den = 0.0
    for loop in enumerate_edge_loops(mesh):
        m = measure_loop(loop, mesh, signed)
        el_meas.append(m)
        term = float(sum(edge_area[e] for e in loop.edges))
        den += term
        if m.is_simple:
            num += term
    s_el = num / den if den > 0 else 1.0

    n_charts = None
    n_irr = None
    if complex_ is not None:
        n_charts = complex_.n_charts
    if isinstance(mesh, QuadMesh) and mesh.is_pure_quad:
        n_irr = irregular_vertices(mesh)["n_reported"]
    return SimplicityReport(s_fl, s_el, n_charts, n_irr, fl_meas, el_meas)


def scaled_jacobian(mesh):
    """Per-quad scaled Jacobian and mesh aggregates.

    Corner value is the normal-aligned sine of the corner angle (1 for a
    rectangle corner, negative when the corner is flipped). A quad with a
    zero-length edge scores -1 and is flagged.

    Returns dict with per-quad values, ``min`` (global) and area-weighted
    ``mean`` of per-quad minima.
    """
    values = np.empty(mesh.n_faces)
    flagged = []
    normals = mesh.face_normals()
    for f, poly in enumerate(mesh.faces):
        pts = mesh.vertices[np.asarray(poly)]
        d = len(poly)
        n = normals[f]
        worst = 1.0
        bad = False
        for i in range(d):
            e1 = pts[(i + 1) % d] - pts[i]
            e2 = pts[(i - 1) % d] - pts[i]
            l1, l2 = np.linalg.norm(e1), np.linalg.norm(e2)
            if l1 <= 0 or l2 <= 0:
                bad = True
                break
            worst = min(worst, float(np.dot(np.cross(e1, e2), n) / (l1 * l2)))
        if bad:
            values[f] = -1.0
            flagged.append(f)
        else:
            values[f] = worst
    areas = mesh.face_areas()
    wsum = areas.sum()
    mean = float((values * areas).sum() / wsum) if wsum > 0 else -1.0
    return {"per_face": values, "min": float(values.min()),
            "mean": mean, "flagged": flagged}


def _soup(mesh):
    if isinstance(mesh, QuadMesh):
        return mesh.triangle_soup()[0]
    return mesh.triangle_soup()


def hausdorff(mesh_a, mesh_b, samples=100_000, seed=0):
    """Sampled symmetric Hausdorff distance between two meshes.

    Surfaces are sampled area-weighted; each sample is measured against
    the other mesh with an exact closest-point query. The headline value
    is scaled to percent of half the longest bounding-box extent of
    ``mesh_a`` (the scale under which a mesh normalized to the [-1,1]^3
    box reports absolute distance x 100).

    Returns dict: ``percent`` (headline), ``distance`` (model units) and
    the two one-sided distances.
    """
    soup_a, soup_b = _soup(mesh_a), _soup(mesh_b)
    rng = np.random.default_rng(seed)
    pa, _ = geometry.sample_surface(soup_a, samples, rng)
    pb, _ = geometry.sample_surface(soup_b, samples, rng)
    # include vertices so sharp extrema are never missed
    pa = np.vstack([pa, mesh_a.vertices])
    pb = np.vstack([pb, mesh_b.vertices])
    d_ab = SurfaceIndex(soup_b).query(pa)[0].max()
    d_ba = SurfaceIndex(soup_a).query(pb)[0].max()
    dist = float(max(d_ab, d_ba))
    lo, hi = geometry.bbox(mesh_a.vertices)
    half_extent = float((hi - lo).max()) / 2.0
    if half_extent <= 0:
        half_extent = 1.0
    return {
        "distance": dist,
        "percent": 100.0 * dist / half_extent,
        "a_to_b": float(d_ab),
        "b_to_a": float(d_ba),
    }


def table_report(mesh, complex_, hausdorff_against=None, samples=100_000, seed=0):
    """JSON-ready metric report (Table-1 style keys)."""
    rep = loop_simplicity(mesh, complex_)
    sj = scaled_jacobian(mesh)
    out = rep.to_json_dict()
    out["SJ_min"] = sj["min"]
    out["SJ_mean"] = sj["mean"]
    if hausdorff_against is not None:
        out["d_h"] = hausdorff(mesh, hausdorff_against, samples, seed)["percent"]
    return out
