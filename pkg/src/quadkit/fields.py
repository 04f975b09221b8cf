"""Chart distance fields (CDF/DCDF) built analytically from a quad mesh.

Pipeline: assign each edge its ring-average length, split every chart at
the half-length flow lines, then evaluate per-point subchart coordinates
with the edge-direction projection formulas. The CDF is
``1 - max(px, py)`` (1 at chart centers, 0 at chart boundaries) and the
DCDF is its complement ``1 - max(1-px, 1-py)``.

Coordinates are computed through the chart's cumulative-length axes, which
realizes the mid-edge virtual splits implicitly and keeps the field exact
and C0 across subchart boundaries.
"""

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import geometry
from .accel import SurfaceIndex
from .loops import enumerate_face_loops
from .mesh import MeshError

_NONDIFF_TOL = 1e-7


def assign_ring_lengths(mesh):
    """Per-edge assigned length: the mean edge length of its edge-ring."""
    pos = mesh.vertices
    raw = np.empty(mesh.n_edges)
    for e in range(mesh.n_edges):
        a, b = mesh.edge_vertices(e)
        raw[e] = np.linalg.norm(pos[a] - pos[b])
    out = np.empty(mesh.n_edges)
    for ring in enumerate_face_loops(mesh):
        ids = np.asarray(ring.ring_edges)
        out[ids] = raw[ids].mean()
    return out


# ---------------------------------------------------------------------------
# Appendix-style subchart coordinates
# ---------------------------------------------------------------------------

def _cross_dot(b, a, n):
    """(B x A) . n  ==  the 2D perpendicular dot A . B_perp after flattening."""
    return np.einsum("ij,ij->i", np.cross(b, a), n)


def subchart_coords(points, quad_pts, coord_lo=(0.0, 0.0), coord_hi=(1.0, 1.0)):
    """Subchart coordinates of ``points`` inside one 3D quad face.

    ``quad_pts`` holds corners q00,q10,q11,q01 carrying coordinates
    (a0,b0),(a1,b0),(a1,b1),(a0,b1) = (lo, hi). Each point is evaluated in
    the triangle of the fixed q00-q11 diagonal split it falls in (per-
    triangle rigid flattening is equivalent to the normal-projected cross
    products used here).

    Returns (px, py, tri_index).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    q = np.asarray(quad_pts, dtype=np.float64)
    a0, b0 = coord_lo
    a1, b1 = coord_hi
    tx, ty, tri = _quad_param(pts,
                              np.repeat(q[None, 0], len(pts), axis=0),
                              np.repeat(q[None, 1], len(pts), axis=0),
                              np.repeat(q[None, 2], len(pts), axis=0),
                              np.repeat(q[None, 3], len(pts), axis=0))
    px = a0 + tx * (a1 - a0)
    py = b0 + ty * (b1 - b0)
    return px, py, tri


def _quad_param(p, q00, q10, q11, q01, tri=None):
    """Fractional coordinates (t_x, t_y) of points in their quad triangles.

    Triangle 0 is (q00,q10,q11), triangle 1 is (q00,q11,q01); when ``tri``
    is None the split is decided by the signed side of the diagonal plane,
    ties resolving to triangle 0.
    """
    n0 = np.cross(q10 - q00, q11 - q00)
    n1 = np.cross(q11 - q00, q01 - q00)
    if tri is None:
        # side of the q00-q11 diagonal; on-diagonal ties go to triangle 0
        diag = q11 - q00
        side = np.einsum("ij,ij->i", np.cross(diag, p - q00), n0 + n1)
        tri = (side > 0).astype(np.int64)  # positive side is toward q01

    tx = np.empty(len(p))
    ty = np.empty(len(p))
    m0 = tri == 0
    if m0.any():
        w = q11[m0] - q10[m0]
        u = q10[m0] - q00[m0]
        n = n0[m0]
        tx[m0] = _cross_dot(w, p[m0] - q00[m0], n) / _cross_dot(w, u, n)
        ty[m0] = _cross_dot(u, p[m0] - q10[m0], n) / _cross_dot(u, q11[m0] - q10[m0], n)
    m1 = ~m0
    if m1.any():
        u = q11[m1] - q01[m1]
        w = q01[m1] - q00[m1]
        n = n1[m1]
        tx[m1] = _cross_dot(w, p[m1] - q01[m1], n) / _cross_dot(w, u, n)
        ty[m1] = _cross_dot(u, p[m1] - q00[m1], n) / _cross_dot(u, w, n)
    return tx, ty, tri


def _quad_param_gradients(q00, q10, q11, q01, tri):
    """Constant per-triangle gradients of (t_x, t_y) in 3D."""
    gx = np.empty_like(q00)
    gy = np.empty_like(q00)
    m0 = tri == 0
    if m0.any():
        u = q10[m0] - q00[m0]
        w = q11[m0] - q10[m0]
        n = np.cross(u, w)
        nw = np.cross(n, w)
        gx[m0] = nw / np.einsum("ij,ij->i", u, nw)[:, None]
        nu = np.cross(n, u)
        gy[m0] = nu / np.einsum("ij,ij->i", w, nu)[:, None]
    m1 = ~m0
    if m1.any():
        u = q11[m1] - q01[m1]
        w = q01[m1] - q00[m1]
        n = np.cross(u, w)
        nw = np.cross(n, w)
        gx[m1] = nw / np.einsum("ij,ij->i", u, nw)[:, None]
        nu = np.cross(n, u)
        gy[m1] = nu / np.einsum("ij,ij->i", w, nu)[:, None]
    return gx, gy


# ---------------------------------------------------------------------------
# Chart splitting
# ---------------------------------------------------------------------------

class ChartLayout:
    """Field scaffolding of one chart: cumulative axes and split location."""

    def __init__(self, chart, mesh, lengths):
        self.chart = chart
        m, n = chart.m, chart.n
        self.len_x = np.array([lengths[chart.x_edges[i, 0]] for i in range(m)])
        self.len_y = np.array([lengths[chart.y_edges[0, j]] for j in range(n)])
        for j in range(n + 1):
            assert np.allclose([lengths[e] for e in chart.x_edges[:, j]], self.len_x)
        self.cum_x = np.concatenate([[0.0], np.cumsum(self.len_x)])
        self.cum_y = np.concatenate([[0.0], np.cumsum(self.len_y)])
        self.width = float(self.cum_x[-1])
        self.height = float(self.cum_y[-1])
        self._positions = mesh.vertices
        self.center = self.param_to_point(
            np.array([self.width / 2]), np.array([self.height / 2]))[0]
        vg = chart.vertex_grid
        self.corner_pos = np.array([
            [mesh.vertices[vg[0, 0]], mesh.vertices[vg[0, n]]],
            [mesh.vertices[vg[m, 0]], mesh.vertices[vg[m, n]]],
        ])  # indexed [x_side][y_side]
        self.corner_ids = np.array([[vg[0, 0], vg[0, n]], [vg[m, 0], vg[m, n]]])

    def _face_corners(self, kx, ky):
        vg = self.chart.vertex_grid
        pos = self._positions
        return (pos[vg[kx, ky]], pos[vg[kx + 1, ky]],
                pos[vg[kx + 1, ky + 1]], pos[vg[kx, ky + 1]])

    def param_to_point(self, xs, ys):
        """Map cumulative-length coordinates to on-surface points."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        kx = np.clip(np.searchsorted(self.cum_x, xs, side="right") - 1,
                     0, self.chart.m - 1)
        ky = np.clip(np.searchsorted(self.cum_y, ys, side="right") - 1,
                     0, self.chart.n - 1)
        fx = (xs - self.cum_x[kx]) / self.len_x[kx]
        fy = (ys - self.cum_y[ky]) / self.len_y[ky]
        fx = np.clip(fx, 0.0, 1.0)
        fy = np.clip(fy, 0.0, 1.0)
        out = np.empty((len(xs), 3))
        for i in range(len(xs)):
            q00, q10, q11, q01 = self._face_corners(int(kx[i]), int(ky[i]))
            if fx[i] >= fy[i]:
                out[i] = q00 + fx[i] * (q10 - q00) + fy[i] * (q11 - q10)
            else:
                out[i] = q00 + fx[i] * (q11 - q01) + fy[i] * (q01 - q00)
        return out

    def flow_polylines(self):
        """The two mid-chart flow polylines (x = W/2 and y = H/2)."""
        ys = np.unique(np.concatenate([self.cum_y, [self.height / 2]]))
        xs = np.unique(np.concatenate([self.cum_x, [self.width / 2]]))
        line_x = self.param_to_point(np.full(len(ys), self.width / 2), ys)
        line_y = self.param_to_point(xs, np.full(len(xs), self.height / 2))
        return line_x, line_y


@dataclass
class Subchart:
    chart_index: int
    quadrant: tuple            # (0|1, 0|1): x then y side of the split
    faces_full: list
    faces_split: list
    dims: tuple                # fractional quad counts (du, dv)
    corner_vertex: int         # chart corner = its dual-chart center


class ChartSplit:
    """Chart splitting result: per-chart layouts, subcharts, dual charts."""

    def __init__(self, complex_, lengths):
        mesh = complex_.mesh
        self.mesh = mesh
        self.complex = complex_
        self.lengths = lengths
        self.layouts = [ChartLayout(c, mesh, lengths) for c in complex_.charts]
        self.subcharts = []
        for ci, (chart, lay) in enumerate(zip(complex_.charts, self.layouts)):
            sx = lay.width / 2.0
            sy = lay.height / 2.0
            ix = int(np.searchsorted(lay.cum_x, sx, side="left"))
            iy = int(np.searchsorted(lay.cum_y, sy, side="left"))
            exact_x = abs(lay.cum_x[min(ix, chart.m)] - sx) <= 1e-12 * max(lay.width, 1.0)
            exact_y = abs(lay.cum_y[min(iy, chart.n)] - sy) <= 1e-12 * max(lay.height, 1.0)
            kx = np.searchsorted(lay.cum_x, sx, side="right") - 1
            ky = np.searchsorted(lay.cum_y, sy, side="right") - 1
            gx = float(np.searchsorted(lay.cum_x, sx, side="left")) if exact_x \
                else kx + (sx - lay.cum_x[kx]) / lay.len_x[kx]
            gy = float(np.searchsorted(lay.cum_y, sy, side="left")) if exact_y \
                else ky + (sy - lay.cum_y[ky]) / lay.len_y[ky]
            for qx in (0, 1):
                for qy in (0, 1):
                    full, split = [], []
                    for i in range(chart.m):
                        for j in range(chart.n):
                            in_x = (i + 1 <= gx) if qx == 0 else (i >= gx)
                            in_y = (j + 1 <= gy) if qy == 0 else (j >= gy)
                            straddle_x = i < gx < i + 1
                            straddle_y = j < gy < j + 1
                            f = int(chart.face_grid[i, j])
                            if in_x and in_y:
                                full.append(f)
                            elif ((in_x or straddle_x) and (in_y or straddle_y)
                                  and (straddle_x or straddle_y)):
                                split.append(f)
                    du = gx if qx == 0 else chart.m - gx
                    dv = gy if qy == 0 else chart.n - gy
                    self.subcharts.append(Subchart(
                        ci, (qx, qy), full, split, (du, dv),
                        int(lay.corner_ids[qx, qy])))
        self.dual_charts = {}
        for k, sc in enumerate(self.subcharts):
            self.dual_charts.setdefault(sc.corner_vertex, []).append(k)

    def chart_centers(self):
        return np.array([lay.center for lay in self.layouts])

    def dual_centers(self):
        return {v: self.mesh.vertices[v] for v in self.dual_charts}


def split_charts(complex_, lengths=None):
    """Build the :class:`ChartSplit` of a base complex."""
    if lengths is None:
        lengths = assign_ring_lengths(complex_.mesh)
    return ChartSplit(complex_, lengths)


# ---------------------------------------------------------------------------
# Field evaluation
# ---------------------------------------------------------------------------

@dataclass
class FieldSampleBatch:
    """Struct-of-arrays of per-point field samples."""

    position: np.ndarray
    normal: np.ndarray
    cdf: np.ndarray
    dcdf: np.ndarray
    grad_cdf: np.ndarray
    grad_dcdf: np.ndarray
    offset_chart: np.ndarray
    offset_dual: np.ndarray
    flag_cdf: np.ndarray = None
    flag_dcdf: np.ndarray = None
    face: np.ndarray = None

    def __len__(self):
        return len(self.position)

    def chart_center_estimates(self):
        return self.position + self.offset_chart

    def dual_center_estimates(self):
        return self.position + self.offset_dual

    def save(self, path):
        path = str(path)
        if path.endswith(".json"):
            recs = []
            for i in range(len(self)):
                recs.append({
                    "pos": self.position[i].tolist(),
                    "normal": self.normal[i].tolist(),
                    "cdf": float(self.cdf[i]),
                    "dcdf": float(self.dcdf[i]),
                    "gcdf": self.grad_cdf[i].tolist(),
                    "gdcdf": self.grad_dcdf[i].tolist(),
                    "off_c": self.offset_chart[i].tolist(),
                    "off_dc": self.offset_dual[i].tolist(),
                })
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(recs, fh)
        else:
            np.savez(path if path.endswith(".npz") else path + ".npz",
                     pos=self.position, normal=self.normal, cdf=self.cdf,
                     dcdf=self.dcdf, gcdf=self.grad_cdf, gdcdf=self.grad_dcdf,
                     off_c=self.offset_chart, off_dc=self.offset_dual)


def load_field(path):
    path = str(path)
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            recs = json.load(fh)
        get = lambda k: np.array([r[k] for r in recs], dtype=np.float64)
        return FieldSampleBatch(get("pos"), get("normal"), get("cdf"),
                                get("dcdf"), get("gcdf"), get("gdcdf"),
                                get("off_c"), get("off_dc"))
    z = np.load(path)
    return FieldSampleBatch(z["pos"], z["normal"], z["cdf"], z["dcdf"],
                            z["gcdf"], z["gdcdf"], z["off_c"], z["off_dc"])


class ChartField:
    """Analytic CDF/DCDF evaluator (optionally densified).

    ``densify=N`` applies the closed-form refinement that multiplies the
    implied chart count by ``4**N`` for N in {1, 2} (each subchart gains an
    N x N cell grid of new charts).
    """

    def __init__(self, mesh, split=None, densify=0):
        if split is None:
            from .basecomplex import build_base_complex

            split = split_charts(build_base_complex(mesh))
        if densify < 0:
            raise ValueError("densify must be >= 0")
        self.mesh = mesh
        self.split = split
        self.densify = int(densify)
        self._bbox_diag = geometry.bbox_diagonal(mesh.vertices)

        n_f = mesh.n_faces
        self._f_chart = np.full(n_f, -1, dtype=np.int64)
        self._f_q = np.zeros((n_f, 4, 3))
        self._f_x01 = np.zeros((n_f, 2))
        self._f_y01 = np.zeros((n_f, 2))
        for ci, (chart, lay) in enumerate(zip(split.complex.charts, split.layouts)):
            for i in range(chart.m):
                for j in range(chart.n):
                    f = int(chart.face_grid[i, j])
                    self._f_chart[f] = ci
                    vg = chart.vertex_grid
                    self._f_q[f, 0] = mesh.vertices[vg[i, j]]
                    self._f_q[f, 1] = mesh.vertices[vg[i + 1, j]]
                    self._f_q[f, 2] = mesh.vertices[vg[i + 1, j + 1]]
                    self._f_q[f, 3] = mesh.vertices[vg[i, j + 1]]
                    self._f_x01[f] = lay.cum_x[i], lay.cum_x[i + 1]
                    self._f_y01[f] = lay.cum_y[j], lay.cum_y[j + 1]
        self._chart_w = np.array([lay.width for lay in split.layouts])
        self._chart_h = np.array([lay.height for lay in split.layouts])
        self._chart_center = split.chart_centers()
        # locate against the grid-ordered diagonal split so the triangle
        # index agrees with the coordinate formulas' two-triangle cases
        soup = np.empty((2 * n_f, 3, 3))
        soup[0::2] = self._f_q[:, [0, 1, 2]]
        soup[1::2] = self._f_q[:, [0, 2, 3]]
        self._index = SurfaceIndex(soup)

    def densified(self, n):
        return ChartField(self.mesh, self.split, densify=self.densify + n)

    def locate(self, points):
        """Nearest on-surface points: (face, tri_in_face, projection, dist)."""
        dist, proj, tri_id = self._index.query(points)
        face = tri_id // 2
        tri = (tri_id % 2).astype(np.int64)
        return face, tri, proj, dist

    def classify(self, points):
        """Chart (and refined-cell) label per point.

        Returns an (N, 3) int array of (chart, col, row); col/row are the
        cell indices of the densified chart grid (2N per axis), zero when
        the field is not densified.
        """
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        face, tri, proj, _ = self.locate(points)
        q00, q10 = self._f_q[face, 0], self._f_q[face, 1]
        q11, q01 = self._f_q[face, 2], self._f_q[face, 3]
        tx, ty, tri = _quad_param(proj, q00, q10, q11, q01, tri)
        x0, x1 = self._f_x01[face, 0], self._f_x01[face, 1]
        y0, y1 = self._f_y01[face, 0], self._f_y01[face, 1]
        chart = self._f_chart[face]
        w = self._chart_w[chart]
        h = self._chart_h[chart]
        rx = 2.0 * (x0 + tx * (x1 - x0)) / w - 1.0
        ry = 2.0 * (y0 + ty * (y1 - y0)) / h - 1.0
        out = np.zeros((len(points), 3), dtype=np.int64)
        out[:, 0] = chart
        if self.densify > 0:
            n = self.densify
            out[:, 1] = np.clip(np.floor((rx + 1.0) * n), 0, 2 * n - 1)
            out[:, 2] = np.clip(np.floor((ry + 1.0) * n), 0, 2 * n - 1)
        return out

    def evaluate(self, points, normals=None, max_dist_frac=0.05):
        """Field samples at arbitrary points near the quad surface."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        face, tri, proj, dist = self.locate(points)
        bad = dist > max_dist_frac * self._bbox_diag
        if bad.any():
            raise MeshError(
                "query points too far from the quad surface: indices "
                f"{np.flatnonzero(bad)[:16].tolist()}")
        return self.evaluate_on_faces(points, face, tri, proj, normals)

    def evaluate_on_faces(self, position, face, tri, proj=None, normals=None):
        face = np.asarray(face, dtype=np.int64)
        if proj is None:
            proj = position
        q00 = self._f_q[face, 0]
        q10 = self._f_q[face, 1]
        q11 = self._f_q[face, 2]
        q01 = self._f_q[face, 3]
        tx, ty, tri = _quad_param(proj, q00, q10, q11, q01, tri)
        gtx, gty = _quad_param_gradients(q00, q10, q11, q01, tri)

        x0, x1 = self._f_x01[face, 0], self._f_x01[face, 1]
        y0, y1 = self._f_y01[face, 0], self._f_y01[face, 1]
        w = self._chart_w[self._f_chart[face]]
        h = self._chart_h[self._f_chart[face]]
        xs = x0 + tx * (x1 - x0)
        ys = y0 + ty * (y1 - y0)
        rx = 2.0 * xs / w - 1.0        # signed normalized coordinate
        ry = 2.0 * ys / h - 1.0
        px = np.clip(np.abs(rx), 0.0, 1.0)
        py = np.clip(np.abs(ry), 0.0, 1.0)
        gpx = np.sign(rx)[:, None] * (2.0 * (x1 - x0) / w)[:, None] * gtx
        gpy = np.sign(ry)[:, None] * (2.0 * (y1 - y0) / h)[:, None] * gty

        if self.densify == 0:
            cdf = 1.0 - np.maximum(px, py)
            dcdf = 1.0 - np.maximum(1.0 - px, 1.0 - py)
            x_active = px >= py
            gcdf = -np.where(x_active[:, None], gpx, gpy)
            gdcdf = np.where(x_active[:, None], gpy, gpx)
            flag_c = np.abs(px - py) < _NONDIFF_TOL
            flag_d = flag_c.copy()
            c_center = self._chart_center[self._f_chart[face]]
            cx = np.where(rx >= 0, 1, 0)
            cy = np.where(ry >= 0, 1, 0)
            d_center = np.empty_like(c_center)
            for ci in np.unique(self._f_chart[face]):
                m = self._f_chart[face] == ci
                lay = self.split.layouts[ci]
                d_center[m] = lay.corner_pos[cx[m], cy[m]]
        else:
            cdf, dcdf, gcdf, gdcdf, flag_c, flag_d, pxc, pyc, pxd, pyd = \
                _densified_fields(px, py, gpx, gpy, self.densify)
            # map refined cell centers back to the surface, chart by chart
            xc = 0.5 * w * (1.0 + np.sign(rx) * pxc)
            yc = 0.5 * h * (1.0 + np.sign(ry) * pyc)
            xd = 0.5 * w * (1.0 + np.sign(rx) * pxd)
            yd = 0.5 * h * (1.0 + np.sign(ry) * pyd)
            c_center = np.empty((len(face), 3))
            d_center = np.empty((len(face), 3))
            for ci in np.unique(self._f_chart[face]):
                m = self._f_chart[face] == ci
                lay = self.split.layouts[ci]
                c_center[m] = lay.param_to_point(xc[m], yc[m])
                d_center[m] = lay.param_to_point(xd[m], yd[m])

        # edge / diagonal proximity also makes the gradient one-sided
        near_edge = (np.minimum(np.minimum(np.abs(ty), np.abs(1 - tx)),
                                np.abs(tx - ty)) < _NONDIFF_TOL)
        near_edge |= (np.minimum(np.abs(tx), np.abs(1 - ty)) < _NONDIFF_TOL)
        flag_c = flag_c | near_edge
        flag_d = flag_d | near_edge

        if normals is None:
            nrm = geometry.normalize_rows(np.cross(q10 - q00, q11 - q00))
            m1 = tri == 1
            if m1.any():
                nrm[m1] = geometry.normalize_rows(
                    np.cross(q11[m1] - q00[m1], q01[m1] - q00[m1]))
        else:
            nrm = np.atleast_2d(np.asarray(normals, dtype=np.float64))

        def tangential_unit(g, flag):
            gt = g - np.einsum("ij,ij->i", g, nrm)[:, None] * nrm
            norm = np.linalg.norm(gt, axis=1)
            ok = (norm > 1e-12) & ~flag
            unit = np.where(ok[:, None], gt / np.where(norm > 0, norm, 1.0)[:, None], 0.0)
            return unit, ~ok

        ucdf, flag_c = tangential_unit(gcdf, flag_c)
        udcdf, flag_d = tangential_unit(gdcdf, flag_d)

        return FieldSampleBatch(
            position=position, normal=nrm,
            cdf=cdf, dcdf=dcdf, grad_cdf=ucdf, grad_dcdf=udcdf,
            offset_chart=c_center - position,
            offset_dual=d_center - position,
            flag_cdf=flag_c, flag_dcdf=flag_d, face=face,
        )


def _densified_fields(px, py, gpx, gpy, n):
    """Closed-form refinement of the fields and their raw gradients.

    Works directly in (px, py); the published (u, v) form is symmetric
    under the coordinate swap so both parametrization branches yield the
    same values.
    """
    cells_x = np.clip(np.floor(n * px), 0, n - 1)
    cells_y = np.clip(np.floor(n * py), 0, n - 1)
    cx = (cells_x + 0.5) / n
    cy = (cells_y + 0.5) / n
    ax = 2.0 * n * np.abs(px - cx)
    ay = 2.0 * n * np.abs(py - cy)
    cdf = 1.0 - np.maximum(ax, ay)
    x_act = ax >= ay
    gax = (2.0 * n) * np.sign(px - cx)[:, None] * gpx
    gay = (2.0 * n) * np.sign(py - cy)[:, None] * gpy
    gcdf = -np.where(x_act[:, None], gax, gay)
    flag_c = np.abs(ax - ay) < _NONDIFF_TOL

    rnd_x = np.round(n * px)
    rnd_y = np.round(n * py)
    bx = 2.0 * np.abs(n * px - rnd_x)
    by = 2.0 * np.abs(n * py - rnd_y)
    dcdf = 1.0 - np.maximum(bx, by)
    x_act_d = bx >= by
    gbx = (2.0 * n) * np.sign(n * px - rnd_x)[:, None] * gpx
    gby = (2.0 * n) * np.sign(n * py - rnd_y)[:, None] * gpy
    gdcdf = -np.where(x_act_d[:, None], gbx, gby)
    flag_d = np.abs(bx - by) < _NONDIFF_TOL

    pxc, pyc = cx, cy
    pxd = np.clip(rnd_x / n, 0.0, 1.0)
    pyd = np.clip(rnd_y / n, 0.0, 1.0)
    return cdf, dcdf, gcdf, gdcdf, flag_c, flag_d, pxc, pyc, pxd, pyd


def densify_values(cdf, dcdf, n):
    """Generic closed-form densification of field values.

    Uses the branch (u, v) = (dcdf, 1 - cdf); the transformation is
    symmetric in (u, v) so the alternative branch gives identical output.
    """
    if n < 1:
        raise ValueError("densification factor must be >= 1")
    u = np.asarray(dcdf, dtype=np.float64)
    v = 1.0 - np.asarray(cdf, dtype=np.float64)
    cu = (np.clip(np.floor(n * u), 0, n - 1) + 0.5) / n
    cv = (np.clip(np.floor(n * v), 0, n - 1) + 0.5) / n
    cdf_n = 1.0 - 2.0 * n * np.maximum(np.abs(u - cu), np.abs(v - cv))
    dcdf_n = 1.0 - 2.0 * np.maximum(np.abs(n * u - np.round(n * u)),
                                    np.abs(n * v - np.round(n * v)))
    return cdf_n, dcdf_n


# ---------------------------------------------------------------------------
# Baking
# ---------------------------------------------------------------------------

def bake_fields(field, target, where="face-centers", n_samples=None, seed=0,
                max_dist_frac=0.05):
    """Evaluate a :class:`ChartField` on a target mesh.

    ``where``: 'face-centers', 'vertices' or 'sample-points' (area-weighted
    with ``n_samples``). The target must lie near the quad surface; points
    farther than ``max_dist_frac`` of the bbox diagonal raise with the
    offending indices.
    """
    if where == "face-centers":
        pts = target.face_centers()
        normals = target.face_normals()
    elif where == "vertices":
        pts = target.vertices
        normals = target.vertex_normals()
    elif where == "sample-points":
        rng = np.random.default_rng(seed)
        soup = target.triangle_soup()
        soup = soup[0] if isinstance(soup, tuple) else soup
        pts, tri_ids = geometry.sample_surface(
            soup, n_samples or 4 * target.n_faces, rng)
        normals = geometry.normalize_rows(
            geometry.triangle_normals(soup))[tri_ids]
    else:
        raise ValueError(f"unknown bake location {where!r}")
    return field.evaluate(pts, normals, max_dist_frac=max_dist_frac)


def field_colormap(values):
    """Map [0,1] to RGB uint8: dark blue at 0 through to dark red at 1."""
    x = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    # piecewise jet-style ramp
    r = np.clip(1.5 - np.abs(4.0 * x - 3.0), 0, 1)
    g = np.clip(1.5 - np.abs(4.0 * x - 2.0), 0, 1)
    b = np.clip(1.5 - np.abs(4.0 * x - 1.0), 0, 1)
    return (np.stack([r, g, b], axis=1) * 255).astype(np.uint8)


def save_field_ply(path, target, values):
    """Colored PLY of per-vertex or per-face field values on ``target``."""
    from .mesh import save_ply

    values = np.asarray(values, dtype=np.float64)
    if isinstance(target.faces, list):
        faces = target.faces
    else:
        faces = [list(map(int, f)) for f in target.faces]
    if len(values) == target.n_faces and target.n_faces != target.n_vertices:
        acc = np.zeros(target.n_vertices)
        cnt = np.zeros(target.n_vertices)
        for f, poly in enumerate(faces):
            for v in poly:
                acc[v] += values[f]
                cnt[v] += 1
        values = acc / np.maximum(cnt, 1)
    save_ply(path, target.vertices, faces, field_colormap(values))
