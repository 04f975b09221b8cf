"""Dataset curation: normalization, dedup, and simple-layout filtering.

Meshes are PCA-aligned and scaled into the [-1,1]^3 box; duplicates are
detected by a connectivity fingerprint plus a sampled chamfer distance;
the filter keeps only layouts passing the loop-simplicity and chart-shape
gates (thresholds measured in normalized coordinates).
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import geometry
from .basecomplex import build_base_complex
from .fields import assign_ring_lengths
from .loops import irregular_vertices
from .mesh import MeshError, QuadMesh, load_mesh
from .metrics import loop_simplicity

log = logging.getLogger(__name__)

SIMPLICITY_MIN = 0.618
MAX_CHARTS = 1024
MIN_CHART_AREA = 1.0 / 1024.0
MIN_CHART_SIDE = math.sqrt(1.0 / 1024.0)
MAX_BOUNDARIES = 8
MAX_NONPLANARITY = 0.5
CHAMFER_DUPLICATE = 1e-3


def normalize(mesh):
    """PCA-align and fit into [-1,1]^3.

    Axes are ordered by decreasing variance (largest spread along x) of
    the area-weighted vertex distribution; signs are canonicalized by
    non-negative per-axis skewness. Uniform scale and translation make
    the tight bounding box touch the unit cube on its longest axis pair.
    """
    v = mesh.vertices
    w = np.zeros(len(v))
    areas = mesh.face_areas()
    for f, poly in enumerate(mesh.faces):
        for x in poly:
            w[x] += areas[f] / len(poly)
    if w.sum() <= 0:
        w = np.ones(len(v))
    w = w / w.sum()
    mean = w @ v
    q = v - mean
    cov = (q * w[:, None]).T @ q
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    axes = evecs[:, order]
    if np.linalg.det(axes) < 0:
        axes[:, 2] = -axes[:, 2]
    x = q @ axes
    # sign canonicalization: non-negative weighted skewness per axis
    flips = np.ones(3)
    for k in range(3):
        if (w @ (x[:, k] ** 3)) < 0:
            flips[k] = -1.0
    x = x * flips
    lo, hi = x.min(axis=0), x.max(axis=0)
    scale = 2.0 / max(hi - lo)
    x = (x - (lo + hi) / 2.0) * scale
    faces = [list(f) for f in mesh.faces]
    if np.prod(flips) < 0:
        faces = [f[::-1] for f in faces]  # keep outward orientation
    feats = [mesh.edge_vertices(e) for e in np.flatnonzero(mesh.feature_edge)]
    return QuadMesh(x, faces, feature_edges=feats)


def connectivity_fingerprint(mesh, complex_=None):
    """Hashable connectivity summary used to bucket near-duplicates."""
    if complex_ is None:
        complex_ = build_base_complex(mesh)
    val = np.bincount(mesh.vertex_valence)
    dims = sorted((min(c.m, c.n), max(c.m, c.n)) for c in complex_.charts)
    irr = irregular_vertices(mesh)["n_reported"]
    return (mesh.n_faces, int(irr), tuple(val.tolist()), tuple(dims))


def chamfer_distance(mesh_a, mesh_b, samples=2048, seed=0):
    """Symmetric point-sample chamfer distance (mean of both directions)."""
    rng = np.random.default_rng(seed)
    pa, _ = geometry.sample_surface(mesh_a.triangle_soup()[0], samples, rng)
    pb, _ = geometry.sample_surface(mesh_b.triangle_soup()[0], samples, rng)
    d_ab = cKDTree(pb).query(pa)[0].mean()
    d_ba = cKDTree(pa).query(pb)[0].mean()
    return 0.5 * float(d_ab + d_ba)


def dedup(meshes, samples=2048, seed=0):
    """Indices of unique meshes (lowest index representative kept).

    Two meshes are duplicates when their connectivity fingerprints match
    and the chamfer distance between the normalized shapes is below
    ``CHAMFER_DUPLICATE``.
    """
    buckets = {}
    for i, m in enumerate(meshes):
        buckets.setdefault(connectivity_fingerprint(m), []).append(i)
    keep = []
    for key in sorted(buckets, key=repr):
        ids = buckets[key]
        reps = []
        for i in sorted(ids):
            dup = any(chamfer_distance(meshes[i], meshes[r], samples, seed)
                      < CHAMFER_DUPLICATE for r in reps)
            if not dup:
                reps.append(i)
        keep.extend(reps)
    return sorted(keep)


@dataclass
class CurationVerdict:
    keep: bool
    reasons: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {"keep": self.keep, "reasons": self.reasons,
                "measured": self.measured}


def _chart_geometry(mesh, complex_):
    lengths = assign_ring_lengths(mesh)
    areas = mesh.face_areas()
    min_area = math.inf
    min_side = math.inf
    for chart in complex_.charts:
        min_area = min(min_area, float(sum(areas[f] for f in chart.faces)))
        for side in chart.sides:
            min_side = min(min_side, float(sum(lengths[e] for e in side)))
    return min_area, min_side


def max_quad_nonplanarity(mesh):
    """max over quads of dist(v3, plane(v0,v1,v2)) / mean edge length."""
    worst = 0.0
    for poly in mesh.faces:
        if len(poly) != 4:
            continue
        p = mesh.vertices[np.asarray(poly)]
        n = np.cross(p[1] - p[0], p[2] - p[0])
        nl = np.linalg.norm(n)
        el = np.mean([np.linalg.norm(p[(i + 1) % 4] - p[i]) for i in range(4)])
        if nl <= 0 or el <= 0:
            continue
        d = abs((p[3] - p[0]) @ (n / nl))
        worst = max(worst, d / el)
    return worst


def curation_filter(mesh, complex_=None, report=None,
                    simplicity_min=SIMPLICITY_MIN,
                    max_nonplanarity=MAX_NONPLANARITY,
                    max_charts=MAX_CHARTS,
                    min_chart_area=MIN_CHART_AREA,
                    min_chart_side=MIN_CHART_SIDE,
                    max_boundaries=MAX_BOUNDARIES):
    """Apply the simple-layout gates in order; verdict records each one.

    Threshold semantics are inclusive on the passing side: a simplicity
    score of exactly ``simplicity_min`` passes, a chart count of exactly
    ``max_charts`` passes, areas and side lengths equal to the minima
    pass. Open meshes additionally need at least one interior irregular
    vertex.
    """
    if complex_ is None:
        complex_ = build_base_complex(mesh)
    if report is None:
        report = loop_simplicity(mesh, complex_)
    reasons = {}
    measured = {}

    s_l = report.s_l if hasattr(report, "s_l") else report["s_l"]
    measured["S_l"] = float(s_l)
    reasons["simplicity"] = bool(s_l >= simplicity_min)

    planarity = max_quad_nonplanarity(mesh)
    measured["max_nonplanarity"] = planarity
    reasons["planarity"] = bool(planarity <= max_nonplanarity)

    measured["N_c"] = int(complex_.n_charts)
    reasons["chart_count"] = bool(complex_.n_charts <= max_charts)

    min_area, min_side = _chart_geometry(mesh, complex_)
    measured["min_chart_area"] = min_area
    reasons["chart_area"] = bool(min_area >= min_chart_area)
    measured["min_chart_side"] = min_side
    reasons["chart_side"] = bool(min_side >= min_chart_side)

    n_bound = mesh.boundary_loop_count()
    measured["boundaries"] = int(n_bound)
    reasons["boundaries"] = bool(n_bound <= max_boundaries)

    val = mesh.vertex_valence
    interior_irr = int(np.sum(~mesh.vertex_on_boundary & (val > 0)
                              & (val != 4)))
    measured["interior_singularities"] = interior_irr
    if n_bound > 0:
        reasons["nontrivial_layout"] = interior_irr >= 1
    else:
        reasons["nontrivial_layout"] = True

    return CurationVerdict(all(reasons.values()), reasons, measured)


def curate_directory(path, out_manifest, hist_prefix=None, seed=0):
    """Walk a directory of OBJ quad meshes; write a JSONL manifest.

    Each record carries the path, the verdict and the measured values.
    Histogram CSVs of S_l and N_c are written when ``hist_prefix`` is
    given. Returns the number of kept meshes.
    """
    paths = sorted(Path(path).glob("**/*.obj"))
    meshes, names = [], []
    records = []
    for p in paths:
        try:
            m = load_mesh(p)
            if not isinstance(m, QuadMesh) or not m.is_pure_quad:
                raise MeshError("not a pure quad mesh")
            meshes.append(normalize(m))
            names.append(str(p))
        except MeshError as err:
            records.append({"path": str(p), "keep": False,
                            "reasons": {"load": False},
                            "measured": {"error": str(err)}})
    unique = set(dedup(meshes, seed=seed))
    kept = 0
    s_values, c_values = [], []
    for i, (m, name) in enumerate(zip(meshes, names)):
        if i not in unique:
            records.append({"path": name, "keep": False,
                            "reasons": {"duplicate": False}, "measured": {}})
            continue
        complex_ = build_base_complex(m)
        report = loop_simplicity(m, complex_)
        verdict = curation_filter(m, complex_, report)
        rec = {"path": name}
        rec.update(verdict.to_json_dict())
        records.append(rec)
        s_values.append(report.s_l)
        c_values.append(complex_.n_charts)
        kept += verdict.keep
    with open(out_manifest, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    if hist_prefix:
        _write_histogram(f"{hist_prefix}_sl.csv", s_values,
                         np.linspace(0, 1, 21))
        cmax = max(c_values, default=1)
        _write_histogram(f"{hist_prefix}_nc.csv", c_values,
                         np.arange(0, cmax + 2))
    return kept


def _write_histogram(path, values, bins):
    hist, edges = np.histogram(values, bins=bins)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], hist):
            wr.writerow([f"{lo:.6g}", f"{hi:.6g}", int(c)])
