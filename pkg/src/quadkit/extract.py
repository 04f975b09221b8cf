"""Quad layout extraction from a baked CDF on a dense triangle mesh.

Stages: local-maxima seed detection (r-ring), priority region growing
toward estimated chart centers (walls below the CDF threshold absorbed in
a second phase, over-segmented neighbors merged by the high-CDF boundary
rule), cluster-boundary tracing into a polygonal layout, feature-aware
edge collapse toward quads, and midpoint-subdivide / Winslow-smooth /
project refinement.
"""

import heapq
import logging

import numpy as np
import scipy.sparse as sp

from . import geometry
from .accel import SurfaceIndex
from .loops import detect_sharp_edges
from .mesh import MeshError, QuadMesh, TriMesh
from .remesh import _feature_corners, _SegmentIndex

log = logging.getLogger(__name__)


class DegenerateLayoutError(MeshError):
    """Raised when the partition cannot be represented as a polygon mesh
    (corner-less boundary circles or faces with fewer than 3 corners);
    callers respond by densifying the field and re-extracting."""


# ---------------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------------

def _face_reach(mesh, radius):
    adj = mesh.face_adjacency()
    rows, cols = [], []
    for k in range(3):
        m = adj[:, k] >= 0
        rows.append(np.flatnonzero(m))
        cols.append(adj[m, k])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    n = mesh.n_faces
    a = sp.csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)),
                      shape=(n, n), dtype=bool)
    step = a + sp.identity(n, dtype=bool, format="csr")
    reach = step.copy()
    for _ in range(radius - 1):
        reach = (reach @ step).astype(bool)
    return reach.tocsr()


def detect_seeds(cdf, mesh, radius=5):
    """Faces strictly greater than every other face within ``radius`` rings.

    Exact ties are suppressed toward the lowest face id, so a constant
    field yields isolated representatives rather than every face.
    """
    cdf = np.asarray(cdf, dtype=np.float64)
    reach = _face_reach(mesh, radius)
    indptr, indices = reach.indptr, reach.indices
    ring_max = np.maximum.reduceat(cdf[indices], indptr[:-1])
    seeds = []
    for f in np.flatnonzero(cdf >= ring_max):
        ring = indices[indptr[f]:indptr[f + 1]]
        tied = ring[cdf[ring] == cdf[f]]
        if tied.min() == f:
            seeds.append(int(f))
    return seeds


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------

class ClusterPartition:
    def __init__(self, mesh, face_cluster, seeds=None, seed_centers=None):
        self.mesh = mesh
        self.face_cluster = np.asarray(face_cluster, dtype=np.int64)
        self.seeds = seeds or []
        self.seed_centers = seed_centers

    @property
    def n_clusters(self):
        return int(self.face_cluster.max()) + 1

    def relabel(self, mapping):
        self.face_cluster = np.array([mapping[c] for c in self.face_cluster])


def repair_partition_fans(mesh, labels, max_rounds=8):
    """Make every label's face set vertex-manifold by local relabeling.

    Sampled ground-truth partitions can leave one-face slivers that touch
    their region only at a vertex; each minority arc is reassigned to the
    dominant adjacent label so boundary walking is well defined.
    """
    labels = np.asarray(labels, dtype=np.int64).copy()
    adj = mesh.face_adjacency()
    vf = _vertex_faces(mesh)
    for _ in range(max_rounds):
        changed = False
        for v in range(mesh.n_vertices):
            group = vf[v]
            if len(group) < 3:
                continue
            # connected arcs (around v) per label
            by_label = {}
            for f in group:
                by_label.setdefault(int(labels[f]), []).append(f)
            for lab, faces in by_label.items():
                if len(faces) < 2:
                    continue
                arcs = _vertex_arcs(mesh, adj, v, faces)
                if len(arcs) <= 1:
                    continue
                arcs.sort(key=lambda a: (len(a), min(a)))
                for arc in arcs[:-1]:
                    votes = {}
                    for f in arc:
                        for k in range(3):
                            g = int(adj[f, k])
                            if g >= 0 and int(labels[g]) != lab:
                                votes[int(labels[g])] = \
                                    votes.get(int(labels[g]), 0) + 1
                    if not votes:
                        continue
                    new = min(votes, key=lambda l: (-votes[l], l))
                    for f in arc:
                        labels[f] = new
                    changed = True
        if not changed:
            break
    return labels


def _vertex_arcs(mesh, adj, v, faces):
    """Partition ``faces`` (all incident to v) into edge-connected arcs."""
    fset = set(faces)
    seen = set()
    arcs = []
    for f0 in sorted(faces):
        if f0 in seen:
            continue
        arc = []
        stack = [f0]
        while stack:
            f = stack.pop()
            if f in seen:
                continue
            seen.add(f)
            arc.append(f)
            for k in range(3):
                g = int(adj[f, k])
                if g < 0 or g not in fset or g in seen:
                    continue
                a, b = mesh.edges[mesh.face_edges[f, k]]
                if a == v or b == v:
                    stack.append(g)
        arcs.append(arc)
    return arcs


def _vertex_faces(mesh):
    vf = [[] for _ in range(mesh.n_vertices)]
    for fi, f in enumerate(mesh.faces):
        for v in f:
            vf[v].append(fi)
    return vf


def _fan_connected(mesh, adj, vf, v, members, extra):
    """Faces of ``members | {extra}`` around vertex v form one edge-fan."""
    group = [f for f in vf[v] if f == extra or members[f]]
    if len(group) <= 1:
        return True
    gset = set(group)
    seen = {group[0]}
    stack = [group[0]]
    while stack:
        f = stack.pop()
        for k in range(3):
            g = adj[f, k]
            if g < 0 or g not in gset or g in seen:
                continue
            e = mesh.face_edges[f, k]
            a, b = mesh.edges[e]
            if a == v or b == v:
                seen.add(int(g))
                stack.append(int(g))
    return len(seen) == len(group)


def cluster_faces(mesh, samples, seeds, wall_delta=0.1, sharp=None,
                  use_dual_priority=False, merge_cdf=0.5, merge_fraction=0.5,
                  enforce_manifold=True):
    """Priority region growing of CDF clusters.

    ``samples`` is a face-center FieldSampleBatch over ``mesh``. Priority
    of adding face f to a cluster seeded at s is the distance between
    their estimated chart centers (plus the dual-center distance when
    ``use_dual_priority``). Faces with cdf below ``wall_delta`` wait until
    the wall-absorption phase; sharp edges block growth until the frontier
    would otherwise stall.
    """
    if not seeds:
        raise MeshError("no seeds found")
    n_f = mesh.n_faces
    cdf = samples.cdf
    centers = samples.chart_center_estimates()
    duals = samples.dual_center_estimates()
    adj = mesh.face_adjacency()
    face_edge = mesh.face_edges
    if sharp is None:
        sharp = np.zeros(mesh.n_edges, dtype=bool)
    vf = _vertex_faces(mesh)

    cluster = np.full(n_f, -1, dtype=np.int64)
    walls = cdf < wall_delta
    seed_centers = centers[seeds]
    seed_duals = duals[seeds]

    def priority(f, ci):
        p = float(np.linalg.norm(centers[f] - seed_centers[ci]))
        if use_dual_priority:
            p += float(np.linalg.norm(duals[f] - seed_duals[ci]))
        return p

    heap_main, heap_wall, heap_sharp = [], [], []

    def push_neighbors(f, ci):
        for k in range(3):
            g = int(adj[f, k])
            if g < 0 or cluster[g] >= 0:
                continue
            entry = (priority(g, ci), g, ci)
            if sharp[face_edge[f, k]]:
                heapq.heappush(heap_sharp, entry)
            elif walls[g]:
                heapq.heappush(heap_wall, entry)
            else:
                heapq.heappush(heap_main, entry)

    members = [np.zeros(n_f, dtype=bool) for _ in seeds]
    for ci, s in enumerate(seeds):
        cluster[s] = ci
        members[ci][s] = True
    for ci, s in enumerate(seeds):
        push_neighbors(s, ci)

    def admit(f, ci):
        if cluster[f] >= 0:
            return False
        if enforce_manifold:
            for v in mesh.faces[f]:
                if not _fan_connected(mesh, adj, vf, int(v), members[ci], f):
                    return False
        cluster[f] = ci
        members[ci][f] = True
        push_neighbors(f, ci)
        return True

    stage = 0  # 0: plain, 1: +walls, 2: +sharp crossings
    while True:
        if heap_main:
            _, f, ci = heapq.heappop(heap_main)
            admit(f, ci)
            continue
        if stage >= 1 and heap_wall:
            _, f, ci = heapq.heappop(heap_wall)
            admit(f, ci)
            continue
        if stage >= 2 and heap_sharp:
            _, f, ci = heapq.heappop(heap_sharp)
            admit(f, ci)
            continue
        if stage < 2 and (heap_wall or heap_sharp or (cluster < 0).any()):
            stage += 1
            continue
        break

    if (cluster < 0).any():
        # growth stalled against itself: the partition cannot cover the
        # surface with manifold clusters (closed tube / torus patterns)
        raise DegenerateLayoutError(
            f"region growing stalled with {(cluster < 0).sum()} faces "
            "unassigned")
    part = ClusterPartition(mesh, cluster, list(seeds), seed_centers)
    _merge_oversegmented(part, cdf, merge_cdf, merge_fraction)
    return part


def _merge_oversegmented(part, cdf, merge_cdf, merge_fraction):
    """Merge adjacent clusters whose shared boundary runs through high CDF.

    A boundary face pair counts as high when both faces exceed
    ``merge_cdf``; the pair of clusters merges when more than
    ``merge_fraction`` of its boundary pairs are high.
    """
    mesh = part.mesh
    adj = mesh.face_adjacency()
    while True:
        labels = part.face_cluster
        stats = {}
        for f in range(mesh.n_faces):
            for k in range(3):
                g = adj[f, k]
                if g < 0 or g <= f:
                    continue
                a, b = labels[f], labels[int(g)]
                if a == b:
                    continue
                key = (min(a, b), max(a, b))
                tot, high = stats.get(key, (0, 0))
                tot += 1
                if cdf[f] > merge_cdf and cdf[int(g)] > merge_cdf:
                    high += 1
                stats[key] = (tot, high)
        merge = [k for k, (tot, high) in sorted(stats.items())
                 if tot > 0 and high / tot > merge_fraction]
        if not merge:
            return
        parent = list(range(part.n_clusters))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in merge:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = sorted({find(c) for c in range(part.n_clusters)})
        remap = {r: i for i, r in enumerate(roots)}
        part.relabel({c: remap[find(c)] for c in range(part.n_clusters)})
        keep = [part.seeds[r] for r in roots]
        part.seed_centers = part.seed_centers[roots]
        part.seeds = keep


# ---------------------------------------------------------------------------
# Layout extraction
# ---------------------------------------------------------------------------

class LayoutSide:
    __slots__ = ("corners", "polyline", "vertex_ids", "feature", "clusters")

    def __init__(self, corners, polyline, vertex_ids, feature, clusters):
        self.corners = corners        # (corner_a, corner_b) layout ids
        self.polyline = polyline      # (k,3) points incl. endpoints
        self.vertex_ids = vertex_ids  # dense-mesh vertex ids along the side
        self.feature = feature
        self.clusters = clusters      # (left, right) cluster ids, -1 outside


class LayoutMesh:
    """Polygonal chart layout: corner vertices, sides, faces."""

    def __init__(self, vertices, faces, sides, face_sides, corner_source,
                 feature_vertex):
        self.vertices = np.asarray(vertices, dtype=np.float64)
        self.faces = faces            # corner-id cycles per face
        self.sides = sides            # list of LayoutSide
        self.face_sides = face_sides  # side ids per face, cyclic
        self.corner_source = corner_source  # dense-mesh vertex per corner
        self.feature_vertex = feature_vertex

    @property
    def n_faces(self):
        return len(self.faces)

    def is_pure_quad(self):
        return all(len(f) == 4 for f in self.faces)

    def adjacency_pairs(self):
        out = []
        for s in self.sides:
            a, b = s.clusters
            if a >= 0 and b >= 0:
                out.append((min(a, b), max(a, b)))
        return out

    def to_quad_mesh(self):
        if not self.is_pure_quad():
            raise MeshError("layout has non-quad faces")
        return QuadMesh(self.vertices.copy(), [list(f) for f in self.faces])

    def check_halfedge_representable(self):
        """Raise DegenerateLayoutError when the corner-cycle polygon mesh
        cannot be built as a half-edge mesh (patch pairs sharing multiple
        sides over the same corners, the densify-and-retry trigger)."""
        from .mesh import NonManifoldError

        for f in self.faces:
            if len(set(f)) != len(f):
                raise DegenerateLayoutError(
                    "layout face repeats a corner vertex")
        try:
            QuadMesh(self.vertices.copy(), [list(f) for f in self.faces])
        except NonManifoldError as err:
            raise DegenerateLayoutError(
                f"layout is not half-edge representable: {err}") from err


def _cluster_euler(mesh, labels, ci):
    faces = np.flatnonzero(labels == ci)
    vs = {int(v) for f in faces for v in mesh.faces[f]}
    es = {int(mesh.face_edges[f, k]) for f in faces for k in range(3)}
    return len(vs) - len(es) + len(faces)


def split_nondisk_clusters(part, samples, max_rounds=3, **cluster_kw):
    """Split disk-violating clusters by competitive re-growing.

    Adds, for each bad cluster, a second seed at its face farthest from
    the existing seed (an approximation of the shortest internal cut) and
    re-runs the growing. Warns via the module logger.
    """
    mesh = part.mesh
    centers = samples.chart_center_estimates()
    for _ in range(max_rounds):
        bad = [ci for ci in range(part.n_clusters)
               if _cluster_euler(mesh, part.face_cluster, ci) != 1]
        if not bad:
            return part
        seeds = list(part.seeds)
        for ci in bad:
            faces = np.flatnonzero(part.face_cluster == ci)
            d = np.linalg.norm(centers[faces] - centers[part.seeds[ci]], axis=1)
            extra = int(faces[np.argmax(d)])
            log.warning("cluster %d is not a disk; splitting at face %d",
                        ci, extra)
            seeds.append(extra)
        part2 = cluster_faces(mesh, samples, seeds, **cluster_kw)
        part.face_cluster = part2.face_cluster
        part.seeds = part2.seeds
        part.seed_centers = part2.seed_centers
    return part


def extract_layout(part, mesh, sharp=None, corner_angle_deg=40.0):
    """Trace cluster boundaries into a :class:`LayoutMesh`.

    Corners are vertices where >= 3 regions meet (the mesh exterior
    counts as a region) plus feature-graph corners. Raises
    :class:`DegenerateLayoutError` when a boundary circle carries no
    corner or a face would have fewer than 3 corners.
    """
    if sharp is None:
        sharp = detect_sharp_edges(mesh, 130.0) \
            if isinstance(mesh, TriMesh) else np.zeros(mesh.n_edges, bool)
    labels = part.face_cluster
    if (labels < 0).any():
        raise MeshError("partition incomplete: unassigned faces remain")

    edge_lut = {tuple(e): i for i, e in enumerate(map(tuple, mesh.edges))}

    def edge_id(u, v):
        return edge_lut[(u, v) if u < v else (v, u)]

    adj = mesh.face_adjacency()
    # directed rim edges per cluster, and the region sets per vertex
    rim_next = {}
    regions = {}
    for f in range(mesh.n_faces):
        tri = mesh.faces[f]
        for k in range(3):
            u, v = int(tri[k]), int(tri[(k + 1) % 3])
            g = int(adj[f, k])
            other = labels[g] if g >= 0 else -1
            for x in (u, v):
                regions.setdefault(x, set()).add(int(labels[f]))
                if g < 0:
                    regions.setdefault(x, set()).add(-1)
            if other != labels[f]:
                rim_next.setdefault((int(labels[f]), u), []).append((v, f, g))

    corner_set = set()
    for v, rg in regions.items():
        if len(rg) >= 3:
            corner_set.add(v)
    corner_set |= _feature_corners(mesh, sharp, corner_angle_deg)
    corner_set = {v for v in corner_set
                  if any((ci, v) in rim_next for ci in range(part.n_clusters))
                  or len(regions.get(v, ())) >= 3}

    # walk each cluster's rim, splitting at corners
    sides = []
    side_lut = {}
    faces_out = []
    face_sides = []
    for ci in range(part.n_clusters):
        starts = sorted((v for (c, v) in rim_next if c == ci))
        if not starts:
            raise DegenerateLayoutError(
                f"cluster {ci} has no boundary (closed surface cluster)")
        visited = set()
        cycles = []
        for v0 in starts:
            for (v1, f, g) in rim_next[(ci, v0)]:
                if (v0, v1) in visited:
                    continue
                cyc = []
                u = v0
                nxt = (v1, f, g)
                while True:
                    v, f_in, g_in = nxt
                    visited.add((u, v))
                    cyc.append((u, v, f_in, g_in))
                    u = v
                    outs = [o for o in rim_next.get((ci, u), [])
                            if (u, o[0]) not in visited]
                    if not outs:
                        break
                    nxt = outs[0]
                    if len(outs) > 1:
                        # manifold clusters have a unique continuation
                        raise MeshError("ambiguous rim continuation")
                cycles.append(cyc)
        # split cycles at corners
        poly_corners = []
        poly_sides = []
        for cyc in cycles:
            cpos = [i for i, (u, _, _, _) in enumerate(cyc) if u in corner_set]
            if not cpos:
                raise DegenerateLayoutError(
                    f"boundary circle of cluster {ci} has no corner")
            arcs = []
            for a_i, i in enumerate(cpos):
                j = cpos[(a_i + 1) % len(cpos)]
                if j > i:
                    arc = cyc[i:j]
                else:
                    arc = cyc[i:] + cyc[:j]
                arcs.append(arc)
            for arc in arcs:
                vids = [arc[0][0]] + [st[1] for st in arc]
                skey = tuple(sorted(edge_id(a, b)
                                    for a, b in zip(vids, vids[1:])))
                other = labels[arc[0][3]] if arc[0][3] >= 0 else -1
                if skey in side_lut:
                    sid = side_lut[skey]
                else:
                    sid = len(sides)
                    side_lut[skey] = sid
                    n_sharp = sum(sharp[e] for e in skey)
                    sides.append(LayoutSide(
                        (vids[0], vids[-1]), mesh.vertices[np.array(vids)],
                        vids, n_sharp * 2 >= len(skey),
                        (ci, int(other))))
                poly_sides.append(sid)
                poly_corners.append(vids[0])
        if len(cycles) > 1:
            raise DegenerateLayoutError(
                f"cluster {ci} has {len(cycles)} boundary circles")
        if len(poly_corners) < 3:
            raise DegenerateLayoutError(
                f"cluster {ci} yields a face with {len(poly_corners)} corners")
        faces_out.append(poly_corners)
        face_sides.append(poly_sides)

    corner_ids = sorted({v for f in faces_out for v in f})
    remap = {v: i for i, v in enumerate(corner_ids)}
    faces_remapped = [[remap[v] for v in f] for f in faces_out]
    for s in sides:
        s.corners = (remap[s.corners[0]], remap[s.corners[1]])
    feature_vertex = np.zeros(len(corner_ids), dtype=bool)
    for s in sides:
        if s.feature:
            feature_vertex[s.corners[0]] = True
            feature_vertex[s.corners[1]] = True
    return LayoutMesh(mesh.vertices[np.array(corner_ids)], faces_remapped,
                      sides, face_sides, corner_ids, feature_vertex)


# ---------------------------------------------------------------------------
# Feature-aware collapse toward quads
# ---------------------------------------------------------------------------

def _arc_length(poly):
    return float(np.linalg.norm(np.diff(poly, axis=0), axis=1).sum())


def collapse_to_quads(layout):
    """Collapse short sides whose two adjacent faces are both non-quads.

    Sides bridging two distinct sharp-feature loops are never collapsed;
    feature corner positions are retained. Triangles adjacent to a
    collapsed side degenerate to 2-gons and are removed, merging their
    remaining sides. Iterates to a fixpoint.
    """
    pos = {i: layout.vertices[i].copy() for i in range(len(layout.vertices))}
    feat_c = {i: bool(layout.feature_vertex[i])
              for i in range(len(layout.vertices))}
    source = {i: layout.corner_source[i] for i in range(len(layout.vertices))}
    sides = {}
    for sid, s in enumerate(layout.sides):
        sides[sid] = {"a": s.corners[0], "b": s.corners[1],
                      "poly": s.polyline.copy(), "feature": s.feature,
                      "vids": list(s.vertex_ids)}
    faces = {}
    for fi in range(layout.n_faces):
        faces[fi] = {"corners": list(layout.faces[fi]),
                     "sides": list(layout.face_sides[fi])}

    def side_faces(sid):
        return [fi for fi, f in faces.items() if sid in f["sides"]]

    def neighbors(c):
        out = set()
        for s in sides.values():
            if s["a"] == c:
                out.add(s["b"])
            elif s["b"] == c:
                out.add(s["a"])
        return out

    def remove_bigon(fi):
        f = faces.pop(fi)
        s1, s2 = f["sides"]
        if s1 == s2:
            sides.pop(s1, None)
            return
        keep, drop = (s1, s2) if (sides[s1]["feature"] or not sides[s2]["feature"]) \
            else (s2, s1)
        sides[keep]["feature"] = sides[s1]["feature"] or sides[s2]["feature"]
        for g in faces.values():
            g["sides"] = [keep if x == drop else x for x in g["sides"]]
        sides.pop(drop, None)

    while True:
        cands = []
        for sid, s in sides.items():
            fs = side_faces(sid)
            if len(fs) != 2:
                continue
            d1, d2 = len(faces[fs[0]]["sides"]), len(faces[fs[1]]["sides"])
            if d1 == 4 or d2 == 4 or d1 < 3 or d2 < 3:
                continue
            a, b = s["a"], s["b"]
            if feat_c[a] and feat_c[b] and not s["feature"]:
                continue  # joins two distinct feature loops
            if any(sid2 != sid and {sides[sid2]["a"], sides[sid2]["b"]} == {a, b}
                   for sid2 in sides):
                continue
            # link condition: shared neighbors only via adjacent triangles
            allowed = set()
            for fi in fs:
                if len(faces[fi]["sides"]) == 3:
                    allowed.update(x for x in faces[fi]["corners"]
                                   if x not in (a, b))
            common = (neighbors(a) & neighbors(b)) - {a, b}
            if common - allowed:
                continue
            cands.append((_arc_length(s["poly"]), sid))
        if not cands:
            break
        _, sid = min(cands)
        s = sides.pop(sid)
        a, b = s["a"], s["b"]
        fs = side_faces(sid)
        # surviving corner: feature corners keep their position
        if feat_c[b] and not feat_c[a]:
            a, b = b, a
        if feat_c[a] == feat_c[b]:
            pos[a] = 0.5 * (pos[a] + pos[b]) if not feat_c[a] else pos[a]
        feat_c[a] = feat_c[a] or feat_c[b]
        for s2 in sides.values():
            if s2["a"] == b:
                s2["a"] = a
            if s2["b"] == b:
                s2["b"] = a
        bigons = []
        for fi in fs:
            f = faces[fi]
            k = f["sides"].index(sid)
            f["sides"].pop(k)
            f["corners"] = [a if x == b else x for x in f["corners"]]
            cc = []
            for x in f["corners"]:
                if not cc or cc[-1] != x:
                    cc.append(x)
            if len(cc) > 1 and cc[0] == cc[-1]:
                cc.pop()
            f["corners"] = cc
            if len(f["sides"]) == 2:
                bigons.append(fi)
        for fi in bigons:
            remove_bigon(fi)

    live_corners = sorted({c for f in faces.values() for c in f["corners"]})
    remap = {c: i for i, c in enumerate(live_corners)}
    out_sides = []
    side_remap = {}
    for sid in sorted(sides):
        s = sides[sid]
        side_remap[sid] = len(out_sides)
        out_sides.append(LayoutSide(
            (remap[s["a"]], remap[s["b"]]), s["poly"], s["vids"],
            s["feature"], (-2, -2)))
    out_faces, out_face_sides = [], []
    for fi in sorted(faces):
        f = faces[fi]
        out_faces.append([remap[c] for c in f["corners"]])
        out_face_sides.append([side_remap[sid] for sid in f["sides"]])
    for k, s in enumerate(out_sides):
        fs = [i for i, fsd in enumerate(out_face_sides) if k in fsd]
        s.clusters = (fs[0] if fs else -1, fs[1] if len(fs) > 1 else -1)
    fv = np.array([feat_c[c] for c in live_corners], dtype=bool)
    return LayoutMesh(np.array([pos[c] for c in live_corners]),
                      out_faces, out_sides, out_face_sides,
                      [source[c] for c in live_corners], fv)


# ---------------------------------------------------------------------------
# Refinement: subdivision + Winslow smoothing + projection
# ---------------------------------------------------------------------------

K_FREE, K_FEATURE, K_CORNER = 0, 1, 2


def _polyline_midpoint(poly):
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    total = seg.sum()
    if total <= 0:
        return poly[0]
    half = total / 2.0
    acc = 0.0
    for i, ln in enumerate(seg):
        if acc + ln >= half:
            t = (half - acc) / ln
            return (1 - t) * poly[i] + t * poly[i + 1]
        acc += ln
    return poly[-1]


class _RefineMesh:
    def __init__(self, verts, kinds, quads, feature_edges):
        self.verts = verts            # list of np arrays
        self.kinds = kinds            # per-vertex K_*
        self.quads = quads            # list of 4-tuples
        self.feature_edges = feature_edges  # set of sorted vertex pairs

    def subdivide(self):
        verts = [v.copy() for v in self.verts]
        kinds = list(self.kinds)
        emid = {}
        fe = set()

        def midpoint(u, v):
            key = (u, v) if u < v else (v, u)
            if key not in emid:
                verts.append(0.5 * (verts[u] + verts[v]))
                kinds.append(K_FEATURE if key in self.feature_edges else K_FREE)
                emid[key] = len(verts) - 1
            return emid[key]

        quads = []
        for q in self.quads:
            mids = [midpoint(q[k], q[(k + 1) % 4]) for k in range(4)]
            verts.append(np.mean([verts[x] for x in q], axis=0))
            kinds.append(K_FREE)
            c = len(verts) - 1
            for k in range(4):
                quads.append((q[k], mids[k], c, mids[(k - 1) % 4]))
        for (u, v), m in emid.items():
            if (u, v) in self.feature_edges:
                fe.add((min(u, m), max(u, m)))
                fe.add((min(m, v), max(m, v)))
        return _RefineMesh(verts, kinds, quads, fe)

    def to_quad_mesh(self):
        feats = sorted(self.feature_edges)
        return QuadMesh(np.array(self.verts), [list(q) for q in self.quads],
                        feature_edges=feats)


def _winslow_sweeps(rm, surface, feat_index, sweeps, tol):
    """Gauss-Seidel Winslow smoothing with projection back to the surface.

    Regular interior vertices use the 9-point transfinite stencil;
    irregular vertices fall back to the uniform Laplacian; feature
    vertices slide along their polylines; corners are pinned.
    """
    qm = QuadMesh(np.array(rm.verts), [list(q) for q in rm.quads])
    rings = {}
    for v in range(qm.n_vertices):
        if rm.kinds[v] == K_CORNER:
            continue
        outs = qm.outgoing_halfedges(v)
        ring = [qm.halfedge_dst(h) for h in outs]
        diag = [qm.halfedge_dst(qm.h_next[h]) for h in outs]
        if qm.vertex_on_boundary[v] and outs:
            ring.append(int(qm.h_org[qm.h_prev[outs[-1]]]))
        rings[v] = (ring, diag, bool(qm.vertex_on_boundary[v]))
    chain = {}
    for v in range(qm.n_vertices):
        if rm.kinds[v] != K_FEATURE or v not in rings:
            continue
        chain[v] = sorted(x for x in set(rings[v][0])
                          if (min(v, x), max(v, x)) in rm.feature_edges)

    scale = geometry.bbox_diagonal(np.array(rm.verts))
    p = rm.verts
    for _ in range(sweeps):
        moved = 0.0
        for v in range(len(p)):
            kind = rm.kinds[v]
            if kind == K_CORNER or v not in rings:
                continue
            old = p[v]
            if kind == K_FEATURE:
                nb = chain.get(v, [])
                if len(nb) != 2:
                    continue
                q = 0.5 * (p[nb[0]] + p[nb[1]])
                if feat_index is not None:
                    q = feat_index.project(q)
            else:
                ring, diag, on_bnd = rings[v]
                if on_bnd:
                    continue
                if len(ring) == 4:
                    e, n_, w, s_ = (p[x] for x in ring)
                    ne, nw, sw, se = (p[x] for x in diag)
                    xi = 0.5 * (e - w)
                    eta = 0.5 * (n_ - s_)
                    alpha = eta @ eta
                    gamma = xi @ xi
                    beta = xi @ eta
                    denom = 2.0 * (alpha + gamma)
                    if denom <= 1e-30:
                        continue
                    q = (alpha * (e + w) + gamma * (n_ + s_)
                         - 0.5 * beta * (ne - nw + sw - se)) / denom
                else:
                    q = np.mean([p[x] for x in ring], axis=0)
            p[v] = q
            moved = max(moved, float(np.linalg.norm(q - old)))
        if moved < tol * scale:
            break
    # project back to the reference shape
    free = [v for v in range(len(p)) if rm.kinds[v] == K_FREE]
    if free:
        _, cp, _ = surface.query(np.array([p[v] for v in free]))
        for v, q in zip(free, cp):
            p[v] = q
    if feat_index is not None:
        for v in range(len(p)):
            if rm.kinds[v] == K_FEATURE:
                p[v] = feat_index.project(p[v])


def refine(layout, reference, max_subdiv=3, max_faces=20000,
           smooth_sweeps=20, move_tol=1e-6, sharp=None):
    """Refine a layout into a dense quad mesh on the reference surface.

    Midpoint subdivision (the first round turns any polygon into quads),
    Winslow smoothing, and nearest-point projection with feature vertices
    snapped to the reference's sharp polylines.
    """
    if sharp is None:
        sharp = detect_sharp_edges(reference, 130.0)
    surface = SurfaceIndex(reference.triangle_soup())
    feat_ids = np.flatnonzero(sharp)
    feat_index = _SegmentIndex(reference.vertices[reference.edges[feat_ids]]) \
        if len(feat_ids) else None

    # first subdivision: polygon faces -> quads via side midpoints
    verts = [layout.vertices[i].copy() for i in range(len(layout.vertices))]
    kinds = [K_CORNER if layout.feature_vertex[i] else K_FREE
             for i in range(len(layout.vertices))]
    quads = []
    fe = set()
    side_mid = {}
    for sid, s in enumerate(layout.sides):
        verts.append(_polyline_midpoint(s.polyline))
        kinds.append(K_FEATURE if s.feature else K_FREE)
        side_mid[sid] = len(verts) - 1
    for fi, (cyc, fsides) in enumerate(zip(layout.faces, layout.face_sides)):
        d = len(cyc)
        center = np.mean([verts[side_mid[sid]] for sid in fsides], axis=0)
        verts.append(center)
        kinds.append(K_FREE)
        c = len(verts) - 1
        for k in range(d):
            m_k = side_mid[fsides[k]]
            m_prev = side_mid[fsides[(k - 1) % d]]
            quads.append((cyc[k], m_k, c, m_prev))
            if layout.sides[fsides[k]].feature:
                fe.add((min(cyc[k], m_k), max(cyc[k], m_k)))
                fe.add((min(m_k, cyc[(k + 1) % d]), max(m_k, cyc[(k + 1) % d])))
    rm = _RefineMesh(verts, kinds, quads, fe)
    _winslow_sweeps(rm, surface, feat_index, smooth_sweeps, move_tol)

    level = 1
    while level < max_subdiv and 4 * len(rm.quads) <= max_faces:
        rm = rm.subdivide()
        _winslow_sweeps(rm, surface, feat_index, smooth_sweeps, move_tol)
        level += 1
    return rm.to_quad_mesh()
