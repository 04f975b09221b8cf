"""Mesh containers and I/O.

Two containers cover the toolkit:

* :class:`TriMesh` - indexed triangle mesh with a lazy unique-edge table.
* :class:`QuadMesh` - half-edge polygonal mesh for quad / quad-dominant
  connectivity (arrays: origin vertex, face, next, twin; twin ``-1`` marks
  a boundary half-edge).

Meshes are immutable after construction. Loading deduplicates vertices by
exact coordinates only; epsilon welding is a separate curation step.
"""

import numpy as np

from . import geometry


class MeshError(Exception):
    pass


class NonManifoldError(MeshError):
    def __init__(self, message, edges=None):
        super().__init__(message)
        self.edges = edges or []


def _dedup_vertices(vertices, faces):
    """Exact-coordinate vertex dedup; remaps polygon indices."""
    vertices = np.asarray(vertices, dtype=np.float64)
    uniq, inverse = np.unique(vertices, axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    # keep first-occurrence order so vertex ids stay stable across runs
    first = np.full(len(uniq), -1, dtype=np.int64)
    order = []
    remap = np.empty(len(uniq), dtype=np.int64)
    for i, u in enumerate(inverse):
        if first[u] < 0:
            first[u] = len(order)
            order.append(i)
        remap[u] = first[u]
    new_verts = vertices[order]
    new_faces = [[int(remap[inverse[v]]) for v in f] for f in faces]
    return new_verts, new_faces


def _clean_faces(vertices, faces, report):
    """Drop combinatorially or geometrically degenerate polygons."""
    diag = geometry.bbox_diagonal(vertices) if len(vertices) else 1.0
    if diag <= 0:
        diag = 1.0
    keep = []
    for f in faces:
        if len(set(f)) != len(f) or len(f) < 3:
            report["degenerate_faces"] += 1
            continue
        pts = vertices[np.asarray(f)]
        if len(f) == 3:
            area = geometry.triangle_areas(pts[None])[0]
        else:
            area = 0.5 * np.linalg.norm(geometry.polygon_normal(pts))
        if area / (diag * diag) < 1e-12:
            report["degenerate_faces"] += 1
            continue
        keep.append(f)
    return keep


class TriMesh:
    """Indexed triangle mesh.

    Parameters
    ----------
    vertices : (V,3) float array
    faces : (F,3) int array
    feature_edges : optional set of sorted vertex pairs to tag as features.
    """

    def __init__(self, vertices, faces, feature_edges=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.faces.size and self.faces.max() >= len(self.vertices):
            raise MeshError("face index out of range")
        self._build_edges()
        self.feature_edge = np.zeros(self.n_edges, dtype=bool)
        if feature_edges:
            lut = {tuple(e): i for i, e in enumerate(map(tuple, self.edges))}
            for pair in feature_edges:
                key = tuple(sorted(pair))
                if key in lut:
                    self.feature_edge[lut[key]] = True

    def _build_edges(self):
        f = self.faces
        raw = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        raw_sorted = np.sort(raw, axis=1)
        self.edges, inv = np.unique(raw_sorted, axis=0, return_inverse=True)
        self.face_edges = inv.reshape(3, -1).T  # (F,3) edge ids per face
        self.n_edges = len(self.edges)
        counts = np.bincount(inv, minlength=self.n_edges)
        self.edge_face_count = counts
        self.edge_faces = np.full((self.n_edges, 2), -1, dtype=np.int64)
        slot = np.zeros(self.n_edges, dtype=np.int64)
        n_f = len(f)
        for k, e in enumerate(inv):
            fi = k % n_f
            if slot[e] < 2:
                self.edge_faces[e, slot[e]] = fi
            slot[e] += 1

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def is_edge_manifold(self):
        return bool(np.all(self.edge_face_count <= 2))

    def nonmanifold_edges(self):
        return [tuple(map(int, self.edges[i]))
                for i in np.flatnonzero(self.edge_face_count > 2)]

    def boundary_edge_mask(self):
        return self.edge_face_count == 1

    def boundary_vertex_mask(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        be = self.edges[self.boundary_edge_mask()]
        mask[be.reshape(-1)] = True
        return mask

    def face_adjacency(self):
        """(F,3) neighbor face across each face edge, -1 on boundary."""
        adj = np.full((self.n_faces, 3), -1, dtype=np.int64)
        for fi in range(self.n_faces):
            for k in range(3):
                e = self.face_edges[fi, k]
                a, b = self.edge_faces[e]
                adj[fi, k] = b if a == fi else a
        return adj

    def triangle_soup(self):
        return self.vertices[self.faces]

    def face_areas(self):
        return geometry.triangle_areas(self.triangle_soup())

    def face_normals(self, unit=True):
        n = geometry.triangle_normals(self.triangle_soup())
        return geometry.normalize_rows(n) if unit else n

    def face_centers(self):
        return self.triangle_soup().mean(axis=1)

    def vertex_normals(self):
        fn = geometry.triangle_normals(self.triangle_soup())  # area weighted
        vn = np.zeros((self.n_vertices, 3))
        for k in range(3):
            np.add.at(vn, self.faces[:, k], fn)
        return geometry.normalize_rows(vn)

    def boundary_loop_count(self):
        be = self.edges[self.boundary_edge_mask()]
        return _count_cycles(be)

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def genus(self):
        b = self.boundary_loop_count()
        chi = self.euler_characteristic()
        return int(round((2 - chi - b) / 2))


class QuadMesh:
    """Half-edge polygonal mesh, oriented and edge-manifold.

    Meant for pure quad meshes; mixed quad/triangle connectivity is
    accepted and flagged via :attr:`is_pure_quad` (quad-dominant variant).
    """

    def __init__(self, vertices, faces, feature_edges=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = [list(map(int, f)) for f in faces]
        self.is_pure_quad = all(len(f) == 4 for f in self.faces)
        self._build_halfedges()
        self.feature_edge = np.zeros(self.n_edges, dtype=bool)
        self.feature_vertex = np.zeros(self.n_vertices, dtype=bool)
        if feature_edges:
            for pair in feature_edges:
                e = self.edge_lookup.get(tuple(sorted(pair)))
                if e is not None:
                    self.feature_edge[e] = True
                    self.feature_vertex[list(pair)] = True

    def _build_halfedges(self):
        h_org, h_face, h_next = [], [], []
        f_first = []
        directed = {}
        bad_edges = []
        for fi, poly in enumerate(self.faces):
            d = len(poly)
            base = len(h_org)
            f_first.append(base)
            for i in range(d):
                u, v = poly[i], poly[(i + 1) % d]
                if (u, v) in directed:
                    bad_edges.append((u, v))
                directed[(u, v)] = base + i
                h_org.append(u)
                h_face.append(fi)
                h_next.append(base + (i + 1) % d)
        if bad_edges:
            raise NonManifoldError(
                f"duplicated directed edges (non-manifold or inconsistently "
                f"oriented): {bad_edges[:8]}", edges=bad_edges)

        n_h = len(h_org)
        self.h_org = np.array(h_org, dtype=np.int64)
        self.h_face = np.array(h_face, dtype=np.int64)
        self.h_next = np.array(h_next, dtype=np.int64)
        self.f_first = np.array(f_first, dtype=np.int64)
        self.h_twin = np.full(n_h, -1, dtype=np.int64)
        over = []
        for (u, v), h in directed.items():
            t = directed.get((v, u))
            if t is not None:
                self.h_twin[h] = t
        # undirected edge table; canonical half-edge is the lower id
        self.h_edge = np.full(n_h, -1, dtype=np.int64)
        e_half = []
        self.edge_lookup = {}
        for h in range(n_h):
            if self.h_edge[h] >= 0:
                continue
            e = len(e_half)
            self.h_edge[h] = e
            t = self.h_twin[h]
            if t >= 0:
                self.h_edge[t] = e
            e_half.append(h)
            u, v = int(self.h_org[h]), int(self.h_org[self.h_next[h]])
            key = (min(u, v), max(u, v))
            if key in self.edge_lookup:
                over.append(key)
            self.edge_lookup[key] = e
        if over:
            raise NonManifoldError(f"edges bordered by >2 faces: {over[:8]}",
                                   edges=over)
        self.e_half = np.array(e_half, dtype=np.int64)
        self.n_edges = len(e_half)

        self.h_prev = np.empty(n_h, dtype=np.int64)
        self.h_prev[self.h_next] = np.arange(n_h)

        # one outgoing half-edge per vertex, preferring the boundary one so
        # fan sweeps cover the whole one-ring
        self.v_out = np.full(self.n_vertices, -1, dtype=np.int64)
        for h in range(n_h - 1, -1, -1):
            self.v_out[self.h_org[h]] = h
        for h in np.flatnonzero(self.h_twin < 0):
            self.v_out[self.h_org[h]] = h
        self._check_vertex_manifold()
        self._compute_valences()

    def _check_vertex_manifold(self):
        seen = np.zeros(len(self.h_org), dtype=bool)
        deg = np.bincount(self.h_org, minlength=self.n_vertices)
        for v in range(self.n_vertices):
            h0 = self.v_out[v]
            if h0 < 0:
                continue
            cnt, h = 0, h0
            while True:
                cnt += 1
                seen[h] = True
                t = self.h_twin[self.h_prev[h]]
                if t < 0 or t == h0:
                    break
                h = t
            if cnt != deg[v]:
                raise NonManifoldError(
                    f"vertex {v} has a split one-ring fan (non-manifold)")

    def _compute_valences(self):
        out_deg = np.bincount(self.h_org, minlength=self.n_vertices)
        self.vertex_on_boundary = np.zeros(self.n_vertices, dtype=bool)
        for h in np.flatnonzero(self.h_twin < 0):
            self.vertex_on_boundary[self.h_org[h]] = True
            self.vertex_on_boundary[self.h_org[self.h_next[h]]] = True
        self.vertex_valence = out_deg + np.where(self.vertex_on_boundary, 1, 0)
        iso = out_deg == 0
        self.vertex_valence[iso] = 0
        self.vertex_on_boundary[iso] = False

    # -- basic accessors ---------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def face_degree(self, f):
        return len(self.faces[f])

    def face_halfedges(self, f):
        h0 = self.f_first[f]
        out = [h0]
        h = self.h_next[h0]
        while h != h0:
            out.append(h)
            h = self.h_next[h]
        return out

    def halfedge_dst(self, h):
        return int(self.h_org[self.h_next[h]])

    def edge_vertices(self, e):
        h = self.e_half[e]
        return int(self.h_org[h]), self.halfedge_dst(h)

    def edge_faces(self, e):
        h = self.e_half[e]
        t = self.h_twin[h]
        return int(self.h_face[h]), (int(self.h_face[t]) if t >= 0 else -1)

    def edge_is_boundary(self, e):
        return self.h_twin[self.e_half[e]] < 0

    def boundary_edge_mask(self):
        mask = np.zeros(self.n_edges, dtype=bool)
        mask[self.h_edge[self.h_twin < 0]] = True
        return mask

    def outgoing_halfedges(self, v):
        h0 = self.v_out[v]
        if h0 < 0:
            return []
        out = [int(h0)]
        h = self.h_twin[self.h_prev[h0]]
        while h >= 0 and h != h0:
            out.append(int(h))
            h = self.h_twin[self.h_prev[h]]
        return out

    def halfedge_between(self, u, v):
        for h in self.outgoing_halfedges(u):
            if self.halfedge_dst(h) == v:
                return h
        return -1

    # -- derived geometry ----------------------------------------------------

    def face_points(self, f):
        return self.vertices[np.asarray(self.faces[f])]

    def face_centers(self):
        return np.array([self.face_points(f).mean(axis=0)
                         for f in range(self.n_faces)])

    def face_areas(self):
        """Polygon areas; quads use the fixed v0-v2 diagonal split."""
        out = np.empty(self.n_faces)
        for f, poly in enumerate(self.faces):
            pts = self.vertices[np.asarray(poly)]
            if len(poly) == 3:
                out[f] = geometry.triangle_areas(pts[None])[0]
            elif len(poly) == 4:
                out[f] = geometry.quad_areas(pts[None])[0]
            else:
                out[f] = 0.5 * np.linalg.norm(geometry.polygon_normal(pts))
        return out

    def face_normals(self, unit=True):
        out = np.array([geometry.polygon_normal(self.face_points(f))
                        for f in range(self.n_faces)])
        return geometry.normalize_rows(out) if unit else out

    def vertex_normals(self):
        fn = self.face_normals(unit=False)
        vn = np.zeros((self.n_vertices, 3))
        for f, poly in enumerate(self.faces):
            for v in poly:
                vn[v] += fn[f]
        return geometry.normalize_rows(vn)

    def triangle_soup(self):
        """Fan triangulation from each polygon's first vertex.

        For quads this is exactly the fixed v0-v2 diagonal split. Returns
        (tris (T,3,3), face_of_tri (T,), corner_of_tri (T,)) where corner is
        the fan index within the face.
        """
        tris, face_of, corner_of = [], [], []
        for f, poly in enumerate(self.faces):
            for k in range(1, len(poly) - 1):
                tris.append((poly[0], poly[k], poly[k + 1]))
                face_of.append(f)
                corner_of.append(k - 1)
        soup = self.vertices[np.array(tris, dtype=np.int64)]
        return soup, np.array(face_of, dtype=np.int64), np.array(corner_of, dtype=np.int64)

    def boundary_loop_count(self):
        be = [self.edge_vertices(e) for e in np.flatnonzero(self.boundary_edge_mask())]
        return _count_cycles(np.array(be, dtype=np.int64).reshape(-1, 2))

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def genus(self):
        b = self.boundary_loop_count()
        return int(round((2 - self.euler_characteristic() - b) / 2))

    def to_tri_mesh(self):
        """Triangulated copy (fan split), preserving vertex order/positions."""
        tris = []
        for poly in self.faces:
            for k in range(1, len(poly) - 1):
                tris.append((poly[0], poly[k], poly[k + 1]))
        feats = [self.edge_vertices(e) for e in np.flatnonzero(self.feature_edge)]
        return TriMesh(self.vertices.copy(), np.array(tris, dtype=np.int64),
                       feature_edges=feats)


def _count_cycles(edge_pairs):
    if len(edge_pairs) == 0:
        return 0
    nxt = {}
    for a, b in edge_pairs:
        nxt.setdefault(int(a), []).append(int(b))
        nxt.setdefault(int(b), []).append(int(a))
    seen = set()
    loops = 0
    for start in sorted(nxt):
        if start in seen:
            continue
        loops += 1
        stack = [start]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(nxt[v])
    return loops


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def parse_obj(text):
    """Parse OBJ text into (vertices, faces, polylines)."""
    verts, faces, lines = [], [], []
    for raw in text.splitlines():
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.split()
        if tok[0] == "v":
            verts.append([float(x) for x in tok[1:4]])
        elif tok[0] == "f":
            idx = [int(t.split("/")[0]) for t in tok[1:]]
            faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
        elif tok[0] == "l":
            idx = [int(t.split("/")[0]) for t in tok[1:]]
            lines.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    return np.array(verts, dtype=np.float64).reshape(-1, 3), faces, lines


def load_mesh(path, diagnostic=False):
    """Load an OBJ (or PLY) mesh.

    Triangle-only files yield :class:`TriMesh`; quad or mixed files yield
    :class:`QuadMesh`. Vertices are deduplicated by exact coordinates and
    degenerate faces dropped; a ``load_report`` dict is attached.

    With ``diagnostic=True`` non-manifold input returns a raw
    ``(vertices, faces, report)`` triple instead of raising.
    """
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if path.lower().endswith(".ply"):
        verts, faces = _parse_ascii_ply(text)
        lines = []
    else:
        verts, faces, lines = parse_obj(text)
    if len(verts) == 0 or len(faces) == 0:
        raise MeshError(f"no geometry in {path}")

    report = {"degenerate_faces": 0, "duplicate_vertices": 0,
              "nonmanifold_edges": []}
    n0 = len(verts)
    verts, faces = _dedup_vertices(verts, faces)
    report["duplicate_vertices"] = n0 - len(verts)
    faces = _clean_faces(verts, faces, report)
    if not faces:
        raise MeshError(f"no valid faces in {path}")

    feature = set()
    for pl in lines:
        for a, b in zip(pl, pl[1:]):
            feature.add((min(a, b), max(a, b)))

    sizes = {len(f) for f in faces}
    try:
        if sizes == {3}:
            m = TriMesh(verts, np.array(faces, dtype=np.int64),
                        feature_edges=feature)
            if not m.is_edge_manifold():
                raise NonManifoldError(
                    f"non-manifold edges: {m.nonmanifold_edges()[:8]}",
                    edges=m.nonmanifold_edges())
        else:
            m = QuadMesh(verts, faces, feature_edges=feature)
    except NonManifoldError as err:
        if diagnostic:
            report["nonmanifold_edges"] = list(err.edges)
            return verts, faces, report
        raise
    m.load_report = report
    return m


def _parse_ascii_ply(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshError("not a PLY file")
    n_v = n_f = 0
    i = 0
    while i < len(lines):
        tok = lines[i].split()
        if tok[:2] == ["element", "vertex"]:
            n_v = int(tok[2])
        elif tok[:2] == ["element", "face"]:
            n_f = int(tok[2])
        elif tok and tok[0] == "end_header":
            i += 1
            break
        i += 1
    verts = [[float(x) for x in lines[i + k].split()[:3]] for k in range(n_v)]
    i += n_v
    faces = []
    for k in range(n_f):
        tok = lines[i + k].split()
        cnt = int(tok[0])
        faces.append([int(t) for t in tok[1:1 + cnt]])
    return np.array(verts, dtype=np.float64).reshape(-1, 3), faces


def _fmt(x):
    return f"{x:.9g}"


def save_obj(path, mesh, feature_polylines=None):
    """Write OBJ; features go out as ``l`` polylines."""
    if isinstance(mesh, TriMesh):
        faces = [list(map(int, f)) for f in mesh.faces]
    else:
        faces = mesh.faces
    out = []
    for v in mesh.vertices:
        out.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
    for f in faces:
        out.append("f " + " ".join(str(i + 1) for i in f))
    if feature_polylines is None and getattr(mesh, "feature_edge", None) is not None:
        feature_polylines = _feature_polylines(mesh)
    for pl in feature_polylines or []:
        out.append("l " + " ".join(str(i + 1) for i in pl))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def _feature_polylines(mesh):
    if isinstance(mesh, TriMesh):
        pairs = [tuple(map(int, mesh.edges[e]))
                 for e in np.flatnonzero(mesh.feature_edge)]
    else:
        pairs = [mesh.edge_vertices(e)
                 for e in np.flatnonzero(mesh.feature_edge)]
    return [list(p) for p in sorted(pairs)]


def save_ply(path, vertices, faces, vertex_colors=None):
    """ASCII PLY writer with optional per-vertex uchar RGB."""
    vertices = np.asarray(vertices, dtype=np.float64)
    out = ["ply", "format ascii 1.0", f"element vertex {len(vertices)}",
           "property float x", "property float y", "property float z"]
    if vertex_colors is not None:
        vertex_colors = np.asarray(vertex_colors)
        out += ["property uchar red", "property uchar green",
                "property uchar blue"]
    out += [f"element face {len(faces)}",
            "property list uchar int vertex_indices", "end_header"]
    for i, v in enumerate(vertices):
        row = f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}"
        if vertex_colors is not None:
            c = vertex_colors[i]
            row += f" {int(c[0])} {int(c[1])} {int(c[2])}"
        out.append(row)
    for f in faces:
        out.append(f"{len(f)} " + " ".join(str(int(i)) for i in f))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
