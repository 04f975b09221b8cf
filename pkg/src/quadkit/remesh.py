"""Feature-preserving isotropic remeshing (split / collapse / flip / relax).

Classic incremental remeshing: edges longer than 4/3 of the target are
split, shorter than 4/5 collapsed, flips equalize valence, and vertices
relax tangentially before being projected back to the input surface.
Sharp edges (dihedral below the threshold, boundaries included) are kept
as polylines: their vertices only slide along the original feature
segments and feature-graph corners are pinned.
"""

import numpy as np

from . import geometry
from .accel import SurfaceIndex
from .loops import detect_sharp_edges
from .mesh import MeshError, TriMesh

FREE, FEATURE, CORNER = 0, 1, 2


class _SegmentIndex:
    """Closest point on a small 3D segment soup (feature polylines)."""

    def __init__(self, segs):
        self.a = segs[:, 0]
        self.d = segs[:, 1] - segs[:, 0]
        self.len2 = np.einsum("ij,ij->i", self.d, self.d)

    def project(self, p):
        t = np.clip((self.d @ p - np.einsum("ij,ij->i", self.a, self.d))
                    / np.maximum(self.len2, 1e-300), 0.0, 1.0)
        cand = self.a + t[:, None] * self.d
        k = np.argmin(np.einsum("ij,ij->i", cand - p, cand - p))
        return cand[k]


def _feature_corners(mesh, sharp_mask, corner_angle_deg=40.0):
    """Feature vertices that must stay pinned.

    Corners are junctions (>=3 feature edges), chain endpoints, and
    degree-2 feature vertices where the polyline turns by more than
    ``corner_angle_deg`` away from straight.
    """
    deg = np.zeros(mesh.n_vertices, dtype=np.int64)
    nbr = {}
    for e in np.flatnonzero(sharp_mask):
        u, v = map(int, mesh.edges[e])
        deg[u] += 1
        deg[v] += 1
        nbr.setdefault(u, []).append(v)
        nbr.setdefault(v, []).append(u)
    corners = {v for v in range(mesh.n_vertices) if deg[v] not in (0, 2)}
    cos_thresh = np.cos(np.radians(180.0 - corner_angle_deg))
    for v, ns in nbr.items():
        if deg[v] != 2:
            continue
        a = mesh.vertices[ns[0]] - mesh.vertices[v]
        b = mesh.vertices[ns[1]] - mesh.vertices[v]
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na > 0 and nb > 0 and (a @ b) / (na * nb) > cos_thresh:
            corners.add(v)  # the chain bends sharply here
    return corners


def _tri_normal(pa, pb, pc):
    return np.cross(pb - pa, pc - pa)


class _EditMesh:
    def __init__(self, mesh, sharp_mask, corner_angle_deg):
        self.verts = [v.copy() for v in mesh.vertices]
        self.faces = [tuple(map(int, f)) for f in mesh.faces]
        self.alive = [True] * len(self.faces)
        kind = np.zeros(mesh.n_vertices, dtype=np.int8)
        self.feature_edges = set()
        for e in np.flatnonzero(sharp_mask):
            u, v = map(int, mesh.edges[e])
            self.feature_edges.add(self._key(u, v))
            kind[u] = max(kind[u], FEATURE)
            kind[v] = max(kind[v], FEATURE)
        for c in _feature_corners(mesh, sharp_mask, corner_angle_deg):
            kind[c] = CORNER
        self.vkind = list(kind)

    @staticmethod
    def _key(u, v):
        return (u, v) if u < v else (v, u)

    def _add_face(self, tri, em=None):
        self.faces.append(tuple(tri))
        self.alive.append(True)
        fid = len(self.faces) - 1
        if em is not None:
            a, b, c = tri
            for p in ((a, b), (b, c), (c, a)):
                em.setdefault(self._key(*p), []).append(fid)
        return fid

    def edge_map(self):
        em = {}
        for fi, f in enumerate(self.faces):
            if not self.alive[fi]:
                continue
            a, b, c = f
            for u, v in ((a, b), (b, c), (c, a)):
                em.setdefault(self._key(u, v), []).append(fi)
        return em

    def _live(self, em, k):
        return [fi for fi in em.get(k, []) if self.alive[fi]]

    def vertex_faces(self):
        vf = {}
        for fi, f in enumerate(self.faces):
            if not self.alive[fi]:
                continue
            for v in f:
                vf.setdefault(v, []).append(fi)
        return vf

    def add_vertex(self, p, kind):
        self.verts.append(np.asarray(p, dtype=np.float64))
        self.vkind.append(kind)
        return len(self.verts) - 1

    # -- passes --------------------------------------------------------------

    def split_pass(self, max_len):
        import heapq

        em = self.edge_map()
        heap = []
        for k in em:
            ln = np.linalg.norm(self.verts[k[0]] - self.verts[k[1]])
            if ln > max_len:
                heapq.heappush(heap, (-ln, k))
        while heap:
            neg_len, k = heapq.heappop(heap)
            u, v = k
            ln = np.linalg.norm(self.verts[u] - self.verts[v])
            if ln <= max_len or abs(ln + neg_len) > 1e-12 * max(ln, 1.0):
                continue  # stale entry
            fids = [fi for fi in self._live(em, k)
                    if k in {self._key(*p) for p in _face_edges(self.faces[fi])}]
            if not fids:
                continue
            is_feat = k in self.feature_edges
            m = self.add_vertex(0.5 * (self.verts[u] + self.verts[v]),
                                FEATURE if is_feat else FREE)
            if is_feat:
                self.feature_edges.discard(k)
                self.feature_edges.add(self._key(u, m))
                self.feature_edges.add(self._key(m, v))
            for fi in fids:
                tri = list(self.faces[fi])
                t1 = tri.copy()
                t1[tri.index(v)] = m       # keeps (u, m, opp) orientation
                t2 = tri.copy()
                t2[tri.index(u)] = m       # keeps (m, v, opp) orientation
                self.alive[fi] = False
                self._add_face(t1, em)
                self._add_face(t2, em)
            for pair in ((u, m), (m, v)):
                ln2 = np.linalg.norm(self.verts[pair[0]] - self.verts[pair[1]])
                if ln2 > max_len:
                    heapq.heappush(heap, (-ln2, self._key(*pair)))

    def collapse_pass(self, min_len, max_len):
        em = self.edge_map()
        vf = self.vertex_faces()
        boundary_v = set()
        for k in em:
            if len(self._live(em, k)) == 1:
                boundary_v.update(k)
        lens = {k: np.linalg.norm(self.verts[k[0]] - self.verts[k[1]])
                for k in em}
        dead = set()
        for k in sorted(lens, key=lambda kk: (lens[kk], kk)):
            if lens[k] >= min_len:
                break
            u, v = k
            if u in dead or v in dead:
                continue
            if np.linalg.norm(self.verts[u] - self.verts[v]) >= min_len:
                continue  # neighborhood changed since the snapshot
            fids = [fi for fi in self._live(em, k)
                    if k in {self._key(*p) for p in _face_edges(self.faces[fi])}]
            if not fids:
                continue
            ku, kv = self.vkind[u], self.vkind[v]
            if ku == CORNER and kv == CORNER:
                continue
            if ku >= FEATURE and kv >= FEATURE and k not in self.feature_edges:
                continue  # would pinch two distinct features together
            if kv > ku:
                u, v, ku, kv = v, u, kv, ku
            # u survives; v dies
            target = self.verts[u] if ku > kv \
                else 0.5 * (self.verts[u] + self.verts[v])
            if len(fids) == 2 and u in boundary_v and v in boundary_v:
                continue  # interior edge joining two boundary arcs: pinch
            if not self._can_collapse(u, v, fids, vf, target, max_len):
                continue
            self._do_collapse(u, v, fids, vf, em, target)
            boundary_v.discard(v)
            if v in boundary_v or u in boundary_v:
                boundary_v.add(u)
            dead.add(v)

    def _one_ring(self, v, vf):
        ring = set()
        for fi in vf.get(v, []):
            if self.alive[fi]:
                ring.update(self.faces[fi])
        ring.discard(v)
        return ring

    def _can_collapse(self, u, v, fids, vf, target, max_len):
        opp = set()
        for fi in fids:
            opp.update(x for x in self.faces[fi] if x not in (u, v))
        if self._one_ring(u, vf) & self._one_ring(v, vf) != opp:
            return False  # link condition
        for fi in vf.get(v, []):
            if not self.alive[fi] or fi in fids:
                continue
            old = [self.verts[x] for x in self.faces[fi]]
            tri = [u if x == v else x for x in self.faces[fi]]
            pts = [target if x == u else self.verts[x] for x in tri]
            n_new = _tri_normal(*pts)
            if np.linalg.norm(n_new) <= 1e-16 or n_new @ _tri_normal(*old) <= 0:
                return False  # degenerate or flipped triangle
            for a, b in _face_edges(tri):
                pa = target if a == u else self.verts[a]
                pb = target if b == u else self.verts[b]
                if np.linalg.norm(pa - pb) > max_len:
                    return False
        return True

    def _do_collapse(self, u, v, fids, vf, em, target):
        self.verts[u] = np.asarray(target, dtype=np.float64)
        for fi in fids:
            self.alive[fi] = False
        for fi in vf.get(v, []):
            if not self.alive[fi]:
                continue
            tri = tuple(u if x == v else x for x in self.faces[fi])
            self.faces[fi] = tri
            vf.setdefault(u, []).append(fi)
            for p in _face_edges(tri):
                em.setdefault(self._key(*p), []).append(fi)
        for k in [k for k in self.feature_edges if v in k]:
            self.feature_edges.discard(k)
            a, b = ((u if x == v else x) for x in k)
            if a != b:
                self.feature_edges.add(self._key(a, b))

    def flip_pass(self):
        em = self.edge_map()
        valence = {}
        boundary_v = set()
        for k in em:
            live = self._live(em, k)
            for x in k:
                valence[x] = valence.get(x, 0) + 1
            if len(live) == 1:
                boundary_v.update(k)

        def target(x):
            return 4 if x in boundary_v else 6

        for k in sorted(em):
            live = self._live(em, k)
            if len(live) != 2 or k in self.feature_edges:
                continue
            f1, f2 = live
            e1 = {self._key(*p) for p in _face_edges(self.faces[f1])}
            e2 = {self._key(*p) for p in _face_edges(self.faces[f2])}
            if e1 & e2 != {k} or k not in e1:
                continue
            u, v = k
            c = next(x for x in self.faces[f1] if x not in k)
            d = next(x for x in self.faces[f2] if x not in k)
            kcd = self._key(c, d)
            if self._live(em, kcd):
                continue
            dev_now = sum((valence[x] - target(x)) ** 2 for x in (u, v, c, d))
            val2 = {x: valence[x] for x in (u, v, c, d)}
            val2[u] -= 1
            val2[v] -= 1
            val2[c] += 1
            val2[d] += 1
            dev_new = sum((val2[x] - target(x)) ** 2 for x in (u, v, c, d))
            if dev_new >= dev_now:
                continue
            if _oriented(self.faces[f1], u, v):
                new1, new2 = (u, d, c), (v, c, d)
            else:
                new1, new2 = (v, d, c), (u, c, d)
            ref = (_tri_normal(*(self.verts[x] for x in self.faces[f1]))
                   + _tri_normal(*(self.verts[x] for x in self.faces[f2])))
            ok = True
            for tri in (new1, new2):
                n = _tri_normal(*(self.verts[x] for x in tri))
                if np.linalg.norm(n) <= 1e-16 or n @ ref <= 0:
                    ok = False
                    break
            if not ok:
                continue
            self.faces[f1], self.faces[f2] = new1, new2
            em[k] = []
            em.setdefault(kcd, []).extend([f1, f2])
            for p in _face_edges(new1):
                em.setdefault(self._key(*p), []).append(f1)
            for p in _face_edges(new2):
                em.setdefault(self._key(*p), []).append(f2)
            valence[u] -= 1
            valence[v] -= 1
            valence[c] += 1
            valence[d] += 1

    def relax_and_project(self, surface, feat_index, lam=0.5):
        em = self.edge_map()
        nbrs = {}
        for k in em:
            if not self._live(em, k):
                continue
            a, b = k
            nbrs.setdefault(a, set()).add(b)
            nbrs.setdefault(b, set()).add(a)
        vf = self.vertex_faces()
        free_ids, free_pts = [], []
        for v in sorted(nbrs):
            kind = self.vkind[v]
            if kind == CORNER:
                continue
            p = self.verts[v]
            if kind == FEATURE:
                chain = [x for x in nbrs[v]
                         if self._key(v, x) in self.feature_edges]
                if len(chain) != 2:
                    continue
                cen = 0.5 * (self.verts[chain[0]] + self.verts[chain[1]])
                q = p + lam * (cen - p)
                self.verts[v] = feat_index.project(q) if feat_index else q
            else:
                cen = np.mean([self.verts[x] for x in sorted(nbrs[v])], axis=0)
                n = np.zeros(3)
                for fi in vf.get(v, []):
                    if self.alive[fi]:
                        n += _tri_normal(*(self.verts[x] for x in self.faces[fi]))
                nl = np.linalg.norm(n)
                move = lam * (cen - p)
                if nl > 0:
                    n /= nl
                    move = move - (move @ n) * n
                free_ids.append(v)
                free_pts.append(p + move)
        if free_ids:
            _, cp, _ = surface.query(np.array(free_pts))
            for v, q in zip(free_ids, cp):
                self.verts[v] = q

    def to_tri_mesh(self):
        live = [f for f, a in zip(self.faces, self.alive) if a]
        used = sorted({v for f in live for v in f})
        remap = {v: i for i, v in enumerate(used)}
        verts = np.array([self.verts[v] for v in used])
        faces = np.array([[remap[x] for x in f] for f in live], dtype=np.int64)
        feats = [(remap[a], remap[b]) for a, b in self.feature_edges
                 if a in remap and b in remap]
        return TriMesh(verts, faces, feature_edges=feats)


def _face_edges(f):
    a, b, c = f
    return ((a, b), (b, c), (c, a))


def _oriented(face, u, v):
    """True when the face traverses u -> v."""
    t = list(face)
    return t[(t.index(u) + 1) % 3] == v


def isotropic_remesh(mesh, target_edge_length, preserve_sharp=True,
                     iterations=5, sharp_angle_deg=130.0):
    """Remesh to roughly uniform edge length with feature preservation.

    ``target_edge_length`` is a fraction of the bounding-box diagonal.
    Sharp edges (and all boundaries) survive as polylines when
    ``preserve_sharp`` is set; they are tagged on the returned TriMesh.
    """
    if not isinstance(mesh, TriMesh):
        mesh = mesh.to_tri_mesh()
    if not mesh.is_edge_manifold():
        raise MeshError("isotropic remeshing requires a manifold mesh")
    diag = geometry.bbox_diagonal(mesh.vertices)
    length = target_edge_length * diag

    if preserve_sharp:
        sharp = detect_sharp_edges(mesh, sharp_angle_deg)
    else:
        sharp = mesh.boundary_edge_mask()
    em = _EditMesh(mesh, sharp, corner_angle_deg=40.0)

    surface = SurfaceIndex(mesh.triangle_soup())
    feat_ids = np.flatnonzero(sharp)
    feat_index = _SegmentIndex(mesh.vertices[mesh.edges[feat_ids]]) \
        if len(feat_ids) else None

    for _ in range(iterations):
        em.split_pass(4.0 / 3.0 * length)
        em.collapse_pass(4.0 / 5.0 * length, 4.0 / 3.0 * length)
        em.flip_pass()
        em.relax_and_project(surface, feat_index)

    out = em.to_tri_mesh()
    if not out.is_edge_manifold():
        raise MeshError("remeshing produced a non-manifold mesh")
    return out
