"""Loop-quality-aware triangle merging (quad recovery).

Recovers quad-dominant meshes from triangulated quad assets: edges are
scored by the rectangularity of the quad their two triangles would form,
merging then grows along edge-flow directions preferring low
misalignment, and loop shifting re-pairs face-loop source triangles to
absorb dangling triangles left by parallelogram-shaped quads.
"""

import heapq

import numpy as np

from . import geometry
from .mesh import QuadMesh, TriMesh

_CONVEX_EPS = 1e-10


def _pair_quad_cycle(mesh, e):
    """Corner cycle of the quad formed by the two triangles of edge ``e``."""
    f1, f2 = mesh.edge_faces[e]
    if f1 < 0 or f2 < 0:
        return None
    u, v = map(int, mesh.edges[e])
    t1 = [int(x) for x in mesh.faces[f1]]
    t2 = [int(x) for x in mesh.faces[f2]]
    # orient so that t1 traverses u -> v
    if t1[(t1.index(u) + 1) % 3] != v:
        f1, f2 = f2, f1
        t1, t2 = t2, t1
        if t1[(t1.index(u) + 1) % 3] != v:
            return None  # inconsistent orientation
    c = next(x for x in t1 if x != u and x != v)
    d = next(x for x in t2 if x != u and x != v)
    return (u, d, v, c), (int(f1), int(f2))


def _quad_angles_projected(pts, normal):
    """Interior angles (degrees) of the quad projected along ``normal``."""
    n = normal / np.linalg.norm(normal)
    flat = pts - np.outer(pts @ n, n)
    ang = []
    for i in range(4):
        e1 = flat[(i + 1) % 4] - flat[i]
        e2 = flat[(i - 1) % 4] - flat[i]
        ang.append(np.degrees(geometry.angle_between(e1[None], e2[None])))
    return np.array(ang), flat


def _projected_convex(flat, normal):
    n = normal / np.linalg.norm(normal)
    scale2 = max(np.max(np.linalg.norm(flat - flat.mean(0), axis=1)) ** 2,
                 1e-300)
    signs = []
    for i in range(4):
        e1 = flat[(i + 1) % 4] - flat[i]
        e2 = flat[(i + 2) % 4] - flat[(i + 1) % 4]
        signs.append(np.cross(e1, e2) @ n / scale2)
    signs = np.array(signs)
    return bool(np.all(signs > _CONVEX_EPS) or np.all(signs < -_CONVEX_EPS))


def rectangularity(mesh, e, min_dihedral_deg=120.0):
    """Rectangularity of merging across interior edge ``e``.

    Returns a dict with ``score`` (sum of projected corner-angle
    deviations from 90 degrees), the ``quad`` cycle, source ``tris``,
    ``dihedral`` and the ``admissible`` flag (dihedral at or above the
    threshold and projected quad convex); None for boundary edges.
    """
    out = _pair_quad_cycle(mesh, e)
    if out is None:
        return None
    cycle, (f1, f2) = out
    tri_pts = mesh.vertices[mesh.faces[[f1, f2]]]
    n1, n2 = geometry.triangle_normals(tri_pts)
    l1, l2 = np.linalg.norm(n1), np.linalg.norm(n2)
    if l1 <= 0 or l2 <= 0:
        return None
    dihedral = 180.0 - np.degrees(
        np.arccos(np.clip((n1 @ n2) / (l1 * l2), -1.0, 1.0)))
    normal = n1 + n2
    pts = mesh.vertices[np.array(cycle)]
    angles, flat = _quad_angles_projected(pts, normal)
    convex = _projected_convex(flat, normal)
    score = float(np.sum(np.abs(angles - 90.0)))
    return {
        "edge": int(e),
        "quad": cycle,
        "tris": (f1, f2),
        "score": score,
        "dihedral": float(dihedral),
        "convex": convex,
        "admissible": bool(convex and dihedral >= min_dihedral_deg),
    }


def misalignment(positions, current_cycle, candidate_cycle, shared):
    """Edge-flow misalignment (degrees) between two quads sharing a side.

    At each endpoint of the shared edge, the turning between the current
    quad's side arriving there and the candidate's side leaving it;
    straight grid continuation scores zero.
    """
    u, v = shared
    total = 0.0
    for x in (u, v):
        cur = list(current_cycle)
        cand = list(candidate_cycle)
        i = cur.index(x)
        w1 = cur[(i + 1) % 4] if cur[(i - 1) % 4] in (u, v) else cur[(i - 1) % 4]
        j = cand.index(x)
        w2 = cand[(j + 1) % 4] if cand[(j - 1) % 4] in (u, v) else cand[(j - 1) % 4]
        d1 = positions[x] - positions[w1]
        d2 = positions[w2] - positions[x]
        total += np.degrees(geometry.angle_between(d1[None], d2[None]))
    return float(total)


class QuadDominantMesh:
    """Mixed quad/triangle mesh over the input vertices.

    Fully determined by the source TriMesh and the merged triangle pairs;
    faces list the quads first (one per pair) then the leftover
    triangles.
    """

    def __init__(self, tri_mesh, pairs, edge_lut=None):
        self.tri_mesh = tri_mesh
        self.vertices = tri_mesh.vertices
        self.pairs = [tuple(p) for p in pairs]
        self._edge_lut = edge_lut or _edge_lut(tri_mesh)
        paired = {t for p in self.pairs for t in p}
        self.leftover_tris = [t for t in range(tri_mesh.n_faces)
                              if t not in paired]
        self.faces = []
        self.quad_source = {}
        for i, (ta, tb) in enumerate(self.pairs):
            e = self._shared_edge(ta, tb)
            cycle, _ = _pair_quad_cycle(tri_mesh, e)
            self.faces.append(list(cycle))
            self.quad_source[i] = (ta, tb)
        for t in self.leftover_tris:
            self.faces.append([int(x) for x in tri_mesh.faces[t]])

    def _shared_edge(self, ta, tb):
        shared = set(map(int, self.tri_mesh.faces[ta])) & \
            set(map(int, self.tri_mesh.faces[tb]))
        if len(shared) != 2:
            raise ValueError("triangles are not edge-adjacent")
        u, v = sorted(shared)
        return self._edge_lut[(u, v)]

    @property
    def n_quads(self):
        return len(self.pairs)

    @property
    def n_triangles(self):
        return len(self.leftover_tris)

    @property
    def purity(self):
        return self.n_quads / max(1, len(self.faces))

    def stats(self):
        return {
            "input_tris": int(self.tri_mesh.n_faces),
            "quads": int(self.n_quads),
            "remaining_tris": int(self.n_triangles),
            "purity_percent": 100.0 * self.purity,
        }

    def to_quad_mesh(self):
        return QuadMesh(self.vertices.copy(), self.faces)


def _edge_lut(mesh):
    return {tuple(map(int, ev)): i for i, ev in enumerate(mesh.edges)}


def merge_triangles(mesh, min_dihedral_deg=120.0):
    """Greedy direction-aligned merging of a triangle mesh into quads.

    Seeds are processed from the most rectangular admissible edge up;
    each seed starts a growth wave whose priority queue prefers
    candidates best aligned with the already-merged quads' edge flow.
    """
    if not isinstance(mesh, TriMesh):
        raise TypeError("merge_triangles expects a TriMesh")
    lut = _edge_lut(mesh)
    cand = {}
    for e in range(mesh.n_edges):
        c = rectangularity(mesh, e, min_dihedral_deg)
        if c is not None and c["admissible"]:
            cand[e] = c
    merged = np.zeros(mesh.n_faces, dtype=bool)
    pairs = []

    def do_merge(c):
        pairs.append(c["tris"])
        merged[list(c["tris"])] = True

    def enqueue(heap, quad_cycle):
        cyc = list(quad_cycle)
        for k in range(4):
            u, v = cyc[k], cyc[(k + 1) % 4]
            e = lut.get((u, v) if u < v else (v, u))
            if e is None:
                continue
            for t3 in mesh.edge_faces[e]:
                if t3 < 0 or merged[t3]:
                    continue
                for ke in mesh.face_edges[t3]:
                    c2 = cand.get(int(ke))
                    if c2 is None or int(ke) == e:
                        continue
                    ta, tb = c2["tris"]
                    if merged[ta] or merged[tb]:
                        continue
                    mis = misalignment(mesh.vertices, cyc, c2["quad"], (u, v))
                    heapq.heappush(heap, (mis, int(ke)))

    for e in sorted(cand, key=lambda e: (cand[e]["score"], e)):
        c = cand[e]
        if merged[c["tris"][0]] or merged[c["tris"][1]]:
            continue
        do_merge(c)
        heap = []
        enqueue(heap, c["quad"])
        while heap:
            _, e2 = heapq.heappop(heap)
            c2 = cand[e2]
            if merged[c2["tris"][0]] or merged[c2["tris"][1]]:
                continue
            do_merge(c2)
            enqueue(heap, c2["quad"])

    return QuadDominantMesh(mesh, pairs, lut)


# ---------------------------------------------------------------------------
# Loop shifting
# ---------------------------------------------------------------------------

def _opposite_side(cycle, u, v):
    cyc = list(cycle)
    for k in range(4):
        if {cyc[k], cyc[(k + 1) % 4]} == {u, v}:
            return cyc[(k + 2) % 4], cyc[(k + 3) % 4]
    raise ValueError("side not in quad")


def loop_shift(qdm, min_dihedral_deg=120.0, max_rounds=256):
    """Re-pair face-loops to absorb dangling triangles.

    A shift applies when it (1) increases the quad count, or (2) keeps
    the count while strictly lowering the strip's total rectangularity
    deviation. Repeats to a fixpoint; terminates because the
    (quad count, -score) key strictly improves each round.
    """
    mesh = qdm.tri_mesh
    lut = qdm._edge_lut
    tri_verts = [set(map(int, f)) for f in mesh.faces]

    def pair_info(ta, tb):
        shared = tri_verts[ta] & tri_verts[tb]
        if len(shared) != 2:
            return None
        u, v = sorted(shared)
        e = lut.get((u, v))
        return rectangularity(mesh, e, min_dihedral_deg) if e is not None else None

    pairs = list(qdm.pairs)
    for _ in range(max_rounds):
        partner = {}
        for ta, tb in pairs:
            partner[ta] = tb
            partner[tb] = ta
        shift = _find_shift(mesh, lut, partner, pair_info, tri_verts)
        if shift is None:
            break
        old_pairs, new_pairs = shift
        old_set = {tuple(sorted(p)) for p in old_pairs}
        pairs = [p for p in pairs if tuple(sorted(p)) not in old_set]
        pairs.extend(new_pairs)
    return QuadDominantMesh(mesh, sorted(tuple(sorted(p)) for p in pairs), lut)


def _find_shift(mesh, lut, partner, pair_info, tri_verts):
    """First applicable shift in deterministic order, or None."""
    adj = mesh.face_adjacency()
    unpaired = sorted(t for t in range(mesh.n_faces) if t not in partner)
    for t in unpaired:
        for k in range(3):
            n = int(adj[t, k])
            if n < 0 or n not in partner:
                continue
            e = int(mesh.face_edges[t, k])
            entry = tuple(map(int, mesh.edges[e]))
            # march the strip of quads
            seq = [t]
            cur = n
            visited = set()
            end_tri = None
            while True:
                if cur in visited:
                    seq = None
                    break  # closed loop
                visited.add(cur)
                mate = partner[cur]
                visited.add(mate)
                seq += [cur, mate]
                info = pair_info(cur, mate)
                if info is None:
                    seq = None
                    break
                a, b = _opposite_side(info["quad"], *entry)
                key = (a, b) if a < b else (b, a)
                eid = lut.get(key)
                nxt = [f for f in mesh.edge_faces[eid]
                       if f >= 0 and f != mate] if eid is not None else []
                if not nxt:
                    break
                f = int(nxt[0])
                if f in visited:
                    seq = None
                    break
                entry = (a, b)
                if f not in partner:
                    end_tri = f
                    seq.append(f)
                    break
                cur = f
            if seq is None:
                continue
            gain = end_tri is not None
            strip = seq if gain else seq[:-1]
            dangler = None if gain else seq[-1]
            new_pairs = [(strip[2 * i], strip[2 * i + 1])
                         for i in range(len(strip) // 2)]
            infos = [pair_info(a, b) for a, b in new_pairs]
            if any(c is None or not c["admissible"] for c in infos):
                continue
            old_pairs = [(seq[2 * i + 1], seq[2 * i + 2])
                         for i in range((len(seq) - 1) // 2)]
            if not gain:
                old_score = sum(pair_info(a, b)["score"] for a, b in old_pairs)
                new_score = sum(c["score"] for c in infos)
                if new_score >= old_score - 1e-12:
                    continue
            return old_pairs, new_pairs
    return None
