"""Loop traversal on quad meshes.

Edge-loops walk vertex-opposite edges through regular vertices; edge-rings
walk face-opposite edges through faces, and the traversed faces form the
face-loop. Both walks are deterministic involutions: retracing from any
member edge reproduces the same loop.
"""

import math

import numpy as np

from .mesh import MeshError, QuadMesh, TriMesh


class EdgeLoop:
    """Ordered edge list with its vertex polyline.

    ``vertices`` has ``len(edges)+1`` entries when open; for closed loops
    the start vertex is not repeated (``len(edges)`` entries).
    """

    __slots__ = ("edges", "vertices", "closed")

    def __init__(self, edges, vertices, closed):
        self.edges = edges
        self.vertices = vertices
        self.closed = closed

    def __len__(self):
        return len(self.edges)


class FaceLoop:
    """Face strip of an edge-ring; ``faces`` may repeat for crossing strips."""

    __slots__ = ("faces", "ring_edges", "closed")

    def __init__(self, faces, ring_edges, closed):
        self.faces = faces
        self.ring_edges = ring_edges
        self.closed = closed

    def __len__(self):
        return len(self.faces)


def _require_pure_quad(mesh):
    if not isinstance(mesh, QuadMesh) or not mesh.is_pure_quad:
        raise MeshError("operation requires a pure quad mesh")


def irregular_vertices(mesh):
    """Vertices violating the regularity rule (interior 4 / boundary 3).

    Returns a dict with ``ids``, per-id ``valence`` and ``on_boundary``
    annotations, plus two counts: ``n_reported`` excludes boundary
    valence-2 patch corners (the convention used when reporting N_I) while
    ``n_seeding`` counts every irregular vertex, corners included, as used
    for separatrix seeding.
    """
    _require_pure_quad(mesh)
    val = mesh.vertex_valence
    bnd = mesh.vertex_on_boundary
    irregular = np.where(bnd, val != 3, val != 4) & (val > 0)
    ids = np.flatnonzero(irregular)
    corners = bnd[ids] & (val[ids] == 2)
    return {
        "ids": ids,
        "valence": val[ids],
        "on_boundary": bnd[ids],
        "n_seeding": int(len(ids)),
        "n_reported": int(len(ids) - corners.sum()),
    }


def _is_seed_vertex(mesh, v):
    val = mesh.vertex_valence[v]
    if mesh.vertex_on_boundary[v]:
        return val != 3
    return val != 4


def _edge_loop_continuation(mesh, e, w):
    """Next edge of the loop through vertex ``w`` arrived via edge ``e``.

    Returns -1 where the loop terminates (irregular or boundary rules).
    """
    val = mesh.vertex_valence[w]
    if mesh.vertex_on_boundary[w]:
        if val != 3 or not mesh.edge_is_boundary(e):
            return -1
        # continue along the other boundary edge at w; the fan sweep starts
        # at the outgoing boundary half-edge and ends before the incoming one
        ring = mesh.outgoing_halfedges(w)
        b_out = int(mesh.h_edge[ring[0]])
        b_in = int(mesh.h_edge[mesh.h_prev[ring[-1]]])
        if b_out == e:
            return b_in
        if b_in == e:
            return b_out
        return -1
    if val != 4:
        return -1
    # interior regular vertex: rotate two steps to the vertex-opposite edge
    u0, u1 = mesh.edge_vertices(e)
    h = mesh.halfedge_between(w, u0 if u1 == w else u1)
    ring = mesh.outgoing_halfedges(w)
    k = ring.index(h)
    return int(mesh.h_edge[ring[(k + 2) % 4]])


def trace_edge_loop(mesh, start_edge):
    """Maximal edge-loop through ``start_edge``.

    Closed iff the walk returns to the start edge travelling the same
    direction; open loops end at irregular vertices or at boundary
    vertices reached via an interior edge.
    """
    _require_pure_quad(mesh)
    v0, v1 = mesh.edge_vertices(start_edge)

    def walk(to_vertex):
        edges, verts = [start_edge], [to_vertex]
        e, w = start_edge, to_vertex
        while True:
            nxt = _edge_loop_continuation(mesh, e, w)
            if nxt < 0:
                return edges, verts, False
            if nxt == start_edge:
                return edges, verts, True
            a, b = mesh.edge_vertices(nxt)
            w = a if b == w else b
            e = nxt
            edges.append(e)
            verts.append(w)

    edges_f, verts_f, closed = walk(v1)
    if closed:
        return EdgeLoop(edges_f, [v0] + verts_f[:-1], True)
    edges_b, verts_b, _ = walk(v0)
    edges = list(reversed(edges_b[1:])) + edges_f
    verts = list(reversed(verts_b)) + verts_f
    return EdgeLoop(edges, verts, False)


def _opposite_halfedge(mesh, h):
    return mesh.h_next[mesh.h_next[h]]


def trace_face_loop(mesh, start_edge):
    """Face-loop (edge-ring strip) through ``start_edge``.

    Faces may repeat when the strip crosses itself; repeats are recorded,
    not collapsed.
    """
    _require_pure_quad(mesh)
    h0 = int(mesh.e_half[start_edge])

    def walk(h_enter):
        """March faces from the half-edge ``h_enter`` (entering its face)."""
        ring, faces = [], []
        h = h_enter
        while True:
            if h < 0:
                return ring, faces, False
            e = int(mesh.h_edge[h])
            if ring and e == start_edge and h == h0:
                return ring, faces, True
            ring.append(e)
            faces.append(int(mesh.h_face[h]))
            h_exit = _opposite_halfedge(mesh, h)
            t = mesh.h_twin[h_exit]
            if t < 0:
                ring.append(int(mesh.h_edge[h_exit]))
                return ring, faces, False
            h = int(t)

    ring_f, faces_f, closed = walk(h0)
    if closed:
        return FaceLoop(faces_f, ring_f, True)
    t0 = mesh.h_twin[h0]
    if t0 >= 0:
        ring_b, faces_b, _ = walk(int(t0))
        ring = list(reversed(ring_b[1:])) + ring_f
        faces = list(reversed(faces_b)) + faces_f
        return FaceLoop(faces, ring, False)
    return FaceLoop(faces_f, ring_f, False)


def enumerate_edge_loops(mesh):
    """All maximal edge-loops; each edge belongs to exactly one."""
    _require_pure_quad(mesh)
    seen = np.zeros(mesh.n_edges, dtype=bool)
    out = []
    for e in range(mesh.n_edges):
        if seen[e]:
            continue
        loop = trace_edge_loop(mesh, e)
        for le in loop.edges:
            seen[le] = True
        out.append(loop)
    return out


def enumerate_face_loops(mesh):
    """All maximal face-loops; each edge belongs to exactly one ring."""
    _require_pure_quad(mesh)
    seen = np.zeros(mesh.n_edges, dtype=bool)
    out = []
    for e in range(mesh.n_edges):
        if seen[e]:
            continue
        loop = trace_face_loop(mesh, e)
        for re_ in loop.ring_edges:
            seen[re_] = True
        out.append(loop)
    return out


def dihedral_angles_deg(mesh):
    """Interior dihedral angle per edge in degrees (180 = flat).

    Boundary edges get NaN.
    """
    if isinstance(mesh, TriMesh):
        normals = mesh.face_normals()
        out = np.full(mesh.n_edges, np.nan)
        for e in range(mesh.n_edges):
            f0, f1 = mesh.edge_faces[e]
            if f0 < 0 or f1 < 0:
                continue
            d = float(np.clip(np.dot(normals[f0], normals[f1]), -1.0, 1.0))
            out[e] = 180.0 - math.degrees(math.acos(d))
        return out
    normals = mesh.face_normals()
    out = np.full(mesh.n_edges, np.nan)
    for e in range(mesh.n_edges):
        f0, f1 = mesh.edge_faces(e)
        if f1 < 0:
            continue
        d = float(np.clip(np.dot(normals[f0], normals[f1]), -1.0, 1.0))
        out[e] = 180.0 - math.degrees(math.acos(d))
    return out


def detect_sharp_edges(mesh, angle_threshold=130.0):
    """Edges whose dihedral angle is below the threshold.

    Boundary edges are always tagged. Returns a boolean mask over edge ids.
    Monotone in the threshold by construction.
    """
    ang = dihedral_angles_deg(mesh)
    sharp = np.where(np.isnan(ang), True, ang < angle_threshold)
    return sharp


def sharp_feature_loops(mesh, angle_threshold=130.0, sharp=None):
    """Maximal edge-loops in which every edge is sharp.

    These are the loops promoted to extra separatrices so sharp features
    survive as chart boundaries.
    """
    if sharp is None:
        sharp = detect_sharp_edges(mesh, angle_threshold)
    out = []
    for loop in enumerate_edge_loops(mesh):
        if all(sharp[e] for e in loop.edges):
            out.append(loop)
    return out
