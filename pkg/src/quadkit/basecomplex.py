"""Base-complex construction: separatrices, charts, minimal loop insertion.

Separatrices are the maximal edge-loops that terminate at an irregular
vertex. Together with mesh boundaries (and any supplied sharp-feature
loops) they cut the quad mesh into charts. Charts that fail to be disk
patches with four corners (tori, tubes) are repaired by inserting the
shortest uncut edge-loop that strictly reduces the topological defect,
iterating until every chart is a grid patch.
"""

import numpy as np

from .loops import enumerate_edge_loops, irregular_vertices, sharp_feature_loops
from .mesh import MeshError, QuadMesh


class Chart:
    """One m x n grid patch of the base complex."""

    def __init__(self, faces, corners, sides, m, n,
                 face_grid, vertex_grid, x_edges, y_edges):
        self.faces = faces                    # list of face ids (grid order)
        self.corners = corners                # 4 vertex ids, rim order
        self.sides = sides                    # 4 edge-id polylines, rim order
        self.m = m                            # columns of quads
        self.n = n                            # rows of quads
        self.face_grid = face_grid            # (m, n) int
        self.vertex_grid = vertex_grid        # (m+1, n+1) int
        self.x_edges = x_edges                # (m, n+1) int, row-direction
        self.y_edges = y_edges                # (m+1, n) int, column-direction

    @property
    def n_faces(self):
        return len(self.faces)


class BaseComplex:
    def __init__(self, mesh, charts, chart_of_face, cut_edges,
                 separatrices, inserted_loops):
        self.mesh = mesh
        self.charts = charts
        self.chart_of_face = chart_of_face
        self.cut_edges = cut_edges            # bool mask over edges
        self.separatrices = separatrices
        self.inserted_loops = inserted_loops

    @property
    def n_charts(self):
        return len(self.charts)

    def adjacency(self):
        """Chart pairs sharing a separatrix edge (self-pairs allowed)."""
        pairs = set()
        mesh = self.mesh
        for e in np.flatnonzero(self.cut_edges):
            f0, f1 = mesh.edge_faces(e)
            if f0 < 0 or f1 < 0:
                continue
            a, b = self.chart_of_face[f0], self.chart_of_face[f1]
            pairs.add((min(a, b), max(a, b)))
        return pairs

    def adjacency_graph(self):
        import networkx as nx

        g = nx.MultiGraph()
        g.add_nodes_from(range(self.n_charts))
        for a, b in self.adjacency():
            g.add_edge(a, b)
        return g


def _face_components(mesh, cut):
    """Connected face components crossing only uncut interior edges."""
    parent = list(range(mesh.n_faces))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in range(mesh.n_edges):
        if cut[e]:
            continue
        f0, f1 = mesh.edge_faces(e)
        if f0 >= 0 and f1 >= 0:
            ra, rb = find(f0), find(f1)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    comp_of = np.array([find(f) for f in range(mesh.n_faces)])
    roots = {}
    out = []
    ids = np.empty(mesh.n_faces, dtype=np.int64)
    for f, r in enumerate(comp_of):
        if r not in roots:
            roots[r] = len(out)
            out.append([])
        ids[f] = roots[r]
        out[roots[r]].append(f)
    return out, ids


class _ChartTopology:
    __slots__ = ("faces", "genus", "n_boundaries", "corner_walk", "n_reflex",
                 "rim_cycles")

    @property
    def n_corners(self):
        return sum(1 for _, t in self.corner_walk if t == 0)

    @property
    def defect(self):
        return (2 * abs(self.genus) + abs(self.n_boundaries - 1)
                + abs(self.n_corners - 4) + self.n_reflex)

    @property
    def is_valid(self):
        return self.defect == 0


def _chart_topology(mesh, faces, is_rim):
    """Topology of the cut-open chart complex (genus, boundaries, corners).

    The chart is treated as its abstract cut complex: face corners are
    glued only across uncut edges, so self-touching charts are measured
    correctly.
    """
    info = _ChartTopology()
    info.faces = faces
    face_set = set(faces)
    halfedges = []
    for f in faces:
        halfedges.extend(mesh.face_halfedges(f))
    hset = set(halfedges)

    # union-find over origin-corner slots
    parent = {h: h for h in halfedges}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    n_rim = 0
    for h in halfedges:
        t = mesh.h_twin[h]
        if is_rim(h):
            n_rim += 1
            continue
        if t in hset:
            union(h, int(mesh.h_next[t]))
            union(int(t), int(mesh.h_next[h]))
    n_v = len({find(h) for h in halfedges})
    n_e = (len(halfedges) + n_rim) // 2
    chi = n_v - n_e + len(faces)

    # rim walk: cycles, and the turn count at each rim transition
    rim = [h for h in halfedges if is_rim(h)]
    rim_set = set(rim)
    visited = set()
    cycles = []
    corner_walk = []
    for h0 in rim:
        if h0 in visited:
            continue
        cyc = []
        h = h0
        while True:
            visited.add(h)
            cyc.append(h)
            x = int(mesh.h_next[h])
            turns = 0
            while x not in rim_set:
                x = int(mesh.h_next[mesh.h_twin[x]])
                turns += 1
            corner_walk.append((h, turns))
            h = x
            if h == h0:
                break
        cycles.append(cyc)
    info.rim_cycles = cycles
    info.corner_walk = corner_walk
    info.n_boundaries = len(cycles)
    info.n_reflex = sum(1 for _, t in corner_walk if t >= 2)
    info.genus = int(round((2 - chi - info.n_boundaries) / 2))
    return info


def _extract_grid(mesh, faces, is_rim, topo):
    """Structured m x n layout of a valid chart."""
    # corner transitions: rim half-edge h with turn 0 means dst(h) is a corner
    # and the side starting there opens with the next rim half-edge.
    cycle = topo.rim_cycles[0]
    turn_of = dict(topo.corner_walk)
    k = len(cycle)
    corner_pos = [i for i, h in enumerate(cycle) if turn_of[h] == 0]
    if len(corner_pos) != 4:
        raise MeshError("grid extraction on invalid chart")
    # sides run between consecutive corners; pick the deterministic start
    starts = []
    for ci in range(4):
        i0 = (corner_pos[ci] + 1) % k
        starts.append((int(mesh.h_org[cycle[i0]]), int(mesh.h_edge[cycle[i0]]), ci))
    starts.sort()
    ci0 = starts[0][2]
    order = [(corner_pos[(ci0 + d) % 4] + 1) % k for d in range(4)]
    side_len = [(corner_pos[(ci0 + d + 1) % 4] - corner_pos[(ci0 + d) % 4]) % k
                for d in range(4)]
    m, n = side_len[0], side_len[1]
    if side_len[2] != m or side_len[3] != n or m * n != len(faces):
        raise MeshError("chart is not an m x n grid")

    sides = []
    corners = []
    for d in range(4):
        i0 = order[d]
        edges = [int(mesh.h_edge[cycle[(i0 + t) % k]]) for t in range(side_len[d])]
        sides.append(edges)
        corners.append(int(mesh.h_org[cycle[i0]]))

    face_grid = np.empty((m, n), dtype=np.int64)
    vertex_grid = np.empty((m + 1, n + 1), dtype=np.int64)
    x_edges = np.empty((m, n + 1), dtype=np.int64)
    y_edges = np.empty((m + 1, n), dtype=np.int64)

    h_row = cycle[order[0]]
    for j in range(n):
        h = h_row
        for i in range(m):
            f = int(mesh.h_face[h])
            face_grid[i, j] = f
            vertex_grid[i, j] = int(mesh.h_org[h])
            x_edges[i, j] = int(mesh.h_edge[h])
            y_edges[i, j] = int(mesh.h_edge[mesh.h_prev[h]])
            nx_h = int(mesh.h_next[h])
            if i == m - 1:
                vertex_grid[m, j] = mesh.halfedge_dst(h)
                y_edges[m, j] = int(mesh.h_edge[nx_h])
            if j == n - 1:
                top = int(mesh.h_next[nx_h])
                x_edges[i, n] = int(mesh.h_edge[top])
                vertex_grid[i + 1, n] = int(mesh.h_org[top])
                if i == 0:
                    vertex_grid[0, n] = mesh.halfedge_dst(top)
            if i < m - 1:
                if is_rim(nx_h):
                    raise MeshError("chart grid march crossed a cut")
                h = int(mesh.h_next[mesh.h_twin[nx_h]])
        if j < n - 1:
            top0 = int(mesh.h_next[mesh.h_next[h_row]])
            if is_rim(top0):
                raise MeshError("chart grid march crossed a cut")
            h_row = int(mesh.h_twin[top0])

    grid_faces = [int(face_grid[i, j]) for j in range(n) for i in range(m)]
    return Chart(grid_faces, corners, sides, m, n,
                 face_grid, vertex_grid, x_edges, y_edges)


def build_base_complex(mesh, extra_separatrices=None, sharp_angle_deg=130.0,
                       include_sharp_loops=True):
    """Build the base complex of a pure quad mesh.

    ``extra_separatrices`` accepts edge-id lists (for example sharp-feature
    loops) that are added to the cut set. When ``include_sharp_loops`` is
    true, maximal all-sharp edge-loops are detected and added
    automatically.
    """
    if not isinstance(mesh, QuadMesh) or not mesh.is_pure_quad:
        raise MeshError("base complex requires a pure quad mesh")

    loops = enumerate_edge_loops(mesh)
    val = mesh.vertex_valence
    bnd = mesh.vertex_on_boundary
    seed_irregular = np.where(bnd, val != 3, val != 4) & (val > 0)

    cut = mesh.boundary_edge_mask().copy()
    separatrices = []
    for loop in loops:
        if loop.closed:
            continue
        if seed_irregular[loop.vertices[0]] or seed_irregular[loop.vertices[-1]]:
            separatrices.append(loop)
            cut[np.asarray(loop.edges)] = True
    if include_sharp_loops:
        for loop in sharp_feature_loops(mesh, sharp_angle_deg):
            separatrices.append(loop)
            cut[np.asarray(loop.edges)] = True
    for extra in extra_separatrices or []:
        edges = extra.edges if hasattr(extra, "edges") else list(extra)
        cut[np.asarray(edges, dtype=np.int64)] = True

    from .fields import assign_ring_lengths

    lengths = assign_ring_lengths(mesh)
    loop_cost = sorted(
        (float(sum(lengths[e] for e in lp.edges)), min(lp.edges), lp)
        for lp in loops
    )

    inserted = []
    while True:
        comps, ids = _face_components(mesh, cut)
        is_rim = lambda h: cut[mesh.h_edge[h]]
        infos = [_chart_topology(mesh, comp, is_rim) for comp in comps]
        total = sum(info.defect for info in infos)
        if total == 0:
            break
        accepted = False
        for cost, _, cand in loop_cost:
            ce = np.asarray(cand.edges)
            if cut[ce].any():
                continue
            trial = cut.copy()
            trial[ce] = True
            comps2, _ = _face_components(mesh, trial)
            rim2 = lambda h: trial[mesh.h_edge[h]]
            total2 = sum(_chart_topology(mesh, c, rim2).defect for c in comps2)
            if total2 < total:
                cut = trial
                inserted.append(cand)
                accepted = True
                break
        if not accepted:
            raise MeshError(
                "unable to repair chart topology by loop insertion")

    is_rim = lambda h: cut[mesh.h_edge[h]]
    charts = [_extract_grid(mesh, comp, is_rim, info)
              for comp, info in zip(comps, infos)]
    return BaseComplex(mesh, charts, ids, cut, separatrices, inserted)


def topology_report(mesh, complex_=None):
    """JSON-ready summary: {vertices, faces, boundaries, N_I, N_c, genus}."""
    rep = {
        "vertices": int(mesh.n_vertices),
        "faces": int(mesh.n_faces),
        "boundaries": int(mesh.boundary_loop_count()),
        "genus": int(mesh.genus()),
    }
    if isinstance(mesh, QuadMesh) and mesh.is_pure_quad:
        irr = irregular_vertices(mesh)
        rep["N_I"] = irr["n_reported"]
        rep["N_I_with_corners"] = irr["n_seeding"]
        if complex_ is None:
            complex_ = build_base_complex(mesh)
        rep["N_c"] = complex_.n_charts
    else:
        rep["N_I"] = None
        rep["N_c"] = None
    return rep
