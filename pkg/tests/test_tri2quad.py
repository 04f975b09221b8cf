import numpy as np
import pytest

from quadkit import synthetic as syn
from quadkit.mesh import QuadMesh, TriMesh
from quadkit.tri2quad import (QuadDominantMesh, loop_shift, merge_triangles,
                              misalignment, rectangularity)


def two_triangle_mesh(quad_pts):
    """Planar quad split along the 0-2 diagonal into two triangles."""
    return TriMesh(np.asarray(quad_pts, dtype=float),
                   np.array([[0, 1, 2], [0, 2, 3]]))


def shared_edge_id(mesh):
    for e in range(mesh.n_edges):
        if mesh.edge_face_count[e] == 2:
            return e
    raise AssertionError("no interior edge")


def test_rectangularity_rectangle_zero():
    m = two_triangle_mesh([[0, 0, 0], [2, 0, 0], [2, 1, 0], [0, 1, 0]])
    c = rectangularity(m, shared_edge_id(m))
    assert c["score"] == pytest.approx(0.0, abs=1e-9)
    assert c["admissible"]


def test_rectangularity_parallelogram_120():
    d = np.radians(60.0)
    p = np.array([[0, 0, 0], [1, 0, 0],
                  [1 + np.cos(d), np.sin(d), 0], [np.cos(d), np.sin(d), 0]])
    m = two_triangle_mesh(p)
    c = rectangularity(m, shared_edge_id(m))
    assert c["score"] == pytest.approx(120.0, abs=1e-9)  # 4 corners x 30 deg


def test_rectangularity_crease_inadmissible():
    # two unit triangles folded to a 90-degree dihedral
    verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 0, 1]], dtype=float)
    m = TriMesh(verts, np.array([[0, 1, 2], [0, 3, 1]]))
    c = rectangularity(m, shared_edge_id(m))
    assert c["dihedral"] == pytest.approx(90.0, abs=1e-6)
    assert not c["admissible"]


def test_rectangularity_nonconvex_inadmissible():
    p = np.array([[0, 0, 0], [2, 0, 0], [0.2, 0.2, 0], [0, 2, 0]])
    m = two_triangle_mesh(p)
    c = rectangularity(m, shared_edge_id(m))
    assert not c["convex"]
    assert not c["admissible"]


def test_misalignment_straight_continuation_zero():
    pos = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                    [2, 0, 0], [2, 1, 0]], dtype=float)
    cur = (0, 1, 2, 3)
    cand = (1, 4, 5, 2)
    assert misalignment(pos, cur, cand, (1, 2)) == pytest.approx(0.0, abs=1e-9)


def test_misalignment_sheared_continuation():
    t = np.radians(15.0)
    shift = np.tan(t)
    pos = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                    [2, shift, 0], [2, 1 + shift, 0]], dtype=float)
    cand = (1, 4, 5, 2)
    got = misalignment(pos, (0, 1, 2, 3), cand, (1, 2))
    assert got == pytest.approx(30.0, abs=1e-6)  # two pairs x 15 degrees


def test_misalignment_prefers_aligned_candidate():
    # continuation quad aligned with the current flow beats the skewed one
    pos = np.array([
        [0, 0, 0],    # v0
        [0, -1, 0],   # v1
        [1, -1, 0],   # v2
        [1, 0, 0],    # v3
        [1.1, 1, 0],  # p
        [0.1, 1, 0],  # q
        [2.1, 0.9, 0],  # r
    ])
    aligned = (0, 3, 4, 5)
    skewed = (3, 6, 4, 0) if False else (0, 3, 6, 4)
    m_aligned = misalignment(pos, (0, 1, 2, 3), aligned, (0, 3))
    m_skewed = misalignment(pos, (0, 1, 2, 3), skewed, (0, 3))
    assert m_aligned < m_skewed


def test_merge_grid_consistent_diagonals_pure():
    g = syn.grid_patch(5, 4)
    qdm = merge_triangles(syn.triangulate(g, "fixed"))
    assert qdm.n_quads == 20
    assert qdm.n_triangles == 0
    assert qdm.purity == 1.0


def test_merge_cube_twelve_tris():
    cube = syn.cube_grid(1)
    qdm = merge_triangles(syn.triangulate(cube, "fixed"))
    assert qdm.n_quads == 6
    assert qdm.n_triangles == 0


def test_merge_single_triangle_unchanged():
    tri = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float),
                  np.array([[0, 1, 2]]))
    qdm = merge_triangles(tri)
    assert qdm.n_quads == 0
    assert qdm.n_triangles == 1
    assert qdm.faces == [[0, 1, 2]]


def test_merge_preserves_vertices_bytewise():
    g = syn.cylinder_grid(10, 4)
    tri = syn.triangulate(g, "random", seed=5)
    qdm = loop_shift(merge_triangles(tri))
    assert qdm.vertices.tobytes() == g.vertices.tobytes()
    # face coverage: triangulating the output reproduces the input face set
    out_tris = set()
    for f in qdm.faces:
        if len(f) == 3:
            out_tris.add(frozenset(f))
        else:
            a, b, c, d = f
            pair = qdm.quad_source[[i for i, q in enumerate(qdm.faces)
                                    if q == f][0]]
            for t in pair:
                out_tris.add(frozenset(map(int, tri.faces[t])))
    in_tris = {frozenset(map(int, t)) for t in tri.faces}
    assert out_tris == in_tris


def test_merge_deterministic():
    g = syn.torus_grid(10, 6)
    tri = syn.triangulate(g, "random", seed=9)
    a = merge_triangles(tri)
    b = merge_triangles(tri)
    assert a.pairs == b.pairs
    assert a.faces == b.faces


def parallelogram_strip(n=5, skew=0.45):
    """Open strip of parallelogram quads triangulated so that greedy
    merging pairs across the strip and leaves a dangling triangle."""
    bot = [[k + (k % 2) * 0.0, 0, 0] for k in range(n + 1)]
    top = [[k + skew, 1, 0] for k in range(n + 1)]
    verts = np.array(bot + top, dtype=float)
    tris = []
    for k in range(n):
        a, b = k, k + 1
        c, d = n + 1 + k, n + 2 + k
        tris += [[a, b, d], [a, d, c]]
    return TriMesh(verts, np.array(tris))


def test_loop_shift_absorbs_dangling_triangle():
    strip = parallelogram_strip(5)
    # a shifted-by-one pairing across quad boundaries dangles both ends
    pairs = [(2 * k, 2 * k + 3) for k in range(4)]
    qdm = QuadDominantMesh(strip, pairs)
    assert qdm.n_triangles == 2
    shifted = loop_shift(qdm)
    assert shifted.n_quads == qdm.n_quads + 1
    assert shifted.n_triangles == 0


def test_loop_shift_pure_mesh_unchanged():
    g = syn.grid_patch(4, 3)
    qdm = merge_triangles(syn.triangulate(g, "fixed"))
    shifted = loop_shift(qdm)
    assert sorted(map(tuple, map(sorted, shifted.pairs))) == \
        sorted(map(tuple, map(sorted, qdm.pairs)))


def test_loop_shift_rejects_worse_alignment():
    # a straight strip paired correctly except the ends: the only possible
    # shift keeps the count and cannot improve the score, so nothing moves
    strip = parallelogram_strip(4, skew=0.0)  # squares
    pairs = [(2 * k, 2 * k + 1) for k in range(4)]  # already optimal
    qdm = QuadDominantMesh(strip, pairs)
    out = loop_shift(qdm)
    assert sorted(out.pairs) == sorted(pairs)


def test_stats_and_quad_mesh_export():
    g = syn.grid_patch(3, 3)
    qdm = merge_triangles(syn.triangulate(g, "fixed"))
    stats = qdm.stats()
    assert stats["quads"] == 9
    assert stats["purity_percent"] == 100.0
    qm = qdm.to_quad_mesh()
    assert isinstance(qm, QuadMesh)
    assert qm.is_pure_quad
