import numpy as np
import pytest

from quadkit import synthetic as syn
from quadkit.mesh import (MeshError, NonManifoldError, QuadMesh, TriMesh,
                          load_mesh, parse_obj, save_obj, save_ply)

CUBE_QUAD_OBJ = """
v -1 -1 -1
v 1 -1 -1
v 1 1 -1
v -1 1 -1
v -1 -1 1
v 1 -1 1
v 1 1 1
v -1 1 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
"""

CUBE_TRI_OBJ = """
v -1 -1 -1
v 1 -1 -1
v 1 1 -1
v -1 1 -1
v -1 -1 1
v 1 -1 1
v 1 1 1
v -1 1 1
f 1 4 3
f 1 3 2
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""

FIN_OBJ = """
v 0 0 0
v 1 0 0
v 0 1 0
v 0 -1 0
v 0 0 1
f 1 2 3
f 1 4 2
f 1 2 5
"""


def test_load_quad_cube(tmp_path):
    p = tmp_path / "cube.obj"
    p.write_text(CUBE_QUAD_OBJ)
    m = load_mesh(p)
    assert isinstance(m, QuadMesh)
    assert m.n_vertices == 8
    assert m.n_faces == 6
    assert m.is_pure_quad
    assert m.n_edges == 12
    assert m.boundary_loop_count() == 0
    assert m.genus() == 0


def test_load_tri_cube(tmp_path):
    p = tmp_path / "cube.obj"
    p.write_text(CUBE_TRI_OBJ)
    m = load_mesh(p)
    assert isinstance(m, TriMesh)
    assert m.n_faces == 12
    assert m.is_edge_manifold()


def test_fin_reports_nonmanifold_edge(tmp_path):
    p = tmp_path / "fin.obj"
    p.write_text(FIN_OBJ)
    with pytest.raises(NonManifoldError) as err:
        load_mesh(p)
    assert (0, 1) in [tuple(sorted(e)) for e in err.value.edges]
    # diagnostic mode still returns the raw data
    verts, faces, report = load_mesh(p, diagnostic=True)
    assert len(faces) == 3
    assert report["nonmanifold_edges"]


def test_exact_dedup_and_degenerate_cleaning(tmp_path):
    text = """
v 0 0 0
v 1 0 0
v 1 1 0
v 0 0 0
v 0 1 0
f 1 2 3
f 1 3 5
f 1 2 2
"""
    p = tmp_path / "m.obj"
    p.write_text(text)
    m = load_mesh(p)
    assert m.n_vertices == 4  # exact duplicate welded
    assert m.n_faces == 2     # degenerate face dropped
    assert m.load_report["duplicate_vertices"] == 1
    assert m.load_report["degenerate_faces"] == 1


def test_obj_roundtrip_with_feature_lines(tmp_path):
    m = syn.cube_grid(2)
    m.feature_edge[:4] = True
    p = tmp_path / "out.obj"
    save_obj(p, m)
    m2 = load_mesh(p)
    assert m2.n_faces == m.n_faces
    assert m2.feature_edge.sum() == 4
    assert np.allclose(np.sort(m2.vertices, axis=0),
                       np.sort(m.vertices, axis=0))


def test_ply_writer_roundtrip(tmp_path):
    m = syn.grid_patch(2, 2)
    colors = np.zeros((m.n_vertices, 3), dtype=np.uint8)
    colors[:, 0] = 255
    p = tmp_path / "c.ply"
    save_ply(p, m.vertices, m.faces, colors)
    m2 = load_mesh(p)
    assert m2.n_faces == 4


def test_halfedge_invariants():
    m = syn.torus_grid(8, 6)
    # twin(twin(h)) = h on interior half-edges
    for h in range(len(m.h_org)):
        t = m.h_twin[h]
        if t >= 0:
            assert m.h_twin[t] == h
    # next^4 is identity on pure quads
    h = np.arange(len(m.h_org))
    n4 = m.h_next[m.h_next[m.h_next[m.h_next[h]]]]
    assert np.array_equal(n4, h)


def test_vertex_valence_and_boundary():
    m = syn.grid_patch(4, 3)
    corners = [v for v in range(m.n_vertices)
               if m.vertex_on_boundary[v] and m.vertex_valence[v] == 2]
    assert len(corners) == 4
    interior = ~m.vertex_on_boundary
    assert np.all(m.vertex_valence[interior] == 4)


def test_inconsistent_orientation_rejected():
    verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                      [2, 0, 0], [2, 1, 0]], dtype=float)
    faces = [[0, 1, 2, 3], [1, 4, 5, 2][::-1]]  # second face flipped
    with pytest.raises(NonManifoldError):
        QuadMesh(verts, faces)


def test_negative_obj_indices():
    verts, faces, _ = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
    assert faces == [[0, 1, 2]]
