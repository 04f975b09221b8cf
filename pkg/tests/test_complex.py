import numpy as np
import pytest

from quadkit import synthetic as syn
from quadkit.basecomplex import build_base_complex, topology_report
from quadkit.loops import detect_sharp_edges, enumerate_edge_loops, irregular_vertices
from quadkit.mesh import MeshError


def test_grid_single_chart():
    bc = build_base_complex(syn.grid_patch(7, 3))
    assert bc.n_charts == 1
    assert not bc.inserted_loops
    chart = bc.charts[0]
    assert {chart.m, chart.n} == {7, 3}


def test_cube_six_charts_separatrices_on_cube_edges():
    m = syn.cube_grid(2)
    bc = build_base_complex(m)
    assert bc.n_charts == 6
    assert all((c.m, c.n) == (2, 2) for c in bc.charts)
    # hand enumeration: the separatrix edges are exactly the cube edge lines
    cut_pts = m.vertices[np.array(
        [m.edge_vertices(e) for e in np.flatnonzero(bc.cut_edges)])]
    on_cube_edge = np.sum(np.isclose(np.abs(cut_pts), 1.0), axis=2) >= 2
    assert on_cube_edge.all()
    assert bc.cut_edges.sum() == 24  # 12 cube edges, 2 mesh edges each


def test_torus_insertion_yields_single_chart():
    m = syn.torus_grid(16, 10)
    bc = build_base_complex(m)
    assert bc.n_charts == 1
    assert len(bc.inserted_loops) == 2
    c = bc.charts[0]
    assert {c.m, c.n} == {16, 10}
    # the two inserted loops are transversal: one per direction
    lens = sorted(len(l.edges) for l in bc.inserted_loops)
    assert lens == [10, 16]


def test_cylinder_annulus_cut_open():
    m = syn.cylinder_grid(16, 5)
    bc = build_base_complex(m)
    assert bc.n_charts == 1
    assert len(bc.inserted_loops) == 1
    assert not bc.inserted_loops[0].closed  # cut runs rim to rim


def test_charts_partition_faces(corpus):
    for name, m in corpus:
        bc = build_base_complex(m)
        seen = np.zeros(m.n_faces, dtype=int)
        total = 0
        for chart in bc.charts:
            assert chart.m * chart.n == chart.n_faces
            total += chart.n_faces
            for f in chart.faces:
                seen[f] += 1
        assert np.all(seen == 1), name
        assert total == m.n_faces, name


def test_separatrix_endpoints_irregular_or_boundary(corpus):
    for name, m in corpus:
        bc = build_base_complex(m)
        val = m.vertex_valence
        bnd = m.vertex_on_boundary
        for loop in bc.separatrices:
            if loop.closed:
                continue  # sharp feature loops may be closed
            for v in (loop.vertices[0], loop.vertices[-1]):
                irregular = (val[v] != 3) if bnd[v] else (val[v] != 4)
                assert irregular or bnd[v], name


def test_interior_cut_edges_border_two_charts(corpus):
    for name, m in corpus:
        bc = build_base_complex(m)
        for e in np.flatnonzero(bc.cut_edges):
            f0, f1 = m.edge_faces(e)
            if f1 < 0:
                continue
            a, b = bc.chart_of_face[f0], bc.chart_of_face[f1]
            assert a >= 0 and b >= 0, name


def test_chart_grid_consistency():
    bc = build_base_complex(syn.l_bracket(2))
    m = bc.mesh
    for chart in bc.charts:
        fg = chart.face_grid
        vg = chart.vertex_grid
        for i in range(chart.m):
            for j in range(chart.n):
                poly = set(m.faces[fg[i, j]])
                corners = {int(vg[i, j]), int(vg[i + 1, j]),
                           int(vg[i + 1, j + 1]), int(vg[i, j + 1])}
                assert poly == corners


def test_extra_separatrices_split_grid():
    m = syn.grid_patch(4, 4)
    interior = [l for l in enumerate_edge_loops(m)
                if not any(m.edge_is_boundary(e) for e in l.edges)]
    bc = build_base_complex(m, extra_separatrices=[interior[0].edges])
    assert bc.n_charts == 2


def test_sharp_loops_added_as_separatrices():
    # a coarse torus has dihedral angles below 130 degrees around the tube;
    # those loops must become chart boundaries
    m = syn.torus_grid(12, 6)
    sharp = detect_sharp_edges(m, 130.0)
    assert sharp.any()
    bc = build_base_complex(m)
    assert np.all(bc.cut_edges[sharp])


def test_topology_report_keys():
    m = syn.cylinder_grid(8, 4)
    rep = topology_report(m)
    assert rep["vertices"] == m.n_vertices
    assert rep["faces"] == 32
    assert rep["boundaries"] == 2
    assert rep["genus"] == 0
    assert rep["N_c"] == 1
    assert rep["N_I"] == 0


def test_non_quad_mesh_rejected():
    tri = syn.triangulate(syn.grid_patch(2, 2))
    with pytest.raises(MeshError):
        build_base_complex(tri)
