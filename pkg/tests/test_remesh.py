import numpy as np
import pytest

from quadkit import geometry
from quadkit import synthetic as syn
from quadkit.loops import detect_sharp_edges
from quadkit.mesh import MeshError, TriMesh
from quadkit.remesh import _SegmentIndex, isotropic_remesh


def edge_lengths(mesh):
    return np.linalg.norm(mesh.vertices[mesh.edges[:, 0]]
                          - mesh.vertices[mesh.edges[:, 1]], axis=1)


def test_cube_features_preserved_at_002():
    cube = syn.cube_grid(2).to_tri_mesh()
    out = isotropic_remesh(cube, 0.02)
    assert out.is_edge_manifold()
    assert out.genus() == 0
    # re-detect sharp edges: all of them lie on the 12 cube edge lines, and
    # every line is still covered end to end
    sharp = detect_sharp_edges(out, 130.0)
    pts = out.vertices[out.edges[np.flatnonzero(sharp)]]
    on_line = np.sum(np.isclose(np.abs(pts), 1.0, atol=1e-9), axis=2) >= 2
    assert on_line.all()
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                        for sz in (-1, 1)], dtype=float)
    d = np.linalg.norm(out.vertices[:, None, :] - corners[None], axis=2)
    assert d.min(axis=0).max() < 1e-9  # all 8 corners survive exactly
    # each cube edge line is a connected polyline of sharp edges
    for axis in range(3):
        for sa in (-1, 1):
            for sb in (-1, 1):
                other = [k for k in range(3) if k != axis]
                mask = np.ones(len(pts), dtype=bool)
                mask &= np.all(np.isclose(pts[:, :, other[0]], sa), axis=1)
                mask &= np.all(np.isclose(pts[:, :, other[1]], sb), axis=1)
                cover = np.sort(pts[mask][:, :, axis].ravel())
                assert cover.min() == pytest.approx(-1)
                assert cover.max() == pytest.approx(1)


def test_uniform_sphere_near_fixpoint():
    base = isotropic_remesh(syn.cube_sphere(6).to_tri_mesh(), 0.05)
    own = float(np.mean(edge_lengths(base))
                / geometry.bbox_diagonal(base.vertices))
    out = isotropic_remesh(base, own)
    assert abs(out.n_faces - base.n_faces) <= 0.1 * base.n_faces


def test_elongated_box_edge_length_band():
    box = syn.box_grid(2, 1, 1, lo=(-2, -0.5, -0.5), hi=(2, 0.5, 0.5))
    out = isotropic_remesh(box.to_tri_mesh(), 0.05)
    ratio = edge_lengths(out) / (0.05 * geometry.bbox_diagonal(out.vertices))
    assert ratio.min() >= 0.5
    assert ratio.max() <= 1.5


def test_face_count_near_implied_target():
    mesh = syn.cube_sphere(6).to_tri_mesh()
    target = 0.04
    out = isotropic_remesh(mesh, target)
    length = target * geometry.bbox_diagonal(mesh.vertices)
    implied = mesh.face_areas().sum() / (np.sqrt(3) / 4 * length ** 2)
    assert abs(out.n_faces - implied) <= 0.3 * implied


def test_boundaries_preserved():
    cyl = syn.cylinder_grid(16, 8).to_tri_mesh()
    out = isotropic_remesh(cyl, 0.05)
    assert out.boundary_loop_count() == 2
    assert out.is_edge_manifold()
    # rim vertices stay on the original rim polygons (z = +-1, radius
    # between the 16-gon chord midpoint and the circumscribed circle)
    rim = out.vertices[out.boundary_vertex_mask()]
    assert np.allclose(np.abs(rim[:, 2]), 1.0, atol=1e-9)
    r = np.hypot(rim[:, 0], rim[:, 1])
    assert r.min() >= np.cos(np.pi / 16) - 1e-9
    assert r.max() <= 1.0 + 1e-9


def test_surface_distance_stays_small():
    mesh = syn.l_bracket(2).to_tri_mesh()
    out = isotropic_remesh(mesh, 0.04)
    from quadkit.accel import SurfaceIndex

    d, _, _ = SurfaceIndex(mesh.triangle_soup()).query(out.vertices)
    assert d.max() < 0.02 * geometry.bbox_diagonal(mesh.vertices)


def test_nonmanifold_rejected():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0],
                      [0, 0, 1]], dtype=float)
    fin = TriMesh(verts, np.array([[0, 1, 2], [0, 3, 1], [0, 1, 4]]))
    with pytest.raises(MeshError):
        isotropic_remesh(fin, 0.1)


def test_segment_index_projection():
    segs = np.array([[[0, 0, 0], [1, 0, 0]], [[0, 1, 0], [0, 2, 0]]],
                    dtype=float)
    idx = _SegmentIndex(segs)
    assert np.allclose(idx.project(np.array([0.5, 0.2, 0.0])), [0.5, 0, 0])
    assert np.allclose(idx.project(np.array([0.1, 1.5, 1.0])), [0, 1.5, 0])
    assert np.allclose(idx.project(np.array([2.0, -0.1, 0.0])), [1, 0, 0])
