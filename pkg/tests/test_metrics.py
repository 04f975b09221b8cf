import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from quadkit import synthetic as syn
from quadkit.loops import EdgeLoop, FaceLoop, enumerate_face_loops
from quadkit.mesh import QuadMesh
from quadkit.metrics import (LoopMeasure, hausdorff, loop_simplicity,
                             measure_loop, polyline_rotation_index,
                             rotation_index, scaled_jacobian,
                             self_intersection_count)


# -- self intersections ------------------------------------------------------

def test_si_open_grid_row_zero():
    m = syn.grid_patch(5, 3)
    loop = enumerate_face_loops(m)[0]
    assert self_intersection_count(loop) == 0


def test_si_closed_cylinder_loop_zero():
    m = syn.cylinder_grid(8, 3)
    for loop in enumerate_face_loops(m):
        if loop.closed:
            assert self_intersection_count(loop) == 0
            break
    else:
        pytest.fail("no closed loop found")


def test_si_constructed_repeats_brute_force():
    # strip revisiting one face twice; oracle = occurrences minus distinct
    faces = [3, 4, 5, 6, 4, 7]
    loop = FaceLoop(faces, list(range(len(faces) + 1)), False)
    assert self_intersection_count(loop) == len(faces) - len(set(faces)) == 1
    vloop = EdgeLoop([0, 1, 2, 3, 4], [10, 11, 12, 11, 13, 14], False)
    assert self_intersection_count(vloop) == 1
    closed = EdgeLoop([0, 1, 2, 3], [5, 6, 7, 8], True)
    assert self_intersection_count(closed) == 0  # closure vertex not a repeat


# -- rotation index ----------------------------------------------------------

def test_rotation_index_circle():
    t = np.linspace(0, 2 * np.pi, 65)[:-1]
    pts = np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=1)
    assert abs(polyline_rotation_index(pts, closed=True) - 1.0) <= 1e-6


def test_rotation_index_straight_line():
    t = np.linspace(0, 5, 40)
    pts = np.stack([t, 0.3 * t, -t], axis=1)  # off-axis straight line
    assert polyline_rotation_index(pts, closed=False) == 0.0


def spiral_total_curvature(a, b, t0, t1):
    """Total curvature of r = a + b*theta via numeric quadrature."""
    def integrand(t):
        r = a + b * t
        return (r * r + 2 * b * b) / (r * r + b * b)

    val, _ = quad(integrand, t0, t1, limit=200)
    return val / (2 * np.pi)


def test_rotation_index_spiral_vs_quadrature():
    a, b = 2.0, 0.15
    t0, t1 = 0.0, 5 * np.pi  # 2.5 turns
    t = np.linspace(t0, t1, 600)
    r = a + b * t
    pts = np.stack([r * np.cos(t), r * np.sin(t), np.zeros_like(t)], axis=1)
    ind = polyline_rotation_index(pts, closed=False)
    oracle = spiral_total_curvature(a, b, t0, t1)
    assert abs(ind - oracle) <= 0.01
    assert abs(ind - 2.5) <= 0.05


def test_rotation_index_reversal_invariant_spiral():
    t = np.linspace(0, 4 * np.pi, 200)
    pts = np.stack([(1 + 0.2 * t) * np.cos(t), (1 + 0.2 * t) * np.sin(t),
                    0.05 * t], axis=1)
    f = polyline_rotation_index(pts, closed=False)
    b = polyline_rotation_index(pts[::-1], closed=False)
    assert abs(f - b) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
                min_size=4, max_size=24, unique=True),
       st.booleans())
def test_rotation_index_reversal_property(points2d, closed):
    from hypothesis import assume

    pts = np.array([[x, y, 0.1 * x - 0.2 * y] for x, y in points2d])
    seg = np.diff(np.vstack([pts, pts[:1]]) if closed else pts, axis=0)
    assume(np.all(np.linalg.norm(seg, axis=1) > 1e-9))
    # a turn of exactly pi has an ambiguous sign; real loops never reverse
    pairs = zip(seg, np.roll(seg, -1, axis=0)) if closed \
        else zip(seg[:-1], seg[1:])
    for a, b in pairs:
        ang = np.arctan2(np.linalg.norm(np.cross(a, b)), a @ b)
        assume(abs(np.pi - ang) > 1e-3)
    f = polyline_rotation_index(pts, closed=closed)
    r = polyline_rotation_index(pts[::-1], closed=closed)
    assert f == pytest.approx(r, abs=1e-9)


def test_rotation_index_degenerate_collinear():
    pts = np.array([[0, 0, 0], [1, 1e-12, 0], [2, 0, 0], [3, 1e-12, 0]])
    assert polyline_rotation_index(pts, closed=False) == 0.0


def test_rotation_index_absolute_mode_flag():
    # an S-shaped curve: signed turning cancels, absolute accumulates
    t = np.linspace(0, np.pi, 50)
    left = np.stack([np.cos(t - np.pi / 2), 1 + np.sin(t - np.pi / 2),
                     np.zeros_like(t)], axis=1)
    right = np.stack([np.cos(t + np.pi / 2)[::-1] + 0,
                      -1 + np.sin(t + np.pi / 2)[::-1],
                      np.zeros_like(t)], axis=1)
    pts = np.vstack([left, right[1:]])
    signed = polyline_rotation_index(pts, closed=False, signed=True)
    absolute = polyline_rotation_index(pts, closed=False, signed=False)
    assert signed < 0.2
    assert absolute > 0.8


# -- loop simplicity ---------------------------------------------------------

def test_grid_simplicity_exact_one():
    rep = loop_simplicity(syn.grid_patch(6, 4))
    assert rep.s_fl == 1.0 and rep.s_el == 1.0 and rep.s_l == 1.0


def test_cube_simplicity_exact_one():
    rep = loop_simplicity(syn.cube_grid(2))
    assert rep.s_l == 1.0


def test_spiral_strip_against_bruteforce_classification():
    m = syn.spiral_strip(n_quads=48, turns=2.5)
    rep = loop_simplicity(m)
    # oracle: classify every loop independently and recompute the ratios
    areas = m.face_areas()
    from quadkit.loops import enumerate_edge_loops

    num = den = 0.0
    for loop in enumerate_face_loops(m):
        meas = measure_loop(loop, m)
        simple = (self_intersection_count(loop) == 0
                  and rotation_index(loop, m) <= 1.0 + 1e-9)
        assert simple == meas.is_simple
        term = sum(areas[f] for f in loop.faces)
        den += term
        num += term if simple else 0.0
    assert rep.s_fl == pytest.approx(num / den)
    # the lengthwise loop spirals: its area share is excluded
    assert rep.s_fl == pytest.approx(0.5)
    long_loop = max(enumerate_face_loops(m), key=len)
    assert rotation_index(long_loop, m) > 2.0


def test_simplicity_rigid_scale_invariance():
    m = syn.l_bracket(2)
    rep0 = loop_simplicity(m)
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    v2 = 2.37 * (m.vertices @ q.T) + np.array([0.3, -1.2, 0.7])
    rep1 = loop_simplicity(QuadMesh(v2, m.faces))
    assert rep1.s_fl == pytest.approx(rep0.s_fl, abs=1e-9)
    assert rep1.s_el == pytest.approx(rep0.s_el, abs=1e-9)


def test_simplicity_monotone_dilution():
    spiral = syn.spiral_strip(24, 2.2)
    rep0 = loop_simplicity(spiral)
    grid = syn.grid_patch(6, 6, center=(50.0, 0.0, 0.0))
    verts = np.vstack([spiral.vertices, grid.vertices])
    faces = [list(f) for f in spiral.faces] + \
            [[i + spiral.n_vertices for i in f] for f in grid.faces]
    rep1 = loop_simplicity(QuadMesh(verts, faces))
    assert rep1.s_fl >= rep0.s_fl
    assert rep1.s_el >= rep0.s_el


def test_quad_dominant_simplicity_uses_quad_subset():
    m = syn.grid_patch(3, 3)
    a, b, c, d = m.faces[-1]
    faces = [list(f) for f in m.faces[:-1]] + [[a, b, c], [a, c, d]]
    mixed = QuadMesh(m.vertices, faces)
    assert not mixed.is_pure_quad
    rep = loop_simplicity(mixed)
    assert 0.0 <= rep.s_l <= 1.0


# -- scaled jacobian ---------------------------------------------------------

def test_scaled_jacobian_unit_square():
    m = syn.grid_patch(1, 1)
    sj = scaled_jacobian(m)
    assert sj["min"] == pytest.approx(1.0)
    assert sj["mean"] == pytest.approx(1.0)


def test_scaled_jacobian_30_degree_corner():
    d = np.radians(30.0)
    verts = np.array([[0, 0, 0], [1, 0, 0],
                      [1 + np.cos(d), np.sin(d), 0], [np.cos(d), np.sin(d), 0]])
    m = QuadMesh(verts, [[0, 1, 2, 3]])
    assert scaled_jacobian(m)["min"] == pytest.approx(0.5, abs=1e-9)


def test_scaled_jacobian_random_quad_matches_cornerwise():
    rng = np.random.default_rng(11)
    base = np.array([[0, 0], [1, 0], [1.3, 1.1], [-0.2, 0.9]])
    pts = np.column_stack([base + rng.normal(0, 0.05, (4, 2)), np.zeros(4)])
    m = QuadMesh(pts, [[0, 1, 2, 3]])
    val = scaled_jacobian(m)["per_face"][0]
    # independent corner-wise evaluation in the plane
    expected = 1.0
    for i in range(4):
        e1 = pts[(i + 1) % 4] - pts[i]
        e2 = pts[(i - 1) % 4] - pts[i]
        s = (e1[0] * e2[1] - e1[1] * e2[0]) \
            / (np.linalg.norm(e1) * np.linalg.norm(e2))
        expected = min(expected, s)
    assert val == pytest.approx(expected, abs=1e-12)


def test_scaled_jacobian_zero_edge_flagged():
    verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    m = syn.grid_patch(1, 1)
    m2 = QuadMesh(np.vstack([verts, verts[0]]), [[0, 1, 2, 3]])
    # duplicate position but distinct index: build a quad with a zero edge
    dup = QuadMesh(np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0], [1, 1, 0]]),
                   [[0, 1, 2, 3]])
    sj = scaled_jacobian(dup)
    assert sj["per_face"][0] == -1.0
    assert sj["flagged"] == [0]


# -- hausdorff ---------------------------------------------------------------

def test_hausdorff_self_zero():
    m = syn.cube_sphere(4)
    assert hausdorff(m, m, samples=5000)["distance"] <= 1e-12


def test_hausdorff_scaled_sphere_percent():
    a = syn.cube_sphere(6)
    b = QuadMesh(a.vertices * 1.01, a.faces)
    h = hausdorff(a, b, samples=20000)
    # analytic radial offset of 0.01 on the unit sphere reads as 1.0 percent
    assert h["percent"] == pytest.approx(1.0, abs=0.1)


def test_hausdorff_symmetric_max_property():
    a = syn.cube_sphere(4)
    v = a.vertices.copy()
    k = int(np.argmax(v[:, 2]))
    v[k] *= 1.3  # spike
    b = QuadMesh(v, a.faces)
    h = hausdorff(a, b, samples=8000)
    assert h["distance"] >= h["a_to_b"] - 1e-15
    assert h["distance"] >= h["b_to_a"] - 1e-15
    assert h["distance"] == pytest.approx(max(h["a_to_b"], h["b_to_a"]))
