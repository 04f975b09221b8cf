import os
import subprocess
import sys

import numpy as np
import pytest

from quadkit.accel import SurfaceIndex, backend_name
from quadkit.accel.bvh import PythonClosestPoint, build_bvh
from quadkit.geometry import closest_point_on_triangles


def random_soup(n, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, 3, 3))


def brute_force(points, tris):
    """Oracle: exact distance to every triangle, lowest-id tie-break."""
    best_d = np.full(len(points), np.inf)
    best_i = np.full(len(points), -1, dtype=np.int64)
    best_p = np.zeros((len(points), 3))
    for t in range(len(tris)):
        cp, d2 = closest_point_on_triangles(points, np.repeat(tris[t][None],
                                                              len(points), 0))
        better = d2 < best_d
        best_d[better] = d2[better]
        best_i[better] = t
        best_p[better] = cp[better]
    return np.sqrt(best_d), best_p, best_i


def test_surface_index_matches_bruteforce():
    tris = random_soup(120, 1)
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(400, 3)) * 1.5
    d, cp, ti = SurfaceIndex(tris).query(pts)
    d0, cp0, ti0 = brute_force(pts, tris)
    assert np.allclose(d, d0, atol=1e-12)
    assert np.allclose(cp, cp0, atol=1e-9)
    # distances at tied ids can differ only by float noise
    mismatch = ti != ti0
    assert np.allclose(d[mismatch], d0[mismatch], atol=1e-12)


def test_python_fallback_matches_bruteforce():
    tris = random_soup(90, 3)
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(300, 3))
    d, cp, ti = PythonClosestPoint(tris).query(pts)
    d0, cp0, ti0 = brute_force(pts, tris)
    assert np.allclose(d, d0, atol=1e-12)
    assert np.allclose(cp, cp0, atol=1e-9)


def test_backends_agree_bitwise():
    if backend_name() != "native":
        pytest.skip("compiled backend not built")
    tris = random_soup(200, 5)
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(500, 3)) * 2
    dn, cpn, tin = SurfaceIndex(tris).query(pts)
    dp, cpp, tip = PythonClosestPoint(tris).query(pts)
    assert np.allclose(dn, dp, atol=1e-12)
    assert np.array_equal(tin, tip)


def test_env_var_forces_fallback():
    code = ("import quadkit.accel as a; print(a.backend_name())")
    env = dict(os.environ, QUADKIT_NO_NATIVE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_single_triangle_and_on_surface_points():
    tris = np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], dtype=float)
    idx = SurfaceIndex(tris)
    d, cp, ti = idx.query(np.array([[0.2, 0.2, 0.0], [0.2, 0.2, 1.0],
                                    [2.0, 2.0, 0.0]]))
    assert d[0] == pytest.approx(0.0, abs=1e-15)
    assert d[1] == pytest.approx(1.0)
    assert d[2] == pytest.approx(np.hypot(1.5, 1.5))
    assert np.allclose(cp[2], [0.5, 0.5, 0.0])


def test_bvh_build_shapes():
    tris = random_soup(64, 7)
    tree = build_bvh(tris)
    assert len(tree["order"]) == 64
    assert sorted(tree["order"].tolist()) == list(range(64))
    leaves = tree["node_left"] < 0
    assert tree["node_count"][leaves].sum() == 64
