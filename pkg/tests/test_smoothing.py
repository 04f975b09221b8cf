import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadkit.smoothing import (dirichlet_energy, knn_weights,
                               regularize_point_signal, taubin_operator_dense)


def sample_cloud(n=200, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (n, 3))
    normals = rng.normal(size=(n, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return pts, normals


def test_constant_signal_fixpoint():
    pts, normals = sample_cloud(300)
    z = np.full((300, 5), 3.7)
    out = regularize_point_signal(pts, normals, z)
    assert np.abs(out - z).max() < 1e-12


def test_affine_equivariance():
    pts, normals = sample_cloud(250, seed=1)
    rng = np.random.default_rng(2)
    z = rng.normal(size=(250, 3))
    a, c = 2.5, -1.2
    lhs = regularize_point_signal(pts, normals, a * z + c)
    rhs = a * regularize_point_signal(pts, normals, z) + c
    assert np.abs(lhs - rhs).max() < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_affine_equivariance_property(a, c):
    pts, normals = sample_cloud(120, seed=3)
    z = np.random.default_rng(4).normal(size=(120, 2))
    lhs = regularize_point_signal(pts, normals, a * z + c, k=16)
    rhs = a * regularize_point_signal(pts, normals, z, k=16) + c
    assert np.abs(lhs - rhs).max() < 1e-8


def test_matches_dense_operator_form():
    pts, normals = sample_cloud(400, seed=5)
    rng = np.random.default_rng(6)
    z = rng.normal(size=(400, 4))
    out = regularize_point_signal(pts, normals, z)
    dense = taubin_operator_dense(pts, normals)
    assert np.abs(out - dense @ z).max() < 1e-9


def test_white_noise_dirichlet_energy_decreases():
    # uniform grid of points with white-noise signal
    g = np.linspace(0, 1, 12)
    pts = np.array([[x, y, z] for x in g for y in g for z in (0.0, 0.1)])
    normals = np.tile([0.0, 0.0, 1.0], (len(pts), 1))
    rng = np.random.default_rng(7)
    z = rng.normal(size=(len(pts), 1))
    e0 = dirichlet_energy(pts, normals, z)
    out = regularize_point_signal(pts, normals, z)
    e1 = dirichlet_energy(pts, normals, out)
    assert e1 < e0


def test_duplicate_points_rejected():
    pts, normals = sample_cloud(100, seed=8)
    pts[41] = pts[7]
    with pytest.raises(ValueError, match="duplicate"):
        regularize_point_signal(pts, normals, np.zeros((100, 1)))


def test_requires_enough_points():
    pts, normals = sample_cloud(20, seed=9)
    with pytest.raises(ValueError):
        regularize_point_signal(pts, normals, np.zeros((20, 1)), k=32)


def test_shape_preserved_1d_and_3d():
    pts, normals = sample_cloud(150, seed=10)
    z1 = np.random.default_rng(1).normal(size=150)
    out1 = regularize_point_signal(pts, normals, z1, k=16)
    assert out1.shape == z1.shape
    z3 = np.random.default_rng(1).normal(size=(150, 3))
    out3 = regularize_point_signal(pts, normals, z3, k=16)
    assert out3.shape == z3.shape


def test_weights_row_normalized():
    pts, normals = sample_cloud(100, seed=11)
    idx, w = knn_weights(pts, normals, k=12)
    assert idx.shape == (100, 12)
    assert np.allclose(w.sum(axis=1), 1.0)
    assert np.all(w > 0)
