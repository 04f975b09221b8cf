import numpy as np
import pytest

from quadkit import synthetic as syn
from quadkit.config import PipelineConfig


def desk_corpus():
    """The ten-mesh desk corpus used by the round-trip suites."""
    return [
        ("grid", syn.grid_patch(8, 8)),
        ("cube22", syn.cube_grid(2)),
        ("cube44", syn.cube_grid(4)),
        ("cylinder", syn.cylinder_grid(16, 8)),
        ("torus", syn.torus_grid(16, 10)),
        ("cube_sphere", syn.cube_sphere(4)),
        ("l_bracket", syn.l_bracket(2)),
        ("plus", syn.plus_patch(3)),
        ("t_polycube", syn.t_polycube(2)),
        ("box211", syn.box_grid(4, 2, 2, lo=(-2, -1, -1), hi=(2, 1, 1))),
    ]


@pytest.fixture(scope="session")
def corpus():
    return desk_corpus()


@pytest.fixture()
def cfg():
    return PipelineConfig()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0)


def icosphere(subdivisions=2):
    """Icosahedron subdivided and projected to the unit sphere."""
    phi = (1 + 5 ** 0.5) / 2
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    for _ in range(subdivisions):
        verts = list(verts)
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = 0.5 * (np.asarray(verts[a]) + np.asarray(verts[b]))
                m /= np.linalg.norm(m)
                verts.append(m)
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
        verts = np.array(verts)
    from quadkit.mesh import TriMesh

    return TriMesh(np.asarray(verts), np.array(faces, dtype=np.int64))
