"""Procedural desk-corpus meshes used by tests, benchmarks and the docs.

All generators return consistently oriented, manifold meshes with exact
shared coordinates along seams (so exact-coordinate welding applies).
"""

import numpy as np

from .mesh import QuadMesh, TriMesh


def _weld(verts, faces):
    verts = np.asarray(verts, dtype=np.float64)
    uniq, inverse = np.unique(verts, axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    faces = [[int(inverse[i]) for i in f] for f in faces]
    return uniq, faces


def grid_patch(nx, ny, width=2.0, height=2.0, center=(0.0, 0.0, 0.0)):
    """Planar nx-by-ny quad grid on the XY plane."""
    cx, cy, cz = center
    xs = np.linspace(cx - width / 2, cx + width / 2, nx + 1)
    ys = np.linspace(cy - height / 2, cy + height / 2, ny + 1)
    verts = np.array([[x, y, cz] for y in ys for x in xs])
    vid = lambda i, j: j * (nx + 1) + i
    faces = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
             for j in range(ny) for i in range(nx)]
    return QuadMesh(verts, faces)


def _box_face_grid(axis, sign, n_u, n_v, lo, hi, verts, faces):
    """One box side as an outward-wound n_u x n_v grid."""
    au = (axis + 1) % 3
    av = (axis + 2) % 3
    us = np.linspace(lo[au], hi[au], n_u + 1)
    vs = np.linspace(lo[av], hi[av], n_v + 1)
    base = len(verts)
    for v in vs:
        for u in us:
            p = [0.0, 0.0, 0.0]
            p[axis] = hi[axis] if sign > 0 else lo[axis]
            p[au] = u
            p[av] = v
            verts.append(p)
    vid = lambda i, j: base + j * (n_u + 1) + i
    for j in range(n_v):
        for i in range(n_u):
            q = [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
            if sign < 0:
                q = q[::-1]
            faces.append(q)


def box_grid(nx, ny, nz, lo=(-1.0, -1.0, -1.0), hi=(1.0, 1.0, 1.0)):
    """Closed box with per-axis quad counts."""
    verts, faces = [], []
    counts = (nx, ny, nz)
    for axis in range(3):
        n_u = counts[(axis + 1) % 3]
        n_v = counts[(axis + 2) % 3]
        _box_face_grid(axis, +1, n_u, n_v, lo, hi, verts, faces)
        _box_face_grid(axis, -1, n_u, n_v, lo, hi, verts, faces)
    verts, faces = _weld(verts, faces)
    return QuadMesh(verts, faces)


def cube_grid(k=2):
    """Cube in [-1,1]^3 with k x k quads per side."""
    return box_grid(k, k, k)


def cube_sphere(k=4):
    """Unit sphere meshed by radially projecting a cube grid."""
    cube = cube_grid(k)
    v = cube.vertices
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    return QuadMesh(v, cube.faces)


def cylinder_grid(n_around=16, n_along=8, radius=1.0, height=2.0):
    """Open tube, closed circumferentially."""
    verts = []
    for j in range(n_along + 1):
        z = -height / 2 + height * j / n_along
        for i in range(n_around):
            a = 2.0 * np.pi * i / n_around
            verts.append([radius * np.cos(a), radius * np.sin(a), z])
    vid = lambda i, j: j * n_around + (i % n_around)
    faces = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
             for j in range(n_along) for i in range(n_around)]
    return QuadMesh(np.array(verts), faces)


def torus_grid(n_major=16, n_minor=8, big_radius=2.0, small_radius=0.8):
    verts = []
    for j in range(n_minor):
        b = 2.0 * np.pi * j / n_minor
        for i in range(n_major):
            a = 2.0 * np.pi * i / n_major
            r = big_radius + small_radius * np.cos(b)
            verts.append([r * np.cos(a), r * np.sin(a), small_radius * np.sin(b)])
    vid = lambda i, j: (j % n_minor) * n_major + (i % n_major)
    faces = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
             for j in range(n_minor) for i in range(n_major)]
    return QuadMesh(np.array(verts), faces)


def polycube_surface(cells, subdiv=2):
    """Boundary surface of a set of unit voxels, each square as a
    subdiv x subdiv grid."""
    cells = {tuple(c) for c in cells}
    offs = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    verts, faces = [], []
    s = subdiv
    for cell in sorted(cells):
        for axis in range(3):
            for sign in (+1, -1):
                nb = tuple(cell[k] + (sign if k == axis else 0) for k in range(3))
                if nb in cells:
                    continue
                lo = [float(c) for c in cell]
                hi = [float(c) + 1.0 for c in cell]
                if sign > 0:
                    lo[axis] = hi[axis]
                else:
                    hi[axis] = lo[axis]
                _box_face_grid(axis, sign, s, s,
                               [lo[0], lo[1], lo[2]], [hi[0], hi[1], hi[2]],
                               verts, faces)
    verts, faces = _weld(verts, faces)
    return QuadMesh(verts, faces)


def l_bracket(subdiv=2):
    return polycube_surface([(0, 0, 0), (1, 0, 0), (0, 1, 0)], subdiv)


def t_polycube(subdiv=2):
    return polycube_surface([(0, 0, 0), (1, 0, 0), (2, 0, 0), (1, 1, 0)], subdiv)


def plus_patch(k=3):
    """Open plus-shaped flat patch, five k x k cells."""
    cells = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
    verts, faces = [], []
    for cx, cy in cells:
        base = len(verts)
        for j in range(k + 1):
            for i in range(k + 1):
                verts.append([cx + i / k, cy + j / k, 0.0])
        vid = lambda i, j: base + j * (k + 1) + i
        for j in range(k):
            for i in range(k):
                faces.append([vid(i, j), vid(i + 1, j),
                              vid(i + 1, j + 1), vid(i, j + 1)])
    verts, faces = _weld(verts, faces)
    return QuadMesh(verts, faces)


def spiral_strip(n_quads=48, turns=2.5, radius=1.0, band=0.25, pitch=0.35):
    """Helical one-quad-wide band winding around a cylinder.

    Its lengthwise face-loop spirals (rotation index ~= ``turns``), making
    it the canonical non-simple specimen.
    """
    bottom, top = [], []
    for i in range(n_quads + 1):
        t = turns * 2.0 * np.pi * i / n_quads
        x, y = radius * np.cos(t), radius * np.sin(t)
        z = pitch * t / (2.0 * np.pi)
        bottom.append([x, y, z])
        top.append([x, y, z + band])
    verts = np.array(bottom + top)
    nb = n_quads + 1
    faces = [[i, i + 1, nb + i + 1, nb + i] for i in range(n_quads)]
    return QuadMesh(verts, faces)


def triangulate(mesh, mode="fixed", seed=0):
    """Triangulate a quad mesh by splitting each quad along a diagonal.

    ``mode='fixed'`` always cuts v0-v2; ``mode='random'`` picks the
    diagonal per quad with the seeded RNG. Vertices are reused unchanged.
    """
    rng = np.random.default_rng(seed)
    tris = []
    for poly in mesh.faces:
        if len(poly) == 3:
            tris.append(list(poly))
            continue
        if len(poly) != 4:
            raise ValueError("triangulate expects quads/triangles")
        flip = mode == "random" and rng.random() < 0.5
        a, b, c, d = poly
        if flip:
            tris += [[b, c, d], [b, d, a]]
        else:
            tris += [[a, b, c], [a, c, d]]
    return TriMesh(mesh.vertices.copy(), np.array(tris, dtype=np.int64))
