"""Low-level vector geometry shared by the mesh and field modules.

Everything here is stateless numpy: triangle quantities, closest-point
queries, best-fit planes, and area-weighted surface sampling.
"""

import numpy as np


def normalize_rows(v, eps=1e-300):
    """Return row-normalized copy of ``v`` (rows with ~zero norm become 0)."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(n > eps, v / np.where(n > 0, n, 1.0), 0.0)


def triangle_normals(tri):
    """Unnormalized normals (2x area vectors) of triangles ``tri`` (T,3,3)."""
    tri = np.asarray(tri, dtype=np.float64)
    return np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])


def triangle_areas(tri):
    return 0.5 * np.linalg.norm(triangle_normals(tri), axis=1)


def polygon_normal(pts):
    """Newell normal of a single 3D polygon (unnormalized)."""
    pts = np.asarray(pts, dtype=np.float64)
    nxt = np.roll(pts, -1, axis=0)
    return np.array([
        np.sum((pts[:, 1] - nxt[:, 1]) * (pts[:, 2] + nxt[:, 2])),
        np.sum((pts[:, 2] - nxt[:, 2]) * (pts[:, 0] + nxt[:, 0])),
        np.sum((pts[:, 0] - nxt[:, 0]) * (pts[:, 1] + nxt[:, 1])),
    ])


def quad_areas(quads):
    """Areas of quads (Q,4,3) using the fixed v0-v2 diagonal split.

    The split is deterministic so repeated runs report identical areas.
    """
    quads = np.asarray(quads, dtype=np.float64)
    a1 = triangle_areas(quads[:, [0, 1, 2]])
    a2 = triangle_areas(quads[:, [0, 2, 3]])
    return a1 + a2


def bbox(points):
    points = np.asarray(points, dtype=np.float64)
    return points.min(axis=0), points.max(axis=0)


def bbox_diagonal(points):
    lo, hi = bbox(points)
    return float(np.linalg.norm(hi - lo))


def angle_between(u, v, eps=1e-300):
    """Unsigned angle (radians) between rows of ``u`` and ``v``."""
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    dot = np.einsum("ij,ij->i", u, v)
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    ang = np.arctan2(cross, dot)
    ang = np.where((nu > eps) & (nv > eps), ang, 0.0)
    return ang if ang.size > 1 else float(ang[0])


def best_fit_plane(points):
    """Least-squares plane through ``points``.

    Returns (origin, normal, basis_u, basis_v) with the basis spanning the
    plane. Uses PCA; the normal is the direction of least variance.
    """
    pts = np.asarray(points, dtype=np.float64)
    origin = pts.mean(axis=0)
    q = pts - origin
    # SVD is stable for thin/degenerate clouds.
    _, _, vt = np.linalg.svd(q, full_matrices=False)
    if vt.shape[0] < 3:
        vt = np.vstack([vt, np.zeros((3 - vt.shape[0], 3))])
        for k in range(3):
            cand = np.zeros(3)
            cand[k] = 1.0
            if np.linalg.norm(np.cross(vt[0], cand)) > 1e-12:
                vt[1] = normalize_rows(np.cross(vt[0], cand)[None])[0]
                break
        vt[2] = np.cross(vt[0], vt[1])
    return origin, vt[2], vt[0], vt[1]


def closest_point_on_triangles(p, tri):
    """Closest points on triangles ``tri`` (N,3,3) from points ``p`` (N,3).

    Vectorized version of the standard region-based algorithm (Ericson,
    Real-Time Collision Detection).  Returns (points (N,3), sqdist (N,)).
    """
    p = np.asarray(p, dtype=np.float64)
    tri = np.asarray(tri, dtype=np.float64)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def assign(mask, value):
        m = mask & ~done
        out[m] = value[m] if value.ndim == 2 else value
        done[m] = True

    assign((d1 <= 0) & (d2 <= 0), a)                     # vertex a
    assign((d3 >= 0) & (d4 <= d3), b)                    # vertex b
    assign((d6 >= 0) & (d5 <= d6), c)                    # vertex c

    v = np.where(np.abs(d1 - d3) > 0, d1 / np.where(d1 - d3 != 0, d1 - d3, 1.0), 0.0)
    assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v[:, None] * ab)   # edge ab

    w = np.where(d2 - d6 != 0, d2 / np.where(d2 - d6 != 0, d2 - d6, 1.0), 0.0)
    assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w[:, None] * ac)   # edge ac

    denom_bc = (d4 - d3) + (d5 - d6)
    w2 = np.where(denom_bc != 0, (d4 - d3) / np.where(denom_bc != 0, denom_bc, 1.0), 0.0)
    assign((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + w2[:, None] * (c - b))

    tot = va + vb + vc
    tot = np.where(tot != 0, tot, 1.0)
    vbar = vb / tot
    wbar = vc / tot
    interior = a + vbar[:, None] * ab + wbar[:, None] * ac
    assign(np.ones(len(p), dtype=bool), interior)        # face interior

    d = p - out
    return out, np.einsum("ij,ij->i", d, d)


def sample_surface(tri_verts, n_samples, rng):
    """Area-weighted samples on a triangle soup (T,3,3).

    Returns (points (n,3), tri_ids (n,)). Sampling is deterministic given
    ``rng``; triangle pick uses the cumulative-area inverse CDF so the same
    seed yields the same points on any platform.
    """
    tri_verts = np.asarray(tri_verts, dtype=np.float64)
    areas = triangle_areas(tri_verts)
    total = areas.sum()
    if total <= 0:
        raise ValueError("surface has zero total area")
    cdf = np.cumsum(areas) / total
    u = rng.random(n_samples)
    tri_ids = np.searchsorted(cdf, u, side="left")
    tri_ids = np.clip(tri_ids, 0, len(areas) - 1)
    r1 = np.sqrt(rng.random(n_samples))
    r2 = rng.random(n_samples)
    t = tri_verts[tri_ids]
    pts = (
        (1.0 - r1)[:, None] * t[:, 0]
        + (r1 * (1.0 - r2))[:, None] * t[:, 1]
        + (r1 * r2)[:, None] * t[:, 2]
    )
    return pts, tri_ids
