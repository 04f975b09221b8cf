# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled closest-point-on-mesh kernel (BVH traversal).

Hot loop of field baking, Hausdorff sampling, and remesh projection.
The tree layout is produced by :mod:`quadkit.accel.bvh`.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


cdef inline double _clamp(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


cdef inline double _aabb_sqdist(const f64* p, const f64* lo, const f64* hi) nogil:
    cdef double d = 0.0, t
    cdef int k
    for k in range(3):
        t = p[k]
        if t < lo[k]:
            d += (lo[k] - t) * (lo[k] - t)
        elif t > hi[k]:
            d += (t - hi[k]) * (t - hi[k])
    return d


cdef double _tri_sqdist(const f64* p, const f64* a, const f64* b, const f64* c,
                        double* out) nogil:
    # Ericson, Real-Time Collision Detection, closest point on triangle.
    cdef double ab[3]
    cdef double ac[3]
    cdef double ap[3]
    cdef double bp[3]
    cdef double cp[3]
    cdef double d1, d2, d3, d4, d5, d6, va, vb, vc, v, w, denom
    cdef int k
    for k in range(3):
        ab[k] = b[k] - a[k]
        ac[k] = c[k] - a[k]
        ap[k] = p[k] - a[k]
    d1 = ab[0]*ap[0] + ab[1]*ap[1] + ab[2]*ap[2]
    d2 = ac[0]*ap[0] + ac[1]*ap[1] + ac[2]*ap[2]
    if d1 <= 0 and d2 <= 0:
        for k in range(3):
            out[k] = a[k]
        return (p[0]-a[0])**2 + (p[1]-a[1])**2 + (p[2]-a[2])**2
    for k in range(3):
        bp[k] = p[k] - b[k]
    d3 = ab[0]*bp[0] + ab[1]*bp[1] + ab[2]*bp[2]
    d4 = ac[0]*bp[0] + ac[1]*bp[1] + ac[2]*bp[2]
    if d3 >= 0 and d4 <= d3:
        for k in range(3):
            out[k] = b[k]
        return (p[0]-b[0])**2 + (p[1]-b[1])**2 + (p[2]-b[2])**2
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        for k in range(3):
            out[k] = a[k] + v * ab[k]
        return (p[0]-out[0])**2 + (p[1]-out[1])**2 + (p[2]-out[2])**2
    for k in range(3):
        cp[k] = p[k] - c[k]
    d5 = ab[0]*cp[0] + ab[1]*cp[1] + ab[2]*cp[2]
    d6 = ac[0]*cp[0] + ac[1]*cp[1] + ac[2]*cp[2]
    if d6 >= 0 and d5 <= d6:
        for k in range(3):
            out[k] = c[k]
        return (p[0]-c[0])**2 + (p[1]-c[1])**2 + (p[2]-c[2])**2
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        for k in range(3):
            out[k] = a[k] + w * ac[k]
        return (p[0]-out[0])**2 + (p[1]-out[1])**2 + (p[2]-out[2])**2
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        for k in range(3):
            out[k] = b[k] + w * (c[k] - b[k])
        return (p[0]-out[0])**2 + (p[1]-out[1])**2 + (p[2]-out[2])**2
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    for k in range(3):
        out[k] = a[k] + ab[k] * v + ac[k] * w
    return (p[0]-out[0])**2 + (p[1]-out[1])**2 + (p[2]-out[2])**2


def bvh_closest_points(cnp.ndarray[f64, ndim=2] points not None,
                       cnp.ndarray[f64, ndim=3] tri_verts not None,
                       cnp.ndarray[i64, ndim=1] order not None,
                       cnp.ndarray[f64, ndim=2] node_min not None,
                       cnp.ndarray[f64, ndim=2] node_max not None,
                       cnp.ndarray[i64, ndim=1] node_left not None,
                       cnp.ndarray[i64, ndim=1] node_right not None,
                       cnp.ndarray[i64, ndim=1] node_start not None,
                       cnp.ndarray[i64, ndim=1] node_count not None):
    """Closest point on the soup for every query point.

    Returns (dist, closest (Q,3), tri_id (Q,)); exact distance ties resolve
    to the lowest triangle id so results are traversal-order independent.
    """
    cdef Py_ssize_t nq = points.shape[0]
    cdef cnp.ndarray[f64, ndim=1] dist = np.empty(nq, dtype=np.float64)
    cdef cnp.ndarray[f64, ndim=2] closest = np.empty((nq, 3), dtype=np.float64)
    cdef cnp.ndarray[i64, ndim=1] tri_id = np.empty(nq, dtype=np.int64)

    cdef i64 stack[128]
    cdef int sp
    cdef Py_ssize_t qi
    cdef i64 ni, left, right, s, cnt, t, tid, best_id
    cdef double best, d2, dl, dr
    cdef double cp[3]
    cdef double bp[3]
    cdef const f64* p
    cdef const f64* tv = &tri_verts[0, 0, 0]
    cdef const i64* ordr = &order[0]

    with nogil:
        for qi in range(nq):
            p = &points[qi, 0]
            best = 1e300
            best_id = -1
            sp = 0
            stack[sp] = 0
            sp += 1
            while sp > 0:
                sp -= 1
                ni = stack[sp]
                if _aabb_sqdist(p, &node_min[ni, 0], &node_max[ni, 0]) > best:
                    continue
                left = node_left[ni]
                if left < 0:
                    s = node_start[ni]
                    cnt = node_count[ni]
                    for t in range(s, s + cnt):
                        tid = ordr[t]
                        d2 = _tri_sqdist(p, tv + 9 * tid, tv + 9 * tid + 3,
                                         tv + 9 * tid + 6, cp)
                        if d2 < best or (d2 == best and tid < best_id):
                            best = d2
                            best_id = tid
                            bp[0] = cp[0]
                            bp[1] = cp[1]
                            bp[2] = cp[2]
                else:
                    right = node_right[ni]
                    dl = _aabb_sqdist(p, &node_min[left, 0], &node_max[left, 0])
                    dr = _aabb_sqdist(p, &node_min[right, 0], &node_max[right, 0])
                    # push the farther child first so the nearer is visited next
                    if dl <= dr:
                        if dr <= best:
                            stack[sp] = right
                            sp += 1
                        stack[sp] = left
                        sp += 1
                    else:
                        if dl <= best:
                            stack[sp] = left
                            sp += 1
                        stack[sp] = right
                        sp += 1
            dist[qi] = best ** 0.5
            tri_id[qi] = best_id
            closest[qi, 0] = bp[0]
            closest[qi, 1] = bp[1]
            closest[qi, 2] = bp[2]
    return dist, closest, tri_id
