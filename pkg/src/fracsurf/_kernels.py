"""Compiled kernels for line/mesh intersection and convex slab clipping.

The BVH is a flat array layout built once in Python; traversal runs in
numba with ``nogil`` so callers may fan out over threads.
"""

import numpy as np
from numba import njit

HIT_OK = 0
HIT_TANGENT = 1
HIT_EDGE = 2

MAX_HITS = 48
_LEAF_SIZE = 4


def build_bvh(tri_min, tri_max):
    """Median-split AABB tree over triangle boxes.

    Returns ``(node_lo, node_hi, node_left, node_right, node_start,
    node_count, order)``. Leaves have ``node_left == -1`` and cover
    ``order[start:start + count]``.
    """
    n = tri_min.shape[0]
    centers = 0.5 * (tri_min + tri_max)
    order = np.arange(n, dtype=np.int64)
    lo, hi, left, right, start, count = [], [], [], [], [], []

    stack = [(0, n, -1, 0)]
    while stack:
        s, e, parent, side = stack.pop()
        idx = len(lo)
        if parent >= 0:
            if side == 0:
                left[parent] = idx
            else:
                right[parent] = idx
        ids = order[s:e]
        lo.append(tri_min[ids].min(axis=0))
        hi.append(tri_max[ids].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        if e - s <= _LEAF_SIZE:
            continue
        c = centers[ids]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        perm = np.argsort(c[:, axis], kind="stable")
        order[s:e] = ids[perm]
        mid = s + (e - s) // 2
        stack.append((mid, e, idx, 1))
        stack.append((s, mid, idx, 0))

    return (np.array(lo), np.array(hi), np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64), np.array(start, dtype=np.int64),
            np.array(count, dtype=np.int64), order)


@njit(cache=True, nogil=True)
def _slab(o, d, lo, hi, t0, t1):
    for k in range(3):
        if d[k] != 0.0:
            inv = 1.0 / d[k]
            a = (lo[k] - o[k]) * inv
            b = (hi[k] - o[k]) * inv
            if a > b:
                a, b = b, a
            if a > t0:
                t0 = a
            if b < t1:
                t1 = b
            if t0 > t1:
                return False
        elif o[k] < lo[k] or o[k] > hi[k]:
            return False
    return True


@njit(cache=True, nogil=True)
def mesh_line_hits(origins, dirs, tmin, tmax, verts, tris, normals,
                   node_lo, node_hi, node_left, node_right, node_start,
                   node_count, order, tol_tangent, tol_hit, pad):
    """All intersections of lines ``o + t d`` (``tmin <= t <= tmax``) with a mesh.

    Hits within ``tol_hit`` of a triangle edge are flagged ``HIT_EDGE``;
    hits with ``|d.n| < tol_tangent |d|`` are flagged ``HIT_TANGENT``.
    Output arrays are padded to ``MAX_HITS`` columns; ``count[i] == -1``
    signals overflow.
    """
    n = origins.shape[0]
    taus = np.full((n, MAX_HITS), np.nan)
    flags = np.zeros((n, MAX_HITS), dtype=np.int8)
    counts = np.zeros(n, dtype=np.int64)
    stack = np.empty(128, dtype=np.int64)
    for i in range(n):
        o = origins[i]
        d = dirs[i]
        dn = np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        lo_t = tmin[i] - pad
        hi_t = tmax[i] + pad
        top = 0
        stack[0] = 0
        top = 1
        c = 0
        while top > 0:
            top -= 1
            node = stack[top]
            if not _slab(o, d, node_lo[node], node_hi[node], lo_t, hi_t):
                continue
            if node_left[node] < 0:
                for j in range(node_start[node], node_start[node] + node_count[node]):
                    f = order[j]
                    a = verts[tris[f, 0]]
                    b = verts[tris[f, 1]]
                    cc = verts[tris[f, 2]]
                    e1 = b - a
                    e2 = cc - a
                    p0 = d[1] * e2[2] - d[2] * e2[1]
                    p1 = d[2] * e2[0] - d[0] * e2[2]
                    p2 = d[0] * e2[1] - d[1] * e2[0]
                    det = e1[0] * p0 + e1[1] * p1 + e1[2] * p2
                    nf = normals[f]
                    cosang = abs(d[0] * nf[0] + d[1] * nf[1] + d[2] * nf[2]) / dn
                    if det == 0.0:
                        continue
                    inv = 1.0 / det
                    s0 = o[0] - a[0]
                    s1 = o[1] - a[1]
                    s2 = o[2] - a[2]
                    u = (s0 * p0 + s1 * p1 + s2 * p2) * inv
                    q0 = s1 * e1[2] - s2 * e1[1]
                    q1 = s2 * e1[0] - s0 * e1[2]
                    q2 = s0 * e1[1] - s1 * e1[0]
                    v = (d[0] * q0 + d[1] * q1 + d[2] * q2) * inv
                    t = (e2[0] * q0 + e2[1] * q1 + e2[2] * q2) * inv
                    w = 1.0 - u - v
                    # barycentric slack converted to a length via edge altitudes
                    area2 = np.sqrt(
                        (e1[1] * e2[2] - e1[2] * e2[1]) ** 2
                        + (e1[2] * e2[0] - e1[0] * e2[2]) ** 2
                        + (e1[0] * e2[1] - e1[1] * e2[0]) ** 2)
                    l0 = np.sqrt((cc[0] - b[0]) ** 2 + (cc[1] - b[1]) ** 2 + (cc[2] - b[2]) ** 2)
                    l1 = np.sqrt(e2[0] ** 2 + e2[1] ** 2 + e2[2] ** 2)
                    l2 = np.sqrt(e1[0] ** 2 + e1[1] ** 2 + e1[2] ** 2)
                    d0 = w * area2 / l0
                    d1 = u * area2 / l1
                    d2 = v * area2 / l2
                    if d0 < -tol_hit or d1 < -tol_hit or d2 < -tol_hit:
                        continue
                    if t < tmin[i] or t > tmax[i]:
                        continue
                    if c >= MAX_HITS:
                        c = -1
                        break
                    taus[i, c] = t
                    if cosang < tol_tangent:
                        flags[i, c] = HIT_TANGENT
                    elif d0 < tol_hit or d1 < tol_hit or d2 < tol_hit:
                        flags[i, c] = HIT_EDGE
                    c += 1
                if c < 0:
                    break
            else:
                stack[top] = node_left[node]
                stack[top + 1] = node_right[node]
                top += 2
        counts[i] = c
    return taus, flags, counts


@njit(cache=True, nogil=True)
def convex_line_interval(origins, dirs, plane_pts, plane_normals):
    """Parameter interval of each line inside ``{x : (x - p_f).n_f <= 0 for all f}``.

    Empty intersections return ``lo >= hi``.
    """
    n = origins.shape[0]
    out = np.empty((n, 2))
    nf = plane_pts.shape[0]
    for i in range(n):
        lo = -np.inf
        hi = np.inf
        for f in range(nf):
            num = 0.0
            den = 0.0
            for k in range(3):
                num += (plane_pts[f, k] - origins[i, k]) * plane_normals[f, k]
                den += dirs[i, k] * plane_normals[f, k]
            # (o + t d - p).n <= 0  <=>  t den <= num
            if den > 0.0:
                t = num / den
                if t < hi:
                    hi = t
            elif den < 0.0:
                t = num / den
                if t > lo:
                    lo = t
            elif num < 0.0:
                lo = np.inf
                hi = -np.inf
        out[i, 0] = lo
        out[i, 1] = hi
    return out


@njit(cache=True, nogil=True)
def convex_contains(points, plane_pts, plane_normals):
    n = points.shape[0]
    out = np.ones(n, dtype=np.bool_)
    for i in range(n):
        for f in range(plane_pts.shape[0]):
            acc = 0.0
            for k in range(3):
                acc += (points[i, k] - plane_pts[f, k]) * plane_normals[f, k]
            if acc > 0.0:
                out[i] = False
                break
    return out
