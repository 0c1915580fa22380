"""Numba kernels for ray-triangle tests and flattened BVH traversal.

BVH layout (all arrays indexed by node id, root is node 0):

    bmin, bmax : (n_nodes, 3) float64 padded bounding boxes
    left, right : (n_nodes,) int64 child ids, -1 for leaves
    start, count : (n_nodes,) int64 slice into ``order`` for leaves
    order : (n_faces,) int64 face ids permuted into leaf order
"""

import numpy as np
from numba import njit

_STACK_SIZE = 128


@njit(cache=True)
def ray_setup(d):
    """Per-ray constants of the watertight test: axis permutation and shear."""
    ax, ay, az = abs(d[0]), abs(d[1]), abs(d[2])
    kz = 0
    if ay > ax and ay >= az:
        kz = 1
    elif az > ax and az > ay:
        kz = 2
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    if d[kz] < 0.0:
        kx, ky = ky, kx
    sx = d[kx] / d[kz]
    sy = d[ky] / d[kz]
    sz = 1.0 / d[kz]
    return kx, ky, kz, sx, sy, sz


@njit(cache=True)
def ray_triangle(o, kx, ky, kz, sx, sy, sz, a, b, c):
    """Watertight ray/triangle intersection (Woop, Benthin, Wald 2013).

    Returns ``(t, ba, bb, bc)``; ``t`` is ``inf`` on a miss. The barycentric
    weights belong to vertices ``a``, ``b``, ``c`` respectively.
    """
    ax_ = a[kx] - o[kx]
    ay_ = a[ky] - o[ky]
    az_ = a[kz] - o[kz]
    bx_ = b[kx] - o[kx]
    by_ = b[ky] - o[ky]
    bz_ = b[kz] - o[kz]
    cx_ = c[kx] - o[kx]
    cy_ = c[ky] - o[ky]
    cz_ = c[kz] - o[kz]

    ax = ax_ - sx * az_
    ay = ay_ - sy * az_
    bx = bx_ - sx * bz_
    by = by_ - sy * bz_
    cx = cx_ - sx * cz_
    cy = cy_ - sy * cz_

    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax

    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return np.inf, 0.0, 0.0, 0.0
    det = u + v + w
    if det == 0.0:
        return np.inf, 0.0, 0.0, 0.0
    t = (u * sz * az_ + v * sz * bz_ + w * sz * cz_) / det
    return t, u / det, v / det, w / det


@njit(cache=True)
def _ray_box(o, d, bmin, bmax, t_lo, t_hi):
    tnear = t_lo
    tfar = t_hi
    for k in range(3):
        if d[k] == 0.0:
            if o[k] < bmin[k] or o[k] > bmax[k]:
                return False, 0.0
            continue
        inv = 1.0 / d[k]
        t1 = (bmin[k] - o[k]) * inv
        t2 = (bmax[k] - o[k]) * inv
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tnear:
            tnear = t1
        if t2 < tfar:
            tfar = t2
        if tnear > tfar:
            return False, 0.0
    return True, tnear


@njit(cache=True)
def _accept(t, t_lo, t_hi, hi_inclusive):
    if not t > t_lo:
        return False
    if hi_inclusive:
        return t <= t_hi
    return t < t_hi


@njit(cache=True)
def _touches(faces, f, skip_vertex):
    return skip_vertex >= 0 and (
        faces[f, 0] == skip_vertex or faces[f, 1] == skip_vertex or faces[f, 2] == skip_vertex
    )


@njit(cache=True)
def bvh_query(o, d, t_lo, t_hi, hi_inclusive, any_mode, skip_vertex,
              verts, faces, bmin, bmax, left, right, start, count, order):
    """Closest (or any) hit with ``t`` in the window ``(t_lo, t_hi)``.

    Ties in ``t`` resolve to the lowest face id so that results agree with a
    linear scan in face order.
    """
    kx, ky, kz, sx, sy, sz = ray_setup(d)
    best_t = np.inf
    best_f = -1
    bu = 0.0
    bv = 0.0
    bw = 0.0
    limit = t_hi
    slack = 1e-9 * (abs(t_hi) + 1.0)

    stack = np.empty(_STACK_SIZE, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        hit, _ = _ray_box(o, d, bmin[node], bmax[node], t_lo - slack, limit + slack)
        if not hit:
            continue
        if left[node] < 0:
            for j in range(start[node], start[node] + count[node]):
                f = order[j]
                if _touches(faces, f, skip_vertex):
                    continue
                t, u, v, w = ray_triangle(o, kx, ky, kz, sx, sy, sz,
                                          verts[faces[f, 0]], verts[faces[f, 1]], verts[faces[f, 2]])
                if not _accept(t, t_lo, t_hi, hi_inclusive):
                    continue
                if any_mode:
                    return t, f, u, v, w
                if t < best_t or (t == best_t and f < best_f):
                    best_t = t
                    best_f = f
                    bu = u
                    bv = v
                    bw = w
                    limit = t
        else:
            stack[sp] = right[node]
            sp += 1
            stack[sp] = left[node]
            sp += 1
    return best_t, best_f, bu, bv, bw


@njit(cache=True)
def brute_query(o, d, t_lo, t_hi, hi_inclusive, any_mode, skip_vertex, verts, faces):
    """Linear scan over every face; same acceptance rule as ``bvh_query``."""
    kx, ky, kz, sx, sy, sz = ray_setup(d)
    best_t = np.inf
    best_f = -1
    bu = 0.0
    bv = 0.0
    bw = 0.0
    for f in range(faces.shape[0]):
        if _touches(faces, f, skip_vertex):
            continue
        t, u, v, w = ray_triangle(o, kx, ky, kz, sx, sy, sz,
                                  verts[faces[f, 0]], verts[faces[f, 1]], verts[faces[f, 2]])
        if not _accept(t, t_lo, t_hi, hi_inclusive):
            continue
        if any_mode:
            return t, f, u, v, w
        if t < best_t:
            best_t = t
            best_f = f
            bu = u
            bv = v
            bw = w
    return best_t, best_f, bu, bv, bw


@njit(cache=True)
def segment_eps(t_max):
    return 1e-6 * t_max


@njit(cache=True)
def visibility_kernel(points, vertex_ids, o, R, f, half_w, half_h, z_near,
                      verts, faces, bmin, bmax, left, right, start, count, order):
    """Frustum test followed by a guarded occlusion ray per vertex.

    ``vertex_ids[i]`` is the mesh index of ``points[i]`` (its incident faces
    are skipped), or -1 for free points.
    """
    n = points.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    d = np.empty(3)
    for i in range(n):
        rx = points[i, 0] - o[0]
        ry = points[i, 1] - o[1]
        rz = points[i, 2] - o[2]
        zl = R[0, 2] * rx + R[1, 2] * ry + R[2, 2] * rz
        if not zl > z_near:
            continue
        xl = R[0, 0] * rx + R[1, 0] * ry + R[2, 0] * rz
        yl = R[0, 1] * rx + R[1, 1] * ry + R[2, 1] * rz
        if abs(f * xl / zl) > half_w or abs(f * yl / zl) > half_h:
            continue
        dist = np.sqrt(rx * rx + ry * ry + rz * rz)
        d[0] = rx / dist
        d[1] = ry / dist
        d[2] = rz / dist
        eps = segment_eps(dist)
        t, _, _, _, _ = bvh_query(o, d, eps, dist - eps, False, True, vertex_ids[i],
                                  verts, faces, bmin, bmax, left, right, start, count, order)
        if t == np.inf:
            out[i] = 1
    return out


@njit(cache=True)
def render_target_kernel(o, R, f, half_w, half_h, width, height, px0, px1, py0, py1,
                         tverts, tfaces,
                         verts, faces, bmin, bmax, left, right, start, count, order):
    """Count pixels in ``[px0, px1) x [py0, py1)`` whose primary ray meets the
    target triangles before any scene face (scene wins exact ties)."""
    total = 0
    dl = np.empty(3)
    d = np.empty(3)
    du = 2.0 * half_w / width
    dv = 2.0 * half_h / height
    for py in range(py0, py1):
        for px in range(px0, px1):
            dl[0] = -half_w + (px + 0.5) * du
            dl[1] = -half_h + (py + 0.5) * dv
            dl[2] = f
            for k in range(3):
                d[k] = R[k, 0] * dl[0] + R[k, 1] * dl[1] + R[k, 2] * dl[2]
            norm = np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
            d[0] /= norm
            d[1] /= norm
            d[2] /= norm
            tt, tf, _, _, _ = brute_query(o, d, 0.0, np.inf, False, False, -1, tverts, tfaces)
            if tf < 0:
                continue
            ts, _, _, _, _ = bvh_query(o, d, 0.0, tt, True, True, -1,
                                       verts, faces, bmin, bmax, left, right, start, count, order)
            if ts == np.inf:
                total += 1
    return total
