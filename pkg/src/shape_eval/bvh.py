"""Axis-aligned BVH over triangles with numba-compiled query kernels.

The tree is built once in numpy (median split on the longest centroid axis)
and stored as flat arrays, so the compiled kernels can traverse it and the
structure can be shared read-only across threads. Ray casting uses the
watertight shear test, so shared edges never double-count or leak.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

_LEAF_SIZE = 4


@dataclass(frozen=True)
class TriangleBvh:
    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray   # -1 marks a leaf
    node_right: np.ndarray
    node_start: np.ndarray  # leaf triangle range in the reordered arrays
    node_count: np.ndarray
    v0: np.ndarray          # triangle corners, BVH order
    v1: np.ndarray
    v2: np.ndarray

    @property
    def n_triangles(self) -> int:
        return len(self.v0)


def build_bvh(vertices: np.ndarray, faces: np.ndarray) -> TriangleBvh:
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if len(faces) == 0:
        raise ValueError("cannot build a BVH over an empty mesh")
    tri = vertices[faces]  # (m, 3, 3)
    tri_min = tri.min(axis=1)
    tri_max = tri.max(axis=1)
    centroids = tri.mean(axis=1)
    m = len(faces)

    order = np.arange(m)
    node_min, node_max = [], []
    node_left, node_right = [], []
    node_start, node_count = [], []

    def new_node() -> int:
        for arr in (node_min, node_max):
            arr.append(np.zeros(3))
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(0)
        node_count.append(0)
        return len(node_left) - 1

    root = new_node()
    stack = [(root, 0, m)]
    while stack:
        node, lo, hi = stack.pop()
        idx = order[lo:hi]
        node_min[node] = tri_min[idx].min(axis=0)
        node_max[node] = tri_max[idx].max(axis=0)
        if hi - lo <= _LEAF_SIZE:
            node_start[node] = lo
            node_count[node] = hi - lo
            continue
        cent = centroids[idx]
        axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
        key = cent[:, axis]
        if key.max() == key.min():  # degenerate spread: keep as leaf
            node_start[node] = lo
            node_count[node] = hi - lo
            continue
        mid = (hi - lo) // 2
        part = np.argsort(key, kind="stable")
        order[lo:hi] = idx[part]
        left, right = new_node(), new_node()
        node_left[node] = left
        node_right[node] = right
        stack.append((left, lo, lo + mid))
        stack.append((right, lo + mid, hi))

    tri_sorted = tri[order]
    return TriangleBvh(
        node_min=np.array(node_min),
        node_max=np.array(node_max),
        node_left=np.array(node_left, dtype=np.int64),
        node_right=np.array(node_right, dtype=np.int64),
        node_start=np.array(node_start, dtype=np.int64),
        node_count=np.array(node_count, dtype=np.int64),
        v0=np.ascontiguousarray(tri_sorted[:, 0]),
        v1=np.ascontiguousarray(tri_sorted[:, 1]),
        v2=np.ascontiguousarray(tri_sorted[:, 2]),
    )


@njit(cache=True)
def _closest_point_on_triangle(a, b, c, p):
    """Ericson's region-based closest point on triangle abc to point p."""
    ab0, ab1, ab2 = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    ac0, ac1, ac2 = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    ap0, ap1, ap2 = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = ab0 * ap0 + ab1 * ap1 + ab2 * ap2
    d2 = ac0 * ap0 + ac1 * ap1 + ac2 * ap2
    if d1 <= 0.0 and d2 <= 0.0:
        return a[0], a[1], a[2]
    bp0, bp1, bp2 = p[0] - b[0], p[1] - b[1], p[2] - b[2]
    d3 = ab0 * bp0 + ab1 * bp1 + ab2 * bp2
    d4 = ac0 * bp0 + ac1 * bp1 + ac2 * bp2
    if d3 >= 0.0 and d4 <= d3:
        return b[0], b[1], b[2]
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        return a[0] + t * ab0, a[1] + t * ab1, a[2] + t * ab2
    cp0, cp1, cp2 = p[0] - c[0], p[1] - c[1], p[2] - c[2]
    d5 = ab0 * cp0 + ab1 * cp1 + ab2 * cp2
    d6 = ac0 * cp0 + ac1 * cp1 + ac2 * cp2
    if d6 >= 0.0 and d5 <= d6:
        return c[0], c[1], c[2]
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        return a[0] + t * ac0, a[1] + t * ac1, a[2] + t * ac2
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return (
            b[0] + t * (c[0] - b[0]),
            b[1] + t * (c[1] - b[1]),
            b[2] + t * (c[2] - b[2]),
        )
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return (
        a[0] + ab0 * v + ac0 * w,
        a[1] + ab1 * v + ac1 * w,
        a[2] + ab2 * v + ac2 * w,
    )


@njit(cache=True)
def _box_distance_sq(bmin, bmax, p):
    d = 0.0
    for ax in range(3):
        if p[ax] < bmin[ax]:
            d += (bmin[ax] - p[ax]) ** 2
        elif p[ax] > bmax[ax]:
            d += (p[ax] - bmax[ax]) ** 2
    return d


@njit(cache=True, parallel=True)
def _closest_distances(
    queries, node_min, node_max, node_left, node_right, node_start, node_count,
    v0, v1, v2,
):
    n = queries.shape[0]
    out = np.empty(n)
    stack = np.empty((n, 64), dtype=np.int64)
    for qi in prange(n):
        p = queries[qi]
        best = np.inf
        top = 0
        stack[qi, top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[qi, top]
            if _box_distance_sq(node_min[node], node_max[node], p) >= best:
                continue
            left = node_left[node]
            if left < 0:
                start = node_start[node]
                for t in range(start, start + node_count[node]):
                    cx, cy, cz = _closest_point_on_triangle(v0[t], v1[t], v2[t], p)
                    d = (cx - p[0]) ** 2 + (cy - p[1]) ** 2 + (cz - p[2]) ** 2
                    if d < best:
                        best = d
            else:
                right = node_right[node]
                dl = _box_distance_sq(node_min[left], node_max[left], p)
                dr = _box_distance_sq(node_min[right], node_max[right], p)
                # push the farther child first so the nearer is handled next
                if dl <= dr:
                    stack[qi, top] = right
                    top += 1
                    stack[qi, top] = left
                    top += 1
                else:
                    stack[qi, top] = left
                    top += 1
                    stack[qi, top] = right
                    top += 1
        out[qi] = np.sqrt(best)
    return out


def closest_distances(bvh: TriangleBvh, queries: np.ndarray) -> np.ndarray:
    """Exact unsigned distance from each query point to the triangle set."""
    q = np.ascontiguousarray(np.asarray(queries, dtype=np.float64).reshape(-1, 3))
    return _closest_distances(
        q, bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
        bvh.node_start, bvh.node_count, bvh.v0, bvh.v1, bvh.v2,
    )


@njit(cache=True)
def _ray_box_hits(bmin, bmax, o, inv_d, d, t_best):
    """Slab test against [0, t_best); parallel rays handled by bounds check."""
    t0 = 0.0
    t1 = t_best
    for ax in range(3):
        if d[ax] == 0.0:
            if o[ax] < bmin[ax] or o[ax] > bmax[ax]:
                return False
        else:
            near = (bmin[ax] - o[ax]) * inv_d[ax]
            far = (bmax[ax] - o[ax]) * inv_d[ax]
            if near > far:
                near, far = far, near
            if near > t0:
                t0 = near
            if far < t1:
                t1 = far
            if t0 > t1:
                return False
    return True


@njit(cache=True)
def _watertight_ray_constants(d):
    kz = 0
    amax = abs(d[0])
    if abs(d[1]) > amax:
        kz = 1
        amax = abs(d[1])
    if abs(d[2]) > amax:
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
def _ray_triangle_t(o, kx, ky, kz, sx, sy, sz, a, b, c):
    """Watertight ray/triangle intersection; returns t or inf on miss."""
    ax = a[kx] - o[kx] - sx * (a[kz] - o[kz])
    ay = a[ky] - o[ky] - sy * (a[kz] - o[kz])
    bx = b[kx] - o[kx] - sx * (b[kz] - o[kz])
    by = b[ky] - o[ky] - sy * (b[kz] - o[kz])
    cx = c[kx] - o[kx] - sx * (c[kz] - o[kz])
    cy = c[ky] - o[ky] - sy * (c[kz] - o[kz])
    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax
    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return np.inf
    det = u + v + w
    if det == 0.0:
        return np.inf
    az = sz * (a[kz] - o[kz])
    bz = sz * (b[kz] - o[kz])
    cz = sz * (c[kz] - o[kz])
    t = (u * az + v * bz + w * cz) / det
    if t <= 0.0:
        return np.inf
    return t


@njit(cache=True, parallel=True)
def _ray_cast(
    origin, dirs, node_min, node_max, node_left, node_right, node_start,
    node_count, v0, v1, v2,
):
    n = dirs.shape[0]
    out = np.full(n, np.inf)
    stack = np.empty((n, 64), dtype=np.int64)
    for ri in prange(n):
        d = dirs[ri]
        kx, ky, kz, sx, sy, sz = _watertight_ray_constants(d)
        inv = np.empty(3)
        for ax in range(3):
            inv[ax] = 1.0 / d[ax] if d[ax] != 0.0 else np.inf
        best = np.inf
        top = 0
        stack[ri, top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[ri, top]
            if not _ray_box_hits(node_min[node], node_max[node], origin, inv, d, best):
                continue
            left = node_left[node]
            if left < 0:
                start = node_start[node]
                for t in range(start, start + node_count[node]):
                    hit = _ray_triangle_t(
                        origin, kx, ky, kz, sx, sy, sz, v0[t], v1[t], v2[t]
                    )
                    if hit < best:
                        best = hit
            else:
                stack[ri, top] = node_right[node]
                top += 1
                stack[ri, top] = left
                top += 1
        out[ri] = best
    return out


def cast_rays(bvh: TriangleBvh, origin: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Nearest-hit ray parameters from one origin; inf where the mesh is missed."""
    o = np.ascontiguousarray(np.asarray(origin, dtype=np.float64).reshape(3))
    d = np.ascontiguousarray(np.asarray(directions, dtype=np.float64).reshape(-1, 3))
    return _ray_cast(
        o, d, bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
        bvh.node_start, bvh.node_count, bvh.v0, bvh.v1, bvh.v2,
    )


@njit(cache=True, parallel=True)
def _ray_hit_parities(
    origins, direction, node_min, node_max, node_left, node_right, node_start,
    node_count, v0, v1, v2,
):
    """Crossing-count parity along one shared direction, origin per row."""
    n = origins.shape[0]
    out = np.zeros(n, dtype=np.int64)
    stack = np.empty((n, 64), dtype=np.int64)
    kx, ky, kz, sx, sy, sz = _watertight_ray_constants(direction)
    inv = np.empty(3)
    for ax in range(3):
        inv[ax] = 1.0 / direction[ax] if direction[ax] != 0.0 else np.inf
    for ri in prange(n):
        o = origins[ri]
        hits = 0
        top = 0
        stack[ri, top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[ri, top]
            if not _ray_box_hits(node_min[node], node_max[node], o, inv, direction, np.inf):
                continue
            left = node_left[node]
            if left < 0:
                start = node_start[node]
                for t in range(start, start + node_count[node]):
                    hit = _ray_triangle_t(
                        o, kx, ky, kz, sx, sy, sz, v0[t], v1[t], v2[t]
                    )
                    if np.isfinite(hit):
                        hits += 1
            else:
                stack[ri, top] = node_right[node]
                top += 1
                stack[ri, top] = left
                top += 1
        out[ri] = hits % 2
    return out


def ray_parities(bvh: TriangleBvh, origins: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """1 where a ray from each origin crosses the surface an odd number of times."""
    o = np.ascontiguousarray(np.asarray(origins, dtype=np.float64).reshape(-1, 3))
    d = np.ascontiguousarray(np.asarray(direction, dtype=np.float64).reshape(3))
    return _ray_hit_parities(
        o, d, bvh.node_min, bvh.node_max, bvh.node_left, bvh.node_right,
        bvh.node_start, bvh.node_count, bvh.v0, bvh.v1, bvh.v2,
    )
