"""numba twins of the kernels in ``_numpy``.

Same signatures, same arithmetic order; fastmath stays off so selections match
the numpy path exactly.
"""

import math

import numpy as np
from numba import njit

RAD2DEG = 180.0 / np.pi

kwd = {"cache": True, "fastmath": False}


@njit(**kwd)
def nearest_neighbor(query, ref):
    m = query.shape[0]
    n = ref.shape[0]
    idx = np.empty(m, dtype=np.int64)
    dist = np.empty(m, dtype=np.float64)
    for i in range(m):
        qx, qy, qz = query[i, 0], query[i, 1], query[i, 2]
        best = np.inf
        bj = 0
        for j in range(n):
            dx = qx - ref[j, 0]
            dy = qy - ref[j, 1]
            dz = qz - ref[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
                bj = j
        idx[i] = bj
        dist[i] = math.sqrt(best)
    return idx, dist


@njit(**kwd)
def knn(query, ref, k):
    # bounded insertion sort; a candidate equal to a kept distance goes after
    # it, which reproduces a stable sort by (distance, index)
    m = query.shape[0]
    n = ref.shape[0]
    k = min(k, n)
    out = np.empty((m, k), dtype=np.int64)
    bd = np.empty(k, dtype=np.float64)
    bi = np.empty(k, dtype=np.int64)
    for i in range(m):
        filled = 0
        for j in range(n):
            dx = query[i, 0] - ref[j, 0]
            dy = query[i, 1] - ref[j, 1]
            dz = query[i, 2] - ref[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if filled == k and d2 >= bd[k - 1]:
                continue
            p = filled if filled < k else k - 1
            while p > 0 and bd[p - 1] > d2:
                if p < k:
                    bd[p] = bd[p - 1]
                    bi[p] = bi[p - 1]
                p -= 1
            bd[p] = d2
            bi[p] = j
            if filled < k:
                filled += 1
        out[i, :] = bi
    return out


@njit(**kwd)
def farthest_point_sampling(points, m, start):
    n = points.shape[0]
    sel = np.empty(m, dtype=np.int64)
    mind = np.full(n, np.inf)
    cur = start
    for i in range(m):
        sel[i] = cur
        cx, cy, cz = points[cur, 0], points[cur, 1], points[cur, 2]
        best = -np.inf
        nxt = 0
        mind[cur] = -1.0
        for j in range(n):
            if mind[j] < 0.0:
                continue
            dx = points[j, 0] - cx
            dy = points[j, 1] - cy
            dz = points[j, 2] - cz
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < mind[j]:
                mind[j] = d2
            if mind[j] > best:
                best = mind[j]
                nxt = j
        if best == -np.inf:
            # only reachable once every point is selected
            nxt = cur
        cur = nxt
    return sel


@njit(**kwd)
def _walk_length(origin, ends, res):
    total = 0
    for r in range(ends.shape[0]):
        for a in range(3):
            c = np.int64(math.floor(origin[a] / res))
            e = np.int64(math.floor(ends[r, a] / res))
            total += abs(e - c)
    return total


@njit(**kwd)
def _traverse(origin, ends, res, out):
    w = 0
    cur = np.empty(3, dtype=np.int64)
    last = np.empty(3, dtype=np.int64)
    step = np.empty(3, dtype=np.int64)
    tmax = np.empty(3, dtype=np.float64)
    tdelta = np.empty(3, dtype=np.float64)
    for r in range(ends.shape[0]):
        remaining = 0
        for a in range(3):
            d = ends[r, a] - origin[a]
            cur[a] = np.int64(math.floor(origin[a] / res))
            last[a] = np.int64(math.floor(ends[r, a] / res))
            remaining += abs(last[a] - cur[a])
            if d > 0:
                step[a] = 1
                tmax[a] = (np.float64(cur[a] + 1) * res - origin[a]) / d
                tdelta[a] = res / abs(d)
            elif d < 0:
                step[a] = -1
                tmax[a] = (np.float64(cur[a]) * res - origin[a]) / d
                tdelta[a] = res / abs(d)
            else:
                step[a] = 0
                tmax[a] = np.inf
                tdelta[a] = np.inf
        while remaining > 0:
            out[w, 0] = cur[0]
            out[w, 1] = cur[1]
            out[w, 2] = cur[2]
            w += 1
            axis = 0
            if tmax[1] < tmax[axis]:
                axis = 1
            if tmax[2] < tmax[axis]:
                axis = 2
            cur[axis] += step[axis]
            tmax[axis] += tdelta[axis]
            remaining -= 1
    return w


def traverse_rays(origin, ends, res):
    n = _walk_length(origin, ends, res)
    out = np.empty((n, 3), dtype=np.int64)
    w = _traverse(origin, ends, res, out)
    return out[:w]


@njit(**kwd)
def frustum_keys(origin, rot, res, half_az, half_el, max_range):
    lo = np.empty(3, dtype=np.int64)
    hi = np.empty(3, dtype=np.int64)
    for a in range(3):
        lo[a] = np.int64(math.floor((origin[a] - max_range) / res))
        hi[a] = np.int64(math.floor((origin[a] + max_range) / res))
    cap = (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1)
    out = np.empty((cap, 3), dtype=np.int64)
    w = 0
    for i in range(lo[0], hi[0] + 1):
        dx = (i + 0.5) * res - origin[0]
        for j in range(lo[1], hi[1] + 1):
            dy = (j + 0.5) * res - origin[1]
            for k in range(lo[2], hi[2] + 1):
                dz = (k + 0.5) * res - origin[2]
                sx = rot[0, 0] * dx + rot[1, 0] * dy + rot[2, 0] * dz
                sy = rot[0, 1] * dx + rot[1, 1] * dy + rot[2, 1] * dz
                sz = rot[0, 2] * dx + rot[1, 2] * dy + rot[2, 2] * dz
                rng = math.sqrt(sx * sx + sy * sy + sz * sz)
                if rng > max_range:
                    continue
                az = math.atan2(sy, sx) * RAD2DEG
                if abs(az) > half_az:
                    continue
                el = math.atan2(sz, math.sqrt(sx * sx + sy * sy)) * RAD2DEG
                if abs(el) > half_el:
                    continue
                out[w, 0] = i
                out[w, 1] = j
                out[w, 2] = k
                w += 1
    return out[:w].copy()
