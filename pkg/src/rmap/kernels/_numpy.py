"""Pure-numpy versions of the hot kernels.

Every function here has a twin in ``_numba`` with the same signature and the
same arithmetic order, so both paths agree bit-for-bit on selections.
"""

import numpy as np

RAD2DEG = 180.0 / np.pi

# Rows of the query block processed at once by the brute-force searches.
_CHUNK = 256


def nearest_neighbor(query, ref):
    """Index of and Euclidean distance to the nearest ``ref`` point per query row.

    Ties resolve to the lowest reference index.
    """
    m = query.shape[0]
    idx = np.empty(m, dtype=np.int64)
    dist = np.empty(m, dtype=np.float64)
    for s in range(0, m, _CHUNK):
        q = query[s:s + _CHUNK]
        dx = q[:, 0:1] - ref[None, :, 0]
        dy = q[:, 1:2] - ref[None, :, 1]
        dz = q[:, 2:3] - ref[None, :, 2]
        d2 = dx * dx + dy * dy + dz * dz
        j = np.argmin(d2, axis=1)
        idx[s:s + _CHUNK] = j
        dist[s:s + _CHUNK] = np.sqrt(d2[np.arange(len(q)), j])
    return idx, dist


def knn(query, ref, k):
    """``k`` nearest ``ref`` indices per query, ordered by (distance, index)."""
    m = query.shape[0]
    k = min(k, ref.shape[0])
    out = np.empty((m, k), dtype=np.int64)
    for s in range(0, m, _CHUNK):
        q = query[s:s + _CHUNK]
        dx = q[:, 0:1] - ref[None, :, 0]
        dy = q[:, 1:2] - ref[None, :, 1]
        dz = q[:, 2:3] - ref[None, :, 2]
        d2 = dx * dx + dy * dy + dz * dz
        out[s:s + _CHUNK] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def farthest_point_sampling(points, m, start):
    n = points.shape[0]
    sel = np.empty(m, dtype=np.int64)
    mind = np.full(n, np.inf)
    cur = start
    for i in range(m):
        sel[i] = cur
        d = points - points[cur]
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
        np.minimum(mind, d2, out=mind)
        mind[cur] = -1.0
        cur = int(np.argmax(mind))
    return sel


def traverse_rays(origin, ends, res):
    """Voxels crossed by each segment ``origin -> end``, endpoint voxel excluded.

    Integer voxel walk: at each step the axis with the smallest boundary
    parameter advances (ties go to the lowest axis). Returns an ``(M, 3)``
    int64 array grouped by ray, each ray's voxels in walk order.
    """
    n = ends.shape[0]
    if n == 0:
        return np.empty((0, 3), dtype=np.int64)
    d = ends - origin[None, :]
    cur = np.floor(np.broadcast_to(origin, (n, 3)) / res).astype(np.int64)
    last = np.floor(ends / res).astype(np.int64)
    step = np.where(d > 0, 1, np.where(d < 0, -1, 0)).astype(np.int64)
    nz = d != 0
    safe = np.where(nz, d, 1.0)
    bound = (cur + (step > 0)).astype(np.float64) * res
    tmax = np.where(nz, (bound - origin[None, :]) / safe, np.inf)
    tdelta = np.where(nz, res / np.abs(safe), np.inf)
    remaining = np.abs(last - cur).sum(axis=1)

    out, owner = [], []
    active = remaining > 0
    rows = np.arange(n)
    while active.any():
        a = rows[active]
        out.append(cur[a].copy())
        owner.append(a)
        axis = np.argmin(tmax[a], axis=1)
        cur[a, axis] += step[a, axis]
        tmax[a, axis] += tdelta[a, axis]
        remaining[a] -= 1
        active = remaining > 0
    if not out:
        return np.empty((0, 3), dtype=np.int64)
    order = np.argsort(np.concatenate(owner), kind="stable")
    return np.concatenate(out, axis=0)[order]


def frustum_keys(origin, rot, res, half_az, half_el, max_range):
    """Keys of all voxels whose centers fall inside a sensor frustum.

    ``rot`` maps sensor to world; angles are half-angles in degrees. Keys come
    back in lexicographic order.
    """
    lo = np.floor((origin - max_range) / res).astype(np.int64)
    hi = np.floor((origin + max_range) / res).astype(np.int64)
    ii = np.arange(lo[0], hi[0] + 1)
    jj = np.arange(lo[1], hi[1] + 1)
    kk = np.arange(lo[2], hi[2] + 1)
    gi, gj, gk = np.meshgrid(ii, jj, kk, indexing="ij")
    gi, gj, gk = gi.ravel(), gj.ravel(), gk.ravel()
    dx = (gi + 0.5) * res - origin[0]
    dy = (gj + 0.5) * res - origin[1]
    dz = (gk + 0.5) * res - origin[2]
    sx = rot[0, 0] * dx + rot[1, 0] * dy + rot[2, 0] * dz
    sy = rot[0, 1] * dx + rot[1, 1] * dy + rot[2, 1] * dz
    sz = rot[0, 2] * dx + rot[1, 2] * dy + rot[2, 2] * dz
    keep = in_fov(sx, sy, sz, half_az, half_el, max_range)
    return np.stack([gi[keep], gj[keep], gk[keep]], axis=1)


def in_fov(sx, sy, sz, half_az, half_el, max_range):
    """Inclusive az/el/range test on sensor-frame coordinates."""
    rng = np.sqrt(sx * sx + sy * sy + sz * sz)
    az = np.arctan2(sy, sx) * RAD2DEG
    el = np.arctan2(sz, np.sqrt(sx * sx + sy * sy)) * RAD2DEG
    return (np.abs(az) <= half_az) & (np.abs(el) <= half_el) & (rng <= max_range)
