"""Sparse log-odds voxel maps built from posed lidar and radar scans.

Lidar scans use ray casting: every voxel a beam passes through is evidence of
free space and the voxel holding the return is evidence of occupancy. Radar
scans use an explicit sensor model without ray casting: every voxel whose
center lies inside the radar frustum is updated, upward if a return landed
within ``hit_radius`` voxels of it and downward otherwise.

Within one scan each voxel is updated at most once; when a voxel is both
traversed and hit in the same scan the hit wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geom import WORLD, PointCloud, Pose, as_points, fov_filter

# Keys pack as three 21-bit fields, so |index| must stay below 2**20.
_OFFSET = 1 << 20
_MASK = (1 << 21) - 1

LIDAR_HIT = 0.85
LIDAR_MISS = -0.4


def pack_keys(keys) -> np.ndarray:
    k = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
    if k.size and (np.abs(k).max() >= _OFFSET):
        raise ValueError("voxel index out of packable range")
    k = k + _OFFSET
    return (k[:, 0] << 42) | (k[:, 1] << 21) | k[:, 2]


def unpack_keys(packed) -> np.ndarray:
    p = np.asarray(packed, dtype=np.int64)
    return np.stack([(p >> 42) & _MASK, (p >> 21) & _MASK, p & _MASK], axis=1) - _OFFSET


def voxel_keys(points, res: float) -> np.ndarray:
    return np.floor(as_points(points) / res).astype(np.int64)


def voxel_centers(keys, res: float) -> np.ndarray:
    return (np.asarray(keys, dtype=np.float64) + 0.5) * res


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass
class RadarSensorConfig:
    azimuth_fov: float = 180.0
    elevation_fov: float = 45.0
    max_range: float = 6.0
    l_hit: float = 0.85
    l_miss: float = -0.05
    hit_radius: int = 0

    def __post_init__(self):
        if not self.l_hit > 0:
            raise ValueError("l_hit must be positive")
        if not self.l_miss < 0:
            raise ValueError("l_miss must be negative")
        if not (0 < self.max_range < np.inf):
            raise ValueError("max_range must be positive and finite")
        if not 0 < self.azimuth_fov <= 360:
            raise ValueError("azimuth_fov must be in (0, 360]")
        if self.hit_radius < 0:
            raise ValueError("hit_radius must be >= 0")


class OccupancyMap:
    """Flat sparse voxel map: sorted packed keys with parallel log-odds values."""

    def __init__(self, resolution: float = 0.15, clamp=(-2.0, 3.5), occupied_threshold: float = 0.5):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.l_min, self.l_max = float(clamp[0]), float(clamp[1])
        self.occupied_threshold = float(occupied_threshold)
        self._keys = np.empty(0, dtype=np.int64)
        self._vals = np.empty(0, dtype=np.float64)

    def __len__(self):
        return len(self._keys)

    @property
    def keys(self) -> np.ndarray:
        return unpack_keys(self._keys)

    @property
    def values(self) -> np.ndarray:
        return self._vals.copy()

    def cells(self) -> dict:
        return {tuple(int(x) for x in k): float(v) for k, v in zip(self.keys, self._vals)}

    def get(self, key, default=0.0) -> float:
        p = pack_keys([key])[0]
        i = np.searchsorted(self._keys, p)
        if i < len(self._keys) and self._keys[i] == p:
            return float(self._vals[i])
        return default

    def update(self, packed: np.ndarray, delta) -> None:
        """Add ``delta`` to each (unique) packed key, clamping after the add."""
        if len(packed) == 0:
            return
        delta = np.broadcast_to(np.asarray(delta, dtype=np.float64), packed.shape)
        pos = np.searchsorted(self._keys, packed)
        found = pos < len(self._keys)
        found[found] = self._keys[pos[found]] == packed[found]
        hit = pos[found]
        self._vals[hit] = np.clip(self._vals[hit] + delta[found], self.l_min, self.l_max)
        new = ~found
        if new.any():
            keys = np.concatenate([self._keys, packed[new]])
            vals = np.concatenate([self._vals, np.clip(delta[new], self.l_min, self.l_max)])
            order = np.argsort(keys, kind="stable")
            self._keys, self._vals = keys[order], vals[order]

    def occupied_mask(self) -> np.ndarray:
        return self._vals > logit(self.occupied_threshold)

    def occupied_keys(self) -> np.ndarray:
        return unpack_keys(self._keys[self.occupied_mask()])

    def n_occupied(self) -> int:
        return int(self.occupied_mask().sum())

    def to_csv(self, path) -> None:
        """Debug dump: one ``i,j,k,logodds`` line per stored voxel."""
        with open(path, "w", newline="\n") as f:
            for (i, j, k), v in zip(self.keys, self._vals):
                f.write(f"{i},{j},{k},{v:.17g}\n")


def _apply_scan(m: OccupancyMap, free: np.ndarray, occ: np.ndarray, l_hit: float, l_miss: float):
    occ = np.unique(occ)
    free = np.setdiff1d(np.unique(free), occ, assume_unique=True)
    m.update(free, l_miss)
    m.update(occ, l_hit)


def insert_lidar_scan(m: OccupancyMap, scan, pose: Pose, l_hit: float = LIDAR_HIT, l_miss: float = LIDAR_MISS) -> OccupancyMap:
    """Ray-cast update from a sensor-frame scan taken at ``pose``.

    The scan should already be restricted to the radar's field of view.
    Returns at the sensor origin are skipped.
    """
    pts = as_points(scan)
    pts = pts[np.any(pts != 0.0, axis=1)]
    if len(pts) == 0:
        return m
    rot = pose.matrix()
    origin = pose.translation
    ends = pts @ rot.T + origin
    res = m.resolution
    free = pack_keys(kernels.traverse_rays(origin, ends, res))
    occ = pack_keys(voxel_keys(ends, res))
    _apply_scan(m, free, occ, l_hit, l_miss)
    return m


def _dilate(keys: np.ndarray, r: int) -> np.ndarray:
    if r == 0 or len(keys) == 0:
        return keys
    g = np.arange(-r, r + 1)
    off = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    return (keys[:, None, :] + off[None, :, :]).reshape(-1, 3)


def insert_radar_scan(m: OccupancyMap, scan, pose: Pose, cfg: RadarSensorConfig) -> OccupancyMap:
    """Explicit radar sensor model update; voxels outside the frustum are untouched."""
    res = m.resolution
    rot = pose.matrix()
    origin = pose.translation
    half_az, half_el = cfg.azimuth_fov / 2.0, cfg.elevation_fov / 2.0
    in_view = pack_keys(kernels.frustum_keys(origin, rot, res, half_az, half_el, cfg.max_range))
    pts = as_points(scan)
    keep = kernels.in_fov(pts[:, 0], pts[:, 1], pts[:, 2], half_az, half_el, cfg.max_range)
    ends = pts[keep] @ rot.T + origin
    hits = np.unique(pack_keys(_dilate(voxel_keys(ends, res), cfg.hit_radius)))
    is_hit = np.isin(in_view, hits, assume_unique=True)
    m.update(in_view[~is_hit], cfg.l_miss)
    m.update(in_view[is_hit], cfg.l_hit)
    return m


def occupied_centers(m: OccupancyMap) -> PointCloud:
    """Centers of occupied voxels in lexicographic key order."""
    return PointCloud(voxel_centers(m.occupied_keys(), m.resolution), WORLD)


def map_ratio(lidar: OccupancyMap, radar: OccupancyMap) -> float:
    """Occupied-voxel count of the lidar map over that of the radar map."""
    nl, nr = lidar.n_occupied(), radar.n_occupied()
    if nl == 0:
        raise ValueError("lidar map has no occupied voxels")
    if nr == 0:
        raise ZeroDivisionError("division by zero: radar map has no occupied voxels")
    return nl / nr


def build_map(scans, trajectory, sensor: str, resolution: float = 0.15, radar_cfg: RadarSensorConfig | None = None,
              lidar_azimuth: float = 180.0) -> OccupancyMap:
    """Accumulate ``[(timestamp, sensor-frame cloud)]`` into a fresh map."""
    m = OccupancyMap(resolution)
    for t, scan in scans:
        pose = trajectory.pose_at(t)
        if sensor == "lidar":
            insert_lidar_scan(m, fov_filter(scan, lidar_azimuth), pose)
        elif sensor == "radar":
            insert_radar_scan(m, scan, pose, radar_cfg or RadarSensorConfig())
        else:
            raise ValueError(f"unknown sensor {sensor!r}")
    return m
