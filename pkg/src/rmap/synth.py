"""Synthetic indoor scenes with paired lidar and radar scans along a trajectory.

Scenes are closed sets of axis-aligned rectangles (walls, floor, ceiling).
Lidar is a dense spinning raster of exact ray hits. Radar samples a sparse
sub-lattice of the same raster over the front half-space, drops returns at
``radar_dropout``, jitters the survivors by ``wall_noise_sigma`` and adds
``radar_clutter_rate`` uniform false returns per scan inside its frustum.
Surfaces sit off the 0.15 m voxel lattice so hits never straddle a boundary.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .geom import SENSOR, PointCloud, Pose, Trajectory
from .io import scan_name, write_ply, write_trajectory

LAYOUTS = ("corridor", "two_room", "L_tunnel")

FLOOR = -0.97
CEILING = 1.43

LIDAR_AZ = np.arange(-180.0, 180.0, 1.0)
LIDAR_EL = np.linspace(-22.5, 22.5, 32)
# radar raster = every 4th lidar column in the front half, every 4th row
RADAR_AZ = LIDAR_AZ[(LIDAR_AZ > -90) & (LIDAR_AZ < 90)][2::4]
RADAR_EL = LIDAR_EL[1::4]
RADAR_MAX_RANGE = 6.0
RADAR_MIN_RANGE = 0.5


@dataclass
class SceneSpec:
    layout: str = "corridor"
    extents: float = 12.0
    wall_noise_sigma: float = 0.05
    radar_dropout: float = 0.8
    radar_clutter_rate: float = 6.0
    seed: int = 0
    pose_spacing: float = 0.3

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}")
        if not self.extents > 0:
            raise ValueError("extents must be positive")
        if not 0 <= self.radar_dropout <= 1:
            raise ValueError("radar_dropout must be a probability")
        if self.radar_clutter_rate < 0 or self.wall_noise_sigma < 0:
            raise ValueError("clutter rate and noise must be non-negative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown scene keys: {sorted(unknown)}")
        return cls(**d)


# A rectangle lies in plane coord[axis] == offset and spans [lo, hi] on the
# two remaining axes (in increasing axis order).
def _rect(axis, offset, lo, hi):
    return (axis, offset, tuple(lo), tuple(hi))


def _box_walls(x0, x1, y0, y1):
    return [
        _rect(2, FLOOR, (x0, y0), (x1, y1)),
        _rect(2, CEILING, (x0, y0), (x1, y1)),
        _rect(1, y0, (x0, FLOOR), (x1, CEILING)),
        _rect(1, y1, (x0, FLOOR), (x1, CEILING)),
        _rect(0, x0, (y0, FLOOR), (y1, CEILING)),
        _rect(0, x1, (y0, FLOOR), (y1, CEILING)),
    ]


def _corridor(length):
    x0, x1, y0, y1 = -0.98, length + 0.98, -1.22, 1.28
    xs = np.arange(0.0, length + 1e-9, 1.0)
    path = np.stack([xs, np.full_like(xs, 0.02)], axis=1)
    return _box_walls(x0, x1, y0, y1), path


def _two_room(length):
    x0, x1, y0, y1 = -1.48, length + 1.48, -2.47, 2.53
    xm = 0.5 * (x0 + x1) + 0.01
    d0, d1, top = -0.48, 0.52, 0.98
    rects = _box_walls(x0, x1, y0, y1) + [
        _rect(0, xm, (y0, FLOOR), (d0, CEILING)),
        _rect(0, xm, (d1, FLOOR), (y1, CEILING)),
        _rect(0, xm, (d0, top), (d1, CEILING)),
    ]
    xs = np.arange(0.0, length + 1e-9, 1.0)
    ys = 0.9 * np.sin(xs * np.pi / 3.0)
    ys[np.abs(xs - xm) < 1.2] = 0.02
    return rects, np.stack([xs, ys], axis=1)


def _l_tunnel(length):
    w = 2.5
    x0, y0 = -0.98, -1.22
    xa = length + 0.98
    yb = length + 0.98
    xb = xa - w
    y1 = y0 + w
    rects = [
        _rect(2, FLOOR, (x0, y0), (xa, y1)),
        _rect(2, CEILING, (x0, y0), (xa, y1)),
        _rect(2, FLOOR, (xb, y1), (xa, yb)),
        _rect(2, CEILING, (xb, y1), (xa, yb)),
        _rect(1, y0, (x0, FLOOR), (xa, CEILING)),
        _rect(1, y1, (x0, FLOOR), (xb, CEILING)),
        _rect(1, yb, (xb, FLOOR), (xa, CEILING)),
        _rect(0, x0, (y0, FLOOR), (y1, CEILING)),
        _rect(0, xa, (y0, FLOOR), (yb, CEILING)),
        _rect(0, xb, (y1, FLOOR), (yb, CEILING)),
    ]
    xc, yc = xa - w / 2, y0 + w / 2
    leg1 = np.stack([np.arange(0.0, xc, 1.0), np.full(int(np.ceil(xc)), yc)], axis=1)
    ys = np.arange(yc, yb - 1.0 + 1e-9, 1.0)
    leg2 = np.stack([np.full_like(ys, xc), ys], axis=1)
    return rects, np.concatenate([leg1, leg2])


def scene_geometry(spec: SceneSpec):
    """(rectangles, 2D path waypoints) for a layout."""
    return {"corridor": _corridor, "two_room": _two_room, "L_tunnel": _l_tunnel}[spec.layout](spec.extents)


def _densify(waypoints, spacing):
    seg = np.diff(waypoints, axis=0)
    lens = np.linalg.norm(seg, axis=1)
    s = np.concatenate([[0.0], np.cumsum(lens)])
    samples = np.arange(0.0, s[-1] + 1e-9, spacing)
    xy = np.stack([np.interp(samples, s, waypoints[:, 0]), np.interp(samples, s, waypoints[:, 1])], axis=1)
    heading = np.empty(len(xy))
    idx = np.clip(np.searchsorted(s, samples, side="right") - 1, 0, len(seg) - 1)
    heading[:] = np.arctan2(seg[idx, 1], seg[idx, 0])
    return xy, heading


def make_trajectory(spec: SceneSpec) -> Trajectory:
    _, waypoints = scene_geometry(spec)
    xy, yaw = _densify(waypoints, spec.pose_spacing)
    poses = [Pose.from_yaw([x, y, 0.0], h) for (x, y), h in zip(xy, yaw)]
    # k / 10 survives the 6-decimal scan file names exactly, k * 0.1 does not
    return Trajectory(np.arange(len(poses)) / 10.0, poses)


def raster_dirs(az_deg, el_deg) -> np.ndarray:
    az, el = np.meshgrid(np.radians(az_deg), np.radians(el_deg), indexing="ij")
    az, el = az.ravel(), el.ravel()
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)


def cast(origin, dirs, rects) -> np.ndarray:
    """Distance along each unit ray to the first rectangle (inf if none)."""
    best = np.full(len(dirs), np.inf)
    for axis, offset, lo, hi in rects:
        others = [a for a in range(3) if a != axis]
        da = dirs[:, axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (offset - origin[axis]) / da
        t = np.where(np.isfinite(t) & (t > 1e-9), t, np.inf)
        p = origin[None, :] + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
        ok = np.ones(len(dirs), dtype=bool)
        for a, l, h in zip(others, lo, hi):
            ok &= (p[:, a] >= l - 1e-9) & (p[:, a] <= h + 1e-9)
        best = np.where(ok & (t < best), t, best)
    return best


def synth_scene(spec: SceneSpec):
    """Deterministic ``(lidar_scans, radar_scans, trajectory)``; scans are
    ``[(timestamp, sensor-frame PointCloud)]``."""
    rng = np.random.default_rng(spec.seed)
    rects, _ = scene_geometry(spec)
    traj = make_trajectory(spec)
    lidar_dirs = raster_dirs(LIDAR_AZ, LIDAR_EL)
    radar_dirs = raster_dirs(RADAR_AZ, RADAR_EL)
    lidar_scans, radar_scans = [], []
    for t, pose in zip(traj.timestamps, traj.poses):
        rot = pose.matrix()
        origin = pose.translation
        r = cast(origin, lidar_dirs @ rot.T, rects)
        ok = np.isfinite(r)
        lidar_scans.append((float(t), PointCloud(lidar_dirs[ok] * r[ok, None], SENSOR)))

        r = cast(origin, radar_dirs @ rot.T, rects)
        keep = np.isfinite(r) & (r <= RADAR_MAX_RANGE) & (rng.random(len(r)) >= spec.radar_dropout)
        pts = radar_dirs[keep] * r[keep, None]
        pts = pts + rng.normal(0.0, 1.0, size=pts.shape) * spec.wall_noise_sigma
        n_clutter = rng.poisson(spec.radar_clutter_rate) if spec.radar_clutter_rate > 0 else 0
        if n_clutter:
            az = np.radians(rng.uniform(RADAR_AZ[0], RADAR_AZ[-1], n_clutter))
            el = np.radians(rng.uniform(RADAR_EL[0], RADAR_EL[-1], n_clutter))
            rr = rng.uniform(RADAR_MIN_RANGE, RADAR_MAX_RANGE, n_clutter)
            clutter = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1) * rr[:, None]
            pts = np.concatenate([pts, clutter])
        radar_scans.append((float(t), PointCloud(pts, SENSOR)))
    return lidar_scans, radar_scans, traj


def write_scene(out_dir, lidar_scans, radar_scans, traj) -> None:
    """``out_dir/lidar/{t}.ply``, ``out_dir/radar/{t}.ply``, ``out_dir/trajectory.csv``."""
    out = Path(out_dir)
    for name, scans in (("lidar", lidar_scans), ("radar", radar_scans)):
        d = out / name
        d.mkdir(parents=True, exist_ok=True)
        for t, cloud in scans:
            write_ply(d / scan_name(t), cloud)
    write_trajectory(out / "trajectory.csv", traj)
