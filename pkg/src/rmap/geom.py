"""Point clouds, poses, trajectories, neighbor search, sampling and transforms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import kernels

SENSOR = "sensor"
WORLD = "world"


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered (N, 3) array of finite points in meters, tagged with its frame."""

    points: np.ndarray
    frame: str = WORLD

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite coordinates")
        if self.frame not in (SENSOR, WORLD):
            raise ValueError(f"unknown frame {self.frame!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    def __getitem__(self, idx):
        return PointCloud(self.points[np.asarray(idx)], self.frame)

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.frame == other.frame and np.array_equal(self.points, other.points)

    @classmethod
    def empty(cls, frame=WORLD):
        return cls(np.empty((0, 3)), frame)


def as_points(cloud) -> np.ndarray:
    """(N, 3) float64 view of a PointCloud or array-like."""
    if isinstance(cloud, PointCloud):
        return cloud.points
    return np.asarray(cloud, dtype=np.float64).reshape(-1, 3)


@dataclass(frozen=True)
class Pose:
    """Rigid sensor-to-world transform; rotation is a (w, x, y, z) quaternion."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(4))

    @classmethod
    def from_yaw(cls, translation, yaw):
        return cls(translation, [np.cos(yaw / 2), 0.0, 0.0, np.sin(yaw / 2)])

    def matrix(self) -> np.ndarray:
        """3x3 rotation matrix. Raises if the quaternion is not unit length."""
        norm = np.linalg.norm(self.rotation)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"non-unit quaternion (norm {norm:.12g})")
        w, x, y, z = self.rotation
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def inverse(self) -> Pose:
        w, x, y, z = self.rotation
        conj = np.array([w, -x, -y, -z])
        rot_t = self.matrix().T
        return Pose(-rot_t @ self.translation, conj)


class Trajectory:
    """Time-ordered poses. Timestamps must be strictly increasing."""

    def __init__(self, timestamps: Sequence[float], poses: Sequence[Pose]):
        t = np.asarray(timestamps, dtype=np.float64).reshape(-1)
        if len(t) != len(poses):
            raise ValueError("timestamps and poses differ in length")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        self.timestamps = t
        self.poses = list(poses)

    def __len__(self):
        return len(self.poses)

    @property
    def positions(self) -> np.ndarray:
        if not self.poses:
            return np.empty((0, 3))
        return np.stack([p.translation for p in self.poses])

    def pose_at(self, t: float) -> Pose:
        """Pose at time ``t``: exact match, otherwise lerp + slerp between neighbors."""
        ts = self.timestamps
        i = int(np.searchsorted(ts, t))
        if i < len(ts) and ts[i] == t:
            return self.poses[i]
        if i == 0 or i == len(ts):
            raise ValueError(f"time {t} outside trajectory span [{ts[0]}, {ts[-1]}]")
        a, b = self.poses[i - 1], self.poses[i]
        u = (t - ts[i - 1]) / (ts[i] - ts[i - 1])
        q0, q1 = a.rotation, b.rotation
        dot = float(np.dot(q0, q1))
        if dot < 0:
            q1, dot = -q1, -dot
        if dot > 0.9995:
            q = q0 + u * (q1 - q0)
        else:
            theta = np.arccos(dot)
            q = (np.sin((1 - u) * theta) * q0 + np.sin(u * theta) * q1) / np.sin(theta)
        q = q / np.linalg.norm(q)
        return Pose(a.translation + u * (b.translation - a.translation), q)


class SpatialIndex:
    """Balanced k-d tree over a cloud with exact, index-tie-broken queries.

    Candidate sets come from scipy's cKDTree; the final ordering is always
    recomputed here by (Euclidean distance, insertion index) so results equal
    an exhaustive scan.
    """

    def __init__(self, cloud):
        pts = as_points(cloud)
        if len(pts) == 0:
            raise ValueError("empty input")
        self.points = pts
        self._tree = cKDTree(pts, balanced_tree=True, compact_nodes=True)

    def __len__(self):
        return len(self.points)

    def _dist(self, q, idx):
        d = self.points[idx] - q
        return np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])

    def query(self, point, k: int):
        """Indices and distances of the min(k, n) nearest points."""
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(point, dtype=np.float64).reshape(3)
        n = len(self.points)
        if k >= n:
            cand = np.arange(n)
        else:
            dk, _ = self._tree.query(q, k=[k])
            radius = float(dk[0]) * (1 + 1e-9) + 1e-12
            cand = np.asarray(self._tree.query_ball_point(q, radius), dtype=np.int64)
        dist = self._dist(q, cand)
        order = np.lexsort((cand, dist))[:k]
        return cand[order], dist[order]

    def radius(self, point, r: float):
        """Indices within distance ``r`` (inclusive), sorted by (distance, index)."""
        q = np.asarray(point, dtype=np.float64).reshape(3)
        cand = np.asarray(self._tree.query_ball_point(q, r * (1 + 1e-9) + 1e-12), dtype=np.int64)
        dist = self._dist(q, cand)
        keep = dist <= r
        cand, dist = cand[keep], dist[keep]
        order = np.lexsort((cand, dist))
        return cand[order], dist[order]


def build_index(cloud) -> SpatialIndex:
    return SpatialIndex(cloud)


def knn(index: SpatialIndex, query, k: int) -> PointCloud:
    idx, _ = index.query(query, k)
    return PointCloud(index.points[idx])


def fps_indices(cloud, m: int, start: int = 0) -> np.ndarray:
    """Farthest-point sampling; see :func:`fps`."""
    pts = as_points(cloud)
    n = len(pts)
    if m < 1 or m > n:
        raise ValueError(f"fps needs 1 <= m <= {n}, got m={m}")
    if not 0 <= start < n:
        raise ValueError(f"start index {start} out of range")
    return kernels.farthest_point_sampling(pts, m, start)


def fps(cloud, m: int, start: int = 0) -> PointCloud:
    """Greedy farthest-point sampling of ``m`` points.

    Begins at ``start`` and repeatedly adds the point whose distance to the
    selected set is largest; ties go to the lowest index.
    """
    frame = cloud.frame if isinstance(cloud, PointCloud) else WORLD
    return PointCloud(as_points(cloud)[fps_indices(cloud, m, start)], frame)


def transform(cloud: PointCloud, pose: Pose) -> PointCloud:
    """Map a sensor-frame cloud into the world frame: p' = R p + t."""
    if isinstance(cloud, PointCloud) and cloud.frame != SENSOR:
        raise ValueError("transform expects a sensor-frame cloud")
    rot = pose.matrix()
    pts = as_points(cloud)
    return PointCloud(pts @ rot.T + pose.translation, WORLD)


def inverse_transform(cloud: PointCloud, pose: Pose) -> PointCloud:
    rot = pose.matrix()
    pts = as_points(cloud)
    return PointCloud((pts - pose.translation) @ rot, SENSOR)


def fov_mask(points, azimuth_deg: float, elevation_deg: float, max_range: float = np.inf):
    pts = as_points(points)
    return kernels.in_fov(pts[:, 0], pts[:, 1], pts[:, 2], azimuth_deg / 2.0, elevation_deg / 2.0, max_range)


def fov_filter(cloud, azimuth_deg: float, elevation_deg: float = 180.0, max_range: float = np.inf) -> PointCloud:
    """Keep sensor-frame points inside an azimuth/elevation/range window.

    Boundaries are inclusive: with ``azimuth_deg=180`` a point at +/-90 degrees
    survives while one directly behind the sensor does not.
    """
    if not 0 < azimuth_deg <= 360:
        raise ValueError("azimuth_deg must be in (0, 360]")
    frame = cloud.frame if isinstance(cloud, PointCloud) else SENSOR
    pts = as_points(cloud)
    return PointCloud(pts[fov_mask(pts, azimuth_deg, elevation_deg, max_range)], frame)
