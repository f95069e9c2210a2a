import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmap.geom import (SENSOR, WORLD, PointCloud, Pose, SpatialIndex, Trajectory, build_index, fov_filter, fps, fps_indices,
                       inverse_transform, knn, transform)

import oracles


def test_pointcloud_rejects_nan():
    with pytest.raises(ValueError):
        PointCloud([[0, 0, np.nan]])


def test_pointcloud_is_read_only():
    pc = PointCloud(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        pc.points[0, 0] = 1.0


def test_empty_index_errors():
    with pytest.raises(ValueError, match="empty input"):
        build_index(PointCloud.empty())


def test_single_point_index():
    idx = build_index(PointCloud([[1, 2, 3]]))
    assert knn(idx, [9, 9, 9], 1) == PointCloud([[1, 2, 3]])


def test_duplicates_both_returned():
    idx = build_index(PointCloud([[0, 0, 0], [0, 0, 0], [5, 5, 5]]))
    i, d = idx.query([0.1, 0, 0], 2)
    assert sorted(i) == [0, 1]
    assert list(i) == [0, 1]


def test_collinear_knn():
    pts = np.stack([np.arange(10.0), np.zeros(10), np.zeros(10)], axis=1)
    i, _ = build_index(pts).query([0, 0, 0], 3)
    assert list(i) == [0, 1, 2]


def test_k_larger_than_cloud():
    pts = np.random.default_rng(0).normal(size=(5, 3))
    assert len(knn(build_index(pts), [0, 0, 0], 50)) == 5


@pytest.mark.parametrize("seed", range(10))
def test_index_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    pts = rng.integers(-2, 3, size=(50, 3)).astype(float) if seed % 2 else rng.normal(size=(50, 3))
    q = rng.normal(size=(1, 3))
    i, d = build_index(pts).query(q[0], 8)
    np.testing.assert_array_equal(i, oracles.knn(q, pts, 8)[0])
    np.testing.assert_allclose(d, np.sqrt(oracles.sqdist_matrix(q, pts)[0, i]), atol=1e-12, rtol=0)


def test_radius_query_sorted_and_inclusive():
    pts = np.array([[1.0, 0, 0], [0, 1.0, 0], [0.5, 0, 0], [2, 0, 0]])
    i, d = SpatialIndex(pts).radius([0, 0, 0], 1.0)
    assert list(i) == [2, 0, 1]
    assert list(d) == [0.5, 1.0, 1.0]


def test_fps_examples():
    pts = np.stack([np.arange(10.0), np.zeros(10), np.zeros(10)], axis=1)
    assert list(fps_indices(pts, 3, 0)) == [0, 9, 4]
    assert list(fps_indices(pts, 1, 6)) == [6]
    assert sorted(fps_indices(pts, 10, 2)) == list(range(10))
    with pytest.raises(ValueError):
        fps(pts, 11)


def test_fps_keeps_frame():
    pc = PointCloud(np.eye(3), SENSOR)
    assert fps(pc, 2).frame == SENSOR


def test_quaternion_must_be_unit():
    with pytest.raises(ValueError, match="non-unit"):
        transform(PointCloud([[1.0, 0, 0]], SENSOR), Pose([0, 0, 0], [1.0, 1.0, 0, 0]))


def test_identity_and_yaw_transform():
    pc = PointCloud([[1.0, 0, 0]], SENSOR)
    assert np.array_equal(transform(pc, Pose([0, 0, 0], [1, 0, 0, 0])).points, pc.points)
    out = transform(pc, Pose.from_yaw([0, 0, 0], math.pi / 2)).points
    np.testing.assert_allclose(out, [[0, 1, 0]], atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(-math.pi, math.pi),
       st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda q: np.linalg.norm(q) > 0.1))
def test_transform_round_trip(t, yaw, q):
    q = np.array(q) / np.linalg.norm(q)
    pose = Pose(t, q)
    pts = np.random.default_rng(0).normal(size=(20, 3))
    world = transform(PointCloud(pts, SENSOR), pose)
    assert world.frame == WORLD
    np.testing.assert_allclose(inverse_transform(world, pose).points, pts, atol=1e-9)


def test_pose_inverse():
    pose = Pose([1, 2, 3], np.array([0.9, 0.1, -0.3, 0.2]) / np.linalg.norm([0.9, 0.1, -0.3, 0.2]))
    inv = pose.inverse()
    np.testing.assert_allclose(pose.matrix() @ inv.matrix(), np.eye(3), atol=1e-12)
    np.testing.assert_allclose(pose.matrix() @ inv.translation + pose.translation, 0, atol=1e-12)


def test_trajectory_interpolation():
    traj = Trajectory([0.0, 1.0], [Pose.from_yaw([0, 0, 0], 0.0), Pose.from_yaw([2, 0, 0], math.pi / 2)])
    mid = traj.pose_at(0.5)
    np.testing.assert_allclose(mid.translation, [1, 0, 0])
    np.testing.assert_allclose(mid.matrix()[:3, :3], Pose.from_yaw([0, 0, 0], math.pi / 4).matrix()[:3, :3], atol=1e-12)
    np.testing.assert_allclose(traj.pose_at(1.0).translation, [2, 0, 0])
    with pytest.raises(ValueError, match="outside"):
        traj.pose_at(5.0)


def test_fov_identity_and_behind():
    pts = np.random.default_rng(1).normal(size=(100, 3))
    assert fov_filter(PointCloud(pts, SENSOR), 360, 180) == PointCloud(pts, SENSOR)
    kept = fov_filter(PointCloud([[-1.0, 0, 0], [0, 1.0, 0], [0, -1.0, 0], [1, 0, 0]], SENSOR), 180)
    np.testing.assert_array_equal(kept.points, [[0, 1, 0], [0, -1, 0], [1, 0, 0]])


@pytest.mark.parametrize("seed", range(5))
def test_fov_matches_predicate(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-5, 5, size=(300, 3))
    az, el, r = rng.uniform(10, 360), rng.uniform(5, 180), rng.uniform(1, 8)
    got = fov_filter(pts, az, el, r).points
    want = np.array([p for p in pts if oracles.in_fov(p, az, el, r)]).reshape(-1, 3)
    np.testing.assert_array_equal(got, want)
