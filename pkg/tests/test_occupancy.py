import numpy as np
import pytest

from rmap.geom import SENSOR, PointCloud, Pose, fov_filter
from rmap.occupancy import (LIDAR_HIT, LIDAR_MISS, OccupancyMap, RadarSensorConfig, build_map, insert_lidar_scan,
                            insert_radar_scan, logit, map_ratio, occupied_centers, pack_keys, unpack_keys)

import oracles

IDENTITY = Pose()


def scan(*pts):
    return PointCloud(np.array(pts, dtype=float).reshape(-1, 3), SENSOR)


def test_pack_round_trip():
    keys = np.array([[0, 0, 0], [-5, 7, 1 << 19], [-(1 << 19), 3, -2]])
    np.testing.assert_array_equal(unpack_keys(pack_keys(keys)), keys)
    with pytest.raises(ValueError):
        pack_keys([[1 << 20, 0, 0]])


def test_single_lidar_return():
    m = insert_lidar_scan(OccupancyMap(0.15), scan([1.0, 0, 0]), IDENTITY)
    assert m.get((6, 0, 0)) == LIDAR_HIT
    for i in range(6):
        assert m.get((i, 0, 0)) == LIDAR_MISS
    assert len(m) == 7
    np.testing.assert_array_equal(m.occupied_keys(), [[6, 0, 0]])


def test_empty_and_origin_returns_leave_map_unchanged():
    m = OccupancyMap()
    insert_lidar_scan(m, PointCloud.empty(SENSOR), IDENTITY)
    insert_lidar_scan(m, scan([0, 0, 0]), IDENTITY)
    assert len(m) == 0


def test_repeated_scans_accumulate_and_clamp():
    m = OccupancyMap(0.15)
    for _ in range(2):
        insert_lidar_scan(m, scan([1.0, 0, 0]), IDENTITY)
    assert m.get((6, 0, 0)) == min(2 * LIDAR_HIT, m.l_max)
    for _ in range(10):
        insert_lidar_scan(m, scan([1.0, 0, 0]), IDENTITY)
    assert m.get((6, 0, 0)) == m.l_max
    assert m.get((0, 0, 0)) == m.l_min


def test_hit_wins_within_scan():
    # second beam passes through the first beam's endpoint voxel
    m = insert_lidar_scan(OccupancyMap(0.15), scan([0.5, 0, 0], [1.0, 0, 0]), IDENTITY)
    assert m.get((3, 0, 0)) == LIDAR_HIT
    assert m.get((1, 0, 0)) == LIDAR_MISS


def test_lidar_scan_in_world_frame():
    pose = Pose.from_yaw([1.0, 1.0, 0.0], np.pi / 2)
    m = insert_lidar_scan(OccupancyMap(0.15), scan([1.0, 0, 0]), pose)
    np.testing.assert_array_equal(m.occupied_keys(), [[6, 13, 0]])


def _frustum_oracle(cfg, res, pose=IDENTITY):
    r = cfg.max_range
    rot = pose.matrix()
    lo = np.floor((pose.translation - r) / res).astype(int)
    hi = np.floor((pose.translation + r) / res).astype(int)
    out = []
    for i in range(lo[0], hi[0] + 1):
        for j in range(lo[1], hi[1] + 1):
            for k in range(lo[2], hi[2] + 1):
                c = (np.array([i, j, k]) + 0.5) * res - pose.translation
                if oracles.in_fov(rot.T @ c, cfg.azimuth_fov, cfg.elevation_fov, r):
                    out.append((i, j, k))
    return out


def test_radar_empty_scan_decrements_frustum():
    cfg = RadarSensorConfig(azimuth_fov=60, elevation_fov=30, max_range=1.5)
    m = insert_radar_scan(OccupancyMap(0.15), PointCloud.empty(SENSOR), IDENTITY, cfg)
    cells = m.cells()
    assert sorted(cells) == _frustum_oracle(cfg, 0.15)
    assert set(cells.values()) == {cfg.l_miss}


def test_radar_single_return():
    cfg = RadarSensorConfig(azimuth_fov=60, elevation_fov=30, max_range=1.5)
    m = insert_radar_scan(OccupancyMap(0.15), scan([1.0, 0.01, 0.01]), IDENTITY, cfg)
    vals = m.cells()
    hits = [k for k, v in vals.items() if v == cfg.l_hit]
    assert hits == [(6, 0, 0)]
    assert sum(v == cfg.l_miss for v in vals.values()) == len(_frustum_oracle(cfg, 0.15)) - 1


def test_radar_return_outside_range_is_ignored():
    cfg = RadarSensorConfig(azimuth_fov=60, elevation_fov=30, max_range=1.5)
    m = insert_radar_scan(OccupancyMap(0.15), scan([3.0, 0, 0]), IDENTITY, cfg)
    assert all(v == cfg.l_miss for v in m.cells().values())


def test_radar_hit_radius_dilates():
    cfg = RadarSensorConfig(azimuth_fov=90, elevation_fov=90, max_range=2.0, hit_radius=1)
    m = insert_radar_scan(OccupancyMap(0.15), scan([1.0, 0.01, 0.01]), IDENTITY, cfg)
    assert sum(v == cfg.l_hit for v in m.cells().values()) == 27


def test_radar_config_validation():
    with pytest.raises(ValueError):
        RadarSensorConfig(l_miss=0.1)
    with pytest.raises(ValueError):
        RadarSensorConfig(max_range=float("inf"))


def test_occupied_centers():
    m = OccupancyMap(0.15)
    assert len(occupied_centers(m)) == 0
    m.update(pack_keys([[0, 0, 0]]), 1.0)
    np.testing.assert_allclose(occupied_centers(m).points, [[0.075, 0.075, 0.075]])


def test_occupied_matches_table_scan():
    rng = np.random.default_rng(3)
    m = OccupancyMap(0.2)
    for _ in range(5):
        insert_lidar_scan(m, scan(*rng.uniform(-2, 2, size=(30, 3))), Pose.from_yaw(rng.normal(size=3), rng.normal()))
    thr = logit(m.occupied_threshold)
    want = sorted(k for k, v in m.cells().items() if v > thr)
    assert [tuple(k) for k in m.occupied_keys()] == want


def test_map_ratio():
    a, b = OccupancyMap(), OccupancyMap()
    a.update(pack_keys([[i, 0, 0] for i in range(40)]), 1.0)
    b.update(pack_keys([[i, 0, 0] for i in range(10)]), 1.0)
    assert map_ratio(a, a) == 1.0
    assert map_ratio(a, b) == 4.0
    with pytest.raises(ZeroDivisionError, match="division by zero"):
        map_ratio(a, OccupancyMap())


def test_build_map_applies_lidar_fov(corridor):
    lidar_scans, _, traj, lidar_map, _ = corridor
    t, cloud = lidar_scans[0]
    m = insert_lidar_scan(OccupancyMap(), fov_filter(cloud, 180.0), traj.pose_at(t))
    m2 = build_map(lidar_scans[:1], traj, "lidar")
    np.testing.assert_array_equal(m.keys, m2.keys)
    assert lidar_map.n_occupied() > 0
    with pytest.raises(ValueError):
        build_map(lidar_scans[:1], traj, "sonar")
