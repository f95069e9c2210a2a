import numpy as np
import pytest

from rmap.geom import PointCloud, Pose, Trajectory
from rmap.io import FormatError, load_scan_dir, read_json, read_ply, read_trajectory, write_json, write_ply, write_trajectory


def test_ply_round_trip_exact(tmp_path, rng):
    pts = rng.normal(size=(50, 3)) * 1e3
    write_ply(tmp_path / "a.ply", pts)
    assert np.array_equal(read_ply(tmp_path / "a.ply").points, pts)


def test_empty_ply(tmp_path):
    write_ply(tmp_path / "e.ply", np.empty((0, 3)))
    assert len(read_ply(tmp_path / "e.ply")) == 0


def test_binary_ply_with_extra_props(tmp_path):
    rec = np.array([(1.0, 2.0, 3.0, 7.5), (4.0, 5.0, 6.0, 0.1)],
                   dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("intensity", "<f4")])
    header = ("ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 2\nproperty float x\n"
              "property float y\nproperty float z\nproperty float intensity\nend_header\n")
    with open(tmp_path / "b.ply", "wb") as f:
        f.write(header.encode() + rec.tobytes())
    np.testing.assert_array_equal(read_ply(tmp_path / "b.ply").points, [[1, 2, 3], [4, 5, 6]])


def test_ascii_ply_reordered_props(tmp_path):
    (tmp_path / "c.ply").write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float z\nproperty float x\n"
                                    "property float y\nend_header\n3 1 2\n")
    np.testing.assert_array_equal(read_ply(tmp_path / "c.ply").points, [[1, 2, 3]])


@pytest.mark.parametrize("body", ["plx\n", "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nend_header\n",
                                  "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                                  "property float z\nend_header\n1 2 3\n"])
def test_bad_ply(tmp_path, body):
    (tmp_path / "bad.ply").write_text(body)
    with pytest.raises(FormatError, match="bad.ply"):
        read_ply(tmp_path / "bad.ply")


def test_nan_vertex_names_file(tmp_path):
    (tmp_path / "1.0.ply").write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                                      "property float z\nend_header\nnan 0 0\n")
    with pytest.raises(FormatError, match="1.0.ply"):
        load_scan_dir(tmp_path)


def test_scan_dir_sorted(tmp_path):
    assert load_scan_dir(tmp_path) == []
    for t in (2.5, 0.5, 10.0):
        write_ply(tmp_path / f"{t:.6f}.ply", [[t, 0, 0]])
    scans = load_scan_dir(tmp_path)
    assert [t for t, _ in scans] == [0.5, 2.5, 10.0]
    assert scans[0][1].frame == "sensor"


def test_missing_scan_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_scan_dir(tmp_path / "nope")


def test_trajectory_round_trip(tmp_path):
    traj = Trajectory([0.0, 0.1, 0.25], [Pose.from_yaw([i, 2 * i, 0.3], 0.1 * i) for i in range(3)])
    write_trajectory(tmp_path / "t.csv", traj)
    back = read_trajectory(tmp_path / "t.csv")
    assert list(back.timestamps) == list(traj.timestamps)
    for a, b in zip(back.poses, traj.poses):
        assert np.array_equal(a.translation, b.translation) and np.array_equal(a.rotation, b.rotation)


def test_trajectory_header_and_errors(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("t,x,y,z,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n1,1,0,0,1,0,0,0\n")
    assert len(read_trajectory(p)) == 2
    p.write_text("0,0,0,0,1,0,0\n")
    with pytest.raises(FormatError, match="expected 8 fields"):
        read_trajectory(p)
    with pytest.raises(FileNotFoundError, match="missing.csv"):
        read_trajectory(tmp_path / "missing.csv")


def test_json_round_trip(tmp_path):
    write_json(tmp_path / "a.json", {"b": [1, 2.5], "a": None})
    assert read_json(tmp_path / "a.json") == {"b": [1, 2.5], "a": None}
