import numpy as np
import pytest

from rmap.occupancy import build_map, occupied_centers
from rmap.synth import SceneSpec, synth_scene


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_SCENES = {}


def scene_maps(layout):
    """Cached ``(lidar_scans, radar_scans, traj, lidar_map, radar_map)`` for a shipped layout."""
    if layout not in _SCENES:
        lidar_scans, radar_scans, traj = synth_scene(SceneSpec(layout))
        lidar_map = build_map(lidar_scans, traj, "lidar")
        radar_map = build_map(radar_scans, traj, "radar")
        _SCENES[layout] = (lidar_scans, radar_scans, traj, lidar_map, radar_map)
    return _SCENES[layout]


@pytest.fixture(scope="session")
def corridor():
    return scene_maps("corridor")


@pytest.fixture(scope="session")
def corridor_clouds(corridor):
    *_, traj, lidar_map, radar_map = corridor
    return occupied_centers(lidar_map), occupied_centers(radar_map), traj


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Call with ``(number, ok, detail)``; prints and records one summary line."""

    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        request.config.stash[ACCEPTANCE].append(line)
        return ok

    return record
