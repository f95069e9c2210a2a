import json

import numpy as np
import pytest

from rmap.cli import EXIT_OK, EXIT_STAGE, EXIT_VALIDATION, main
from rmap.io import read_json, read_ply, write_json, write_ply
from rmap.model import NetworkConfig


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    assert main(["synth", "--layout", "corridor", "--extents", "4", "--out", str(d)]) == EXIT_OK
    return d


def test_help_and_bad_args(capsys):
    assert main(["--help"]) == EXIT_OK
    assert main([]) == EXIT_VALIDATION
    assert main(["synth", "--layout", "maze", "--out", "x"]) == EXIT_VALIDATION
    assert main(["--jobs", "0", "synth", "--out", "x"]) == EXIT_VALIDATION


@pytest.mark.filterwarnings("ignore:patches cover")
def test_stagewise_run(scene, tmp_path, capsys):
    assert read_json(scene / "scene.json")["extents"] == 4.0
    lidar, radar = tmp_path / "lidar.ply", tmp_path / "radar.ply"
    traj = str(scene / "trajectory.csv")
    assert main(["map-build", "--sensor", "lidar", "--scans", str(scene / "lidar"), "--traj", traj, "--out", str(lidar)]) == 0
    assert main(["map-build", "--sensor", "radar", "--scans", str(scene / "radar"), "--traj", traj, "--out", str(radar)]) == 0
    assert (tmp_path / "lidar.csv").is_file()

    write_json(tmp_path / "sampler.json", {"lidar_patch_size": 128, "radar_patch_size": 32, "anchors_per_seed": 1})
    patches = tmp_path / "patches"
    assert main(["patch-sample", "--jobs", "2", "--lidar", str(lidar), "--radar", str(radar), "--traj", traj,
                 "--config", str(tmp_path / "sampler.json"), "--out", str(patches)]) == 0

    net = {k: v for k, v in NetworkConfig.tiny().to_dict().items()}
    write_json(tmp_path / "train.json", {"network": net, "train": {"epochs": 1, "base_lr": 1e-3}})
    ckpt = tmp_path / "ckpt"
    assert main(["train", "--patches", str(patches), "--config", str(tmp_path / "train.json"), "--out", str(ckpt)]) == 0
    pred = tmp_path / "pred"
    assert main(["infer", "--ckpt", str(ckpt / "last.ckpt"), "--patches", str(patches), "--out", str(pred)]) == 0
    out = tmp_path / "rmap.ply"
    assert main(["assemble", "--pred", str(pred), "--manifest", str(patches / "patches.json"), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--pred", str(radar), "--gt", str(lidar), "--frame", "world", "--csv",
                 str(tmp_path / "r.csv"), "--out", str(tmp_path / "r.json")]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == read_json(tmp_path / "r.json")
    assert (tmp_path / "r.csv").read_text().startswith("radar,")


def test_validation_errors(scene, tmp_path, capsys):
    assert main(["map-build", "--sensor", "lidar", "--scans", str(scene / "lidar"), "--traj",
                 str(tmp_path / "missing.csv"), "--out", str(tmp_path / "m.ply")]) == EXIT_VALIDATION
    assert "missing.csv" in capsys.readouterr().err
    write_json(tmp_path / "bad.json", {"nope": 1})
    assert main(["patch-sample", "--lidar", "a", "--radar", "b", "--traj", "c", "--config", str(tmp_path / "bad.json"),
                 "--out", str(tmp_path)]) == EXIT_VALIDATION
    (tmp_path / "broken.ply").write_text("not a ply")
    write_ply(tmp_path / "ok.ply", np.zeros((1, 3)))
    assert main(["evaluate", "--pred", str(tmp_path / "broken.ply"), "--gt", str(tmp_path / "ok.ply"),
                 "--out", str(tmp_path / "r.json")]) == EXIT_VALIDATION


def test_pipeline_stage_failure(scene, tmp_path, capsys):
    cfg = {"out_dir": str(tmp_path / "o"), "lidar_scans": str(scene / "lidar"), "radar_scans": str(scene / "radar"),
           "trajectory": str(tmp_path / "gone.csv")}
    write_json(tmp_path / "p.json", cfg)
    assert main(["pipeline", "--config", str(tmp_path / "p.json")]) == EXIT_STAGE
    err = capsys.readouterr().err
    assert "map-build" in err and "gone.csv" in err
