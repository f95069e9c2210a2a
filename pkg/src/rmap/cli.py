"""Command-line interface.

Exit codes: 0 success, 2 validation error (bad arguments, config or input
files), 3 stage failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .io import FormatError, read_json, read_ply, write_json
from .metrics import evaluate
from .model import NetworkConfig
from .occupancy import RadarSensorConfig
from .pipeline import PipelineConfig, StageError, assemble, infer, map_build, patch_sample, run_pipeline, train_patches, write_map
from .sampler import SamplerConfig
from .synth import LAYOUTS, SceneSpec, synth_scene, write_scene
from .train import TrainConfig

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STAGE = 3

log = logging.getLogger("rmap")


class ValidationError(Exception):
    pass


def _dataclass_from(cls, d, what):
    unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise ValidationError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**d)


def cmd_synth(a):
    spec = SceneSpec(layout=a.layout, extents=a.extents, wall_noise_sigma=a.noise, radar_dropout=a.dropout,
                     radar_clutter_rate=a.clutter, seed=a.seed)
    write_scene(a.out, *synth_scene(spec))
    write_json(Path(a.out) / "scene.json", spec.to_dict())


def cmd_map_build(a):
    radar_cfg = _dataclass_from(RadarSensorConfig, read_json(a.radar_config), "radar") if a.radar_config else None
    m = map_build(a.sensor, a.scans, a.traj, a.res, radar_cfg)
    cloud = write_map(a.out, m)
    log.info("%d occupied voxels -> %s", len(cloud), a.out)


def cmd_patch_sample(a):
    cfg = _dataclass_from(SamplerConfig, read_json(a.config), "sampler") if a.config else SamplerConfig()
    manifest = patch_sample(a.lidar, a.radar, a.traj, a.out, cfg, a.jobs)
    log.info("%d patches -> %s", len(manifest["patches"]), a.out)


def _train_configs(path):
    """``(NetworkConfig, TrainConfig)`` from a JSON doc with ``network`` and ``train`` sections."""
    if path is None:
        return NetworkConfig.desk(), TrainConfig.desk()
    doc = read_json(path)
    unknown = set(doc) - {"network", "train"}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return NetworkConfig.from_dict(doc.get("network", {})), TrainConfig.from_dict(doc.get("train", {}))


def cmd_train(a):
    net, hyper = _train_configs(a.config)
    ckpt = train_patches(a.patches, net, hyper, a.out)
    log.info("checkpoint -> %s", ckpt)


def cmd_infer(a):
    paths = infer(a.ckpt, a.patches, a.out)
    log.info("%d predictions -> %s", len(paths), a.out)


def cmd_assemble(a):
    cloud = assemble(a.pred, a.manifest, a.res, a.out)
    log.info("%d voxels -> %s", len(cloud), a.out)


def cmd_evaluate(a):
    report = evaluate(read_ply(a.pred), read_ply(a.gt), frame=a.frame, fscore_d=a.fscore_d)
    write_json(a.out, report.to_dict())
    if a.csv:
        with open(a.csv, "w", newline="\n") as f:
            f.write(report.csv_row(Path(a.pred).stem) + "\n")
    print(report.to_json())


def cmd_pipeline(a):
    if a.config:
        doc = read_json(a.config)
    else:
        doc = PipelineConfig.desk().to_dict()
    if a.out:
        doc["out_dir"] = a.out
    if a.jobs is not None:
        doc["jobs"] = a.jobs
    if a.ckpt:
        doc["checkpoint"] = a.ckpt
    if a.skip_train:
        doc["skip_train"] = True
    cfg = PipelineConfig.from_dict(doc)
    report = run_pipeline(cfg)
    print(json.dumps(read_json(Path(cfg.out_dir) / "report.json"), indent=2))
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmap", description="Radar map densification from paired lidar/radar scans.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--jobs", type=int, default=None, help="cap on worker parallelism (default 1)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="cap on worker parallelism")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic scene (lidar/, radar/, trajectory.csv)")
    s.add_argument("--layout", choices=LAYOUTS, default="corridor")
    s.add_argument("--extents", type=float, default=12.0, help="scene length in meters")
    s.add_argument("--noise", type=float, default=SceneSpec.wall_noise_sigma, help="radar noise sigma (m)")
    s.add_argument("--dropout", type=float, default=SceneSpec.radar_dropout, help="radar return dropout probability")
    s.add_argument("--clutter", type=float, default=SceneSpec.radar_clutter_rate, help="false returns per radar scan")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("map-build", parents=[common], help="build an occupancy map and export occupied voxel centers")
    s.add_argument("--sensor", choices=("lidar", "radar"), required=True)
    s.add_argument("--res", type=float, default=0.15, help="voxel size (m)")
    s.add_argument("--scans", required=True, help="directory of {timestamp}.ply scans")
    s.add_argument("--traj", required=True, help="trajectory CSV t,x,y,z,qw,qx,qy,qz")
    s.add_argument("--radar-config", help="JSON radar sensor model parameters")
    s.add_argument("--out", required=True, help="output PLY (a .csv log-odds dump is written beside it)")
    s.set_defaults(func=cmd_map_build)

    s = sub.add_parser("patch-sample", parents=[common], help="extract paired lidar/radar patches along the trajectory")
    s.add_argument("--lidar", required=True, help="lidar map PLY")
    s.add_argument("--radar", required=True, help="radar map PLY")
    s.add_argument("--traj", required=True, help="trajectory CSV")
    s.add_argument("--config", help="JSON sampler parameters")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_patch_sample)

    s = sub.add_parser("train", parents=[common], help="train the network on a patch directory")
    s.add_argument("--patches", required=True)
    s.add_argument("--config", help="JSON with 'network' and 'train' sections (default: desk preset)")
    s.add_argument("--out", required=True, help="checkpoint directory")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("infer", parents=[common], help="predict dense patches from a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--patches", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("assemble", parents=[common], help="merge predicted patches into one map")
    s.add_argument("--pred", required=True, help="directory of patch_{k}_pred.ply")
    s.add_argument("--manifest", required=True, help="patches.json")
    s.add_argument("--res", type=float, default=0.15)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_assemble)

    s = sub.add_parser("evaluate", parents=[common], help="Chamfer, F-score and deviation percentiles")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--frame", choices=("world", "normalized"), default="normalized")
    s.add_argument("--fscore-d", type=float, default=0.01)
    s.add_argument("--csv", help="also write one table row as CSV")
    s.add_argument("--out", required=True, help="report JSON")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("pipeline", parents=[common], help="run every stage end to end")
    s.add_argument("--config", help="pipeline JSON (default: desk preset on the synthetic corridor)")
    s.add_argument("--out", help="output directory (overrides out_dir)")
    s.add_argument("--skip-train", action="store_true", help="reuse --ckpt instead of training")
    s.add_argument("--ckpt", help="checkpoint file")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.jobs is not None and args.jobs < 1:
        print("rmap: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command != "pipeline":
        args.jobs = args.jobs or 1
    try:
        args.func(args)
    except StageError as e:
        print(f"rmap: error: {e}", file=sys.stderr)
        return EXIT_STAGE
    except (ValidationError, FormatError, FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"rmap: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:  # noqa: BLE001
        print(f"rmap: error: {args.command} failed: {e}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
