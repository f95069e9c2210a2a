"""End-to-end orchestration: maps, patches, training, inference, assembly, evaluation.

Every stage reads and writes plain PLY/JSON artifacts so any stage can be
re-run from the outputs of the previous one.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .assembly import PatchTransform, merge_predictions, patch_scale
from .geom import WORLD, PointCloud
from .io import load_scan_dir, read_json, read_ply, read_trajectory, write_json, write_ply
from .metrics import MetricsReport, evaluate
from .model import NetworkConfig, UpPoinTr
from .occupancy import RadarSensorConfig, build_map, map_ratio, occupied_centers
from .sampler import PatchPair, SamplerConfig, check_coverage, sample_patches
from .synth import SceneSpec, synth_scene, write_scene
from .train import TrainConfig, Trainer, dataset_from_pairs, load_model, pair_input

log = logging.getLogger(__name__)

STAGES = ("map-build", "patch-sample", "train", "infer", "assemble", "evaluate")
SEED_ENV = "RMAP_SEED"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass
class PipelineConfig:
    """One document holding every module's settings.

    Input is either ``scene`` (a synthetic scene generated into the output
    directory) or the three paths ``lidar_scans``, ``radar_scans`` and
    ``trajectory``. The top-level ``seed`` overrides every nested seed.
    """

    out_dir: str = "rmap_out"
    seed: int = 0
    scene: dict | None = None
    lidar_scans: str | None = None
    radar_scans: str | None = None
    trajectory: str | None = None
    resolution: float = 0.15
    radar: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=dict)
    network: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    fscore_d: float = 0.01
    jobs: int = 1
    checkpoint: str | None = None
    skip_train: bool = False

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        paths = (self.lidar_scans, self.radar_scans, self.trajectory)
        if self.scene is None and any(p is None for p in paths):
            raise ValueError("give either a scene or lidar_scans, radar_scans and trajectory")
        if self.skip_train and not self.checkpoint:
            raise ValueError("skip_train needs a checkpoint")
        # build every sub-config now so bad values fail at load time
        self.scene_spec()
        self.radar_config()
        self.sampler_config()
        self.network_config()
        self.train_config()

    def scene_spec(self) -> SceneSpec | None:
        if self.scene is None:
            return None
        return SceneSpec.from_dict({**self.scene, "seed": self.seed})

    def radar_config(self) -> RadarSensorConfig:
        unknown = set(self.radar) - {f.name for f in fields(RadarSensorConfig)}
        if unknown:
            raise ValueError(f"unknown radar keys: {sorted(unknown)}")
        return RadarSensorConfig(**self.radar)

    def sampler_config(self) -> SamplerConfig:
        unknown = set(self.sampler) - {f.name for f in fields(SamplerConfig)}
        if unknown:
            raise ValueError(f"unknown sampler keys: {sorted(unknown)}")
        return SamplerConfig(**self.sampler)

    def network_config(self) -> NetworkConfig:
        return NetworkConfig.from_dict({**self.network, "seed": self.seed})

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict({**self.train, "seed": self.seed})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict, env=None) -> PipelineConfig:
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown pipeline keys: {sorted(unknown)}")
        d = dict(d)
        env = os.environ if env is None else env
        if env.get(SEED_ENV):
            d["seed"] = int(env[SEED_ENV])
        return cls(**d)

    @classmethod
    def load(cls, path, env=None) -> PipelineConfig:
        return cls.from_dict(read_json(path), env)

    @classmethod
    def desk(cls, **kw) -> PipelineConfig:
        """Laptop-scale preset on the synthetic corridor."""
        base = dict(
            scene={"layout": "corridor"},
            sampler={"lidar_patch_size": 1024, "radar_patch_size": 256},
            network=NetworkConfig.desk().to_dict(),
            # many patches per epoch: a smaller, slower-decaying step than the
            # single-patch desk schedule
            train=TrainConfig.desk(base_lr=1e-3, decay_every=20, epochs=100).to_dict(),
        )
        base.update(kw)
        for k in ("network", "train"):
            base[k] = {key: v for key, v in base[k].items() if key != "seed"}
        return cls(**base)


# -- stage functions (also used by the CLI) -------------------------------------

def map_build(sensor: str, scans_dir, traj_path, resolution=0.15, radar_cfg=None):
    """Occupancy map of one sensor from a scan directory and a trajectory file."""
    traj = read_trajectory(traj_path)
    scans = load_scan_dir(scans_dir)
    return build_map(scans, traj, sensor, resolution, radar_cfg)


def write_map(path, m) -> PointCloud:
    """Write the occupied voxel centers as PLY and the log-odds table as CSV."""
    path = Path(path)
    cloud = occupied_centers(m)
    write_ply(path, cloud)
    m.to_csv(path.with_suffix(".csv"))
    return cloud


def write_patches(out_dir, pairs: list[PatchPair], cfg: SamplerConfig) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, p in enumerate(pairs):
        write_ply(out / f"patch_{k}_radar.ply", p.radar_patch)
        write_ply(out / f"patch_{k}_lidar.ply", p.lidar_patch)
        entries.append({
            "index": k,
            "anchor": [float(v) for v in p.anchor],
            "seed_index": int(p.seed_index),
            "anchor_index": int(p.anchor_index),
            "n_radar": len(p.radar_patch),
            "n_lidar": len(p.lidar_patch),
            "scale": patch_scale(p.lidar_patch, p.anchor),
        })
    manifest = {"sampler": {f.name: getattr(cfg, f.name) for f in fields(cfg)}, "patches": entries}
    write_json(out / "patches.json", manifest)
    return manifest


def patch_sample(lidar_ply, radar_ply, traj_path, out_dir, cfg: SamplerConfig | None = None, jobs=1):
    cfg = cfg or SamplerConfig()
    lidar = read_ply(lidar_ply)
    radar = read_ply(radar_ply)
    traj = read_trajectory(traj_path)
    pairs = sample_patches(lidar, radar, traj, cfg, jobs=jobs)
    check_coverage(pairs, len(lidar))
    return write_patches(out_dir, pairs, cfg)


def load_patches(patch_dir):
    """``(manifest, [PatchPair])`` read back from a patch directory."""
    d = Path(patch_dir)
    manifest = read_json(d / "patches.json")
    pairs = []
    for e in manifest["patches"]:
        k = e["index"]
        pairs.append(PatchPair(
            anchor=np.asarray(e["anchor"], dtype=np.float64),
            radar_patch=read_ply(d / f"patch_{k}_radar.ply"),
            lidar_patch=read_ply(d / f"patch_{k}_lidar.ply"),
            seed_index=e["seed_index"],
            anchor_index=e["anchor_index"],
            lidar_indices=np.empty(0, dtype=np.int64),
            radar_indices=np.empty(0, dtype=np.int64),
        ))
    return manifest, pairs


def train_patches(patch_dir, cfg: NetworkConfig, hyper: TrainConfig, out_dir) -> Path:
    """Train on every patch in ``patch_dir``; returns the final checkpoint path."""
    _, pairs = load_patches(patch_dir)
    data, _ = dataset_from_pairs(pairs, cfg)
    trainer = Trainer(UpPoinTr(cfg), data, hyper)
    trainer.fit(ckpt_dir=out_dir)
    write_json(Path(out_dir) / "history.json", {"epoch_mean_loss": trainer.history})
    return Path(out_dir) / "last.ckpt"


def infer(ckpt, patch_dir, out_dir, batch_size=16) -> list[Path]:
    """Predict every patch; outputs ``patch_{k}_pred.ply`` in the normalized frame."""
    model = load_model(ckpt)
    _, pairs = load_patches(patch_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for s in range(0, len(pairs), batch_size):
        xs = np.stack([pair_input(p, model.cfg.n_in) for p in pairs[s:s + batch_size]])
        final = model.predict(xs)[-1]
        for j, pts in enumerate(final):
            path = out / f"patch_{s + j}_pred.ply"
            write_ply(path, PointCloud(pts, WORLD))
            written.append(path)
    return written


def assemble(pred_dir, manifest_path, resolution, out_path) -> PointCloud:
    manifest = read_json(manifest_path)
    parts = []
    for e in manifest["patches"]:
        pts = read_ply(Path(pred_dir) / f"patch_{e['index']}_pred.ply").points
        parts.append((pts, PatchTransform(np.asarray(e["anchor"]), e["scale"])))
    cloud = merge_predictions(parts, resolution)
    write_ply(out_path, cloud)
    return cloud


# -- orchestration ---------------------------------------------------------------

class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def run_pipeline(cfg: PipelineConfig, stop_after: str | None = None) -> MetricsReport:
    """Run every stage under ``cfg.out_dir`` and return the prediction's report.

    Writes ``report.json`` with the input radar map and the predicted map both
    scored against the lidar map.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.to_dict())

    with _Stage("map-build"):
        spec = cfg.scene_spec()
        if spec is not None:
            lidar_scans, radar_scans, traj = synth_scene(spec)
            write_scene(out / "scene", lidar_scans, radar_scans, traj)
            traj_path = out / "scene" / "trajectory.csv"
            lidar_dir, radar_dir = out / "scene" / "lidar", out / "scene" / "radar"
        else:
            traj_path, lidar_dir, radar_dir = Path(cfg.trajectory), Path(cfg.lidar_scans), Path(cfg.radar_scans)
        lidar_map = map_build("lidar", lidar_dir, traj_path, cfg.resolution)
        radar_map = map_build("radar", radar_dir, traj_path, cfg.resolution, cfg.radar_config())
        lidar_cloud = write_map(out / "lidar_map.ply", lidar_map)
        radar_cloud = write_map(out / "radar_map.ply", radar_map)
        write_json(out / "maps.json", {
            "resolution": cfg.resolution,
            "lidar_occupied": lidar_map.n_occupied(),
            "radar_occupied": radar_map.n_occupied(),
            "ratio": map_ratio(lidar_map, radar_map),
        })
    if stop_after == "map-build":
        return None

    with _Stage("patch-sample"):
        manifest = patch_sample(out / "lidar_map.ply", out / "radar_map.ply", traj_path, out / "patches",
                                cfg.sampler_config(), cfg.jobs)
        if not manifest["patches"]:
            raise StageError("patch-sample", ValueError("no patches sampled"))
    if stop_after == "patch-sample":
        return None

    with _Stage("train"):
        if cfg.skip_train:
            ckpt = Path(cfg.checkpoint)
            if not ckpt.is_file():
                raise FileNotFoundError(f"checkpoint not found: {ckpt}")
        else:
            ckpt = train_patches(out / "patches", cfg.network_config(), cfg.train_config(), out / "ckpt")
    if stop_after == "train":
        return None

    with _Stage("infer"):
        infer(ckpt, out / "patches", out / "pred")

    with _Stage("assemble"):
        pred_cloud = assemble(out / "pred", out / "patches" / "patches.json", cfg.resolution, out / "rmap.ply")

    with _Stage("evaluate"):
        radar_report = evaluate(radar_cloud, lidar_cloud, frame="world", fscore_d=cfg.fscore_d)
        pred_report = evaluate(pred_cloud, lidar_cloud, frame="world", fscore_d=cfg.fscore_d)
        write_json(out / "report.json", {"input_radar": radar_report.to_dict(), "predicted": pred_report.to_dict()})
    return pred_report

