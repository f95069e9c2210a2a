"""Radar map densification: occupancy mapping, patch sampling, a small
point-cloud upsampling transformer, and map-level evaluation."""

from .geom import PointCloud, Pose, Trajectory
from .metrics import MetricsReport, evaluate
from .model import NetworkConfig, UpPoinTr
from .occupancy import OccupancyMap, RadarSensorConfig, build_map
from .pipeline import PipelineConfig, run_pipeline
from .sampler import PatchPair, SamplerConfig, sample_patches
from .synth import SceneSpec, synth_scene

__version__ = "0.1.0"

__all__ = [
    "MetricsReport",
    "NetworkConfig",
    "OccupancyMap",
    "PatchPair",
    "PipelineConfig",
    "PointCloud",
    "Pose",
    "RadarSensorConfig",
    "SamplerConfig",
    "SceneSpec",
    "Trajectory",
    "UpPoinTr",
    "build_map",
    "evaluate",
    "run_pipeline",
    "sample_patches",
    "synth_scene",
]
