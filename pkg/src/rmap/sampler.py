"""Trajectory-seeded joint patch sampling over paired lidar/radar map clouds.

Seeds are trajectory positions spaced more than ``seed_threshold`` apart.
Around each seed the ``subpatch_factor * lidar_patch_size`` nearest lidar
points form a neighborhood; farthest-point sampling inside it picks
``anchors_per_seed`` anchors, and each anchor grows one lidar patch and one
radar patch by nearest-neighbor region growing.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geom import PointCloud, SpatialIndex, Trajectory, as_points, fps_indices


@dataclass
class SamplerConfig:
    seed_threshold: float = 1.5
    lidar_patch_size: int = 8192
    radar_patch_size: int = 2048
    subpatch_factor: float = 4.0
    anchors_per_seed: int = 4

    def __post_init__(self):
        if not self.lidar_patch_size >= self.radar_patch_size >= 1:
            raise ValueError("need lidar_patch_size >= radar_patch_size >= 1")
        if not self.subpatch_factor > 1:
            raise ValueError("subpatch_factor must exceed 1")
        if self.anchors_per_seed < 1:
            raise ValueError("anchors_per_seed must be >= 1")
        if self.subpatch_factor * self.lidar_patch_size < self.anchors_per_seed:
            raise ValueError("subpatch must hold at least anchors_per_seed points")
        if not self.seed_threshold > 0:
            raise ValueError("seed_threshold must be positive")

    @property
    def subpatch_size(self) -> int:
        return int(math.ceil(self.subpatch_factor * self.lidar_patch_size))


@dataclass(frozen=True, eq=False)
class PatchPair:
    anchor: np.ndarray
    radar_patch: PointCloud
    lidar_patch: PointCloud
    seed_index: int
    anchor_index: int
    lidar_indices: np.ndarray
    radar_indices: np.ndarray


def select_seed_points(traj, seed_threshold: float) -> np.ndarray:
    """Greedy time-ordered seeds: keep a position iff it is farther than the
    threshold from every seed kept so far. Returns (S, 3) positions."""
    pos = traj.positions if isinstance(traj, Trajectory) else as_points(traj)
    if len(pos) == 0:
        raise ValueError("trajectory is empty")
    seeds = [pos[0]]
    for p in pos[1:]:
        d = np.linalg.norm(np.asarray(seeds) - p, axis=1)
        if np.all(d > seed_threshold):
            seeds.append(p)
    return np.array(seeds)


def sample_patches(lidar, radar, traj, cfg: SamplerConfig | None = None, jobs: int = 1) -> list[PatchPair]:
    cfg = cfg or SamplerConfig()
    lidar_pts, radar_pts = as_points(lidar), as_points(radar)
    if len(lidar_pts) == 0 or len(radar_pts) == 0:
        raise ValueError("lidar and radar clouds must be non-empty")
    if len(lidar_pts) < cfg.anchors_per_seed:
        raise ValueError("lidar cloud has fewer points than anchors_per_seed")
    if len(lidar_pts) < cfg.lidar_patch_size or len(radar_pts) < cfg.radar_patch_size:
        warnings.warn(
            f"map smaller than patch size (lidar {len(lidar_pts)}/{cfg.lidar_patch_size}, "
            f"radar {len(radar_pts)}/{cfg.radar_patch_size}); patches saturate to the full cloud",
            stacklevel=2,
        )
    lidar_index = SpatialIndex(lidar_pts)
    radar_index = SpatialIndex(radar_pts)
    seeds = select_seed_points(traj, cfg.seed_threshold)

    def per_seed(s):
        seed_idx, seed = s
        base, _ = lidar_index.query(seed, cfg.subpatch_size)
        # base is distance-sorted, so position 0 is the point nearest the seed
        anchors = base[fps_indices(lidar_pts[base], cfg.anchors_per_seed, start=0)]
        out = []
        for a_i, a in enumerate(anchors):
            anchor = lidar_pts[a]
            li, _ = lidar_index.query(anchor, cfg.lidar_patch_size)
            ri, _ = radar_index.query(anchor, cfg.radar_patch_size)
            out.append(PatchPair(
                anchor=anchor.copy(),
                radar_patch=PointCloud(radar_pts[ri]),
                lidar_patch=PointCloud(lidar_pts[li]),
                seed_index=seed_idx,
                anchor_index=a_i,
                lidar_indices=li,
                radar_indices=ri,
            ))
        return out

    work = list(enumerate(seeds))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            groups = list(ex.map(per_seed, work))
    else:
        groups = [per_seed(w) for w in work]
    return [p for g in groups for p in g]


def lidar_coverage(patches: list[PatchPair], n_lidar: int) -> np.ndarray:
    """Boolean mask of lidar map points that landed in at least one patch."""
    covered = np.zeros(n_lidar, dtype=bool)
    for p in patches:
        covered[p.lidar_indices] = True
    return covered


def check_coverage(patches, n_lidar: int) -> float:
    """Fraction of lidar points covered; warns (does not raise) when < 1."""
    frac = float(lidar_coverage(patches, n_lidar).mean()) if n_lidar else 1.0
    if frac < 1.0:
        warnings.warn(f"patches cover {frac:.1%} of the lidar map", stacklevel=2)
    return frac
