"""Patch normalization for the network and merging of predicted patches into a map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import WORLD, PointCloud, as_points
from .occupancy import pack_keys, unpack_keys, voxel_centers, voxel_keys


@dataclass(frozen=True)
class PatchTransform:
    """Similarity transform x -> (x - center) / scale."""

    center: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        if not self.scale > 0:
            raise ValueError("zero scale: all points coincide with the anchor")

    def apply(self, points) -> np.ndarray:
        return (as_points(points) - self.center) / self.scale

    def invert(self, points) -> np.ndarray:
        return as_points(points) * self.scale + self.center


def patch_scale(patch, anchor) -> float:
    """Largest distance from ``anchor`` to any point of ``patch``."""
    d = as_points(patch) - np.asarray(anchor, dtype=np.float64)
    return float(np.sqrt((d * d).sum(axis=1)).max())


def normalize_patch(patch, anchor, scale: float | None = None):
    """Center on ``anchor`` and divide by ``scale``.

    ``scale`` defaults to the patch's own radius around the anchor; pass the
    paired lidar patch's radius to put a radar patch in the same frame.
    """
    pts = as_points(patch)
    if len(pts) == 0:
        raise ValueError("empty patch")
    if scale is None:
        scale = patch_scale(pts, anchor)
    if not scale > 0:
        raise ValueError("zero scale: all points coincide with the anchor")
    tf = PatchTransform(anchor, scale)
    return tf.apply(pts), tf


def denormalize_patch(points, tf: PatchTransform) -> np.ndarray:
    return tf.invert(points)


def merge_predictions(patches, resolution: float = 0.15) -> PointCloud:
    """Union of denormalized patches, snapped to one voxel center per occupied voxel.

    Output is sorted by voxel key, so the merge is order-independent.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    packed = [pack_keys(voxel_keys(denormalize_patch(pts, tf), resolution)) for pts, tf in patches]
    if not packed:
        return PointCloud.empty(WORLD)
    keys = unpack_keys(np.unique(np.concatenate(packed)))
    return PointCloud(voxel_centers(keys, resolution), WORLD)
