"""Chamfer distances, F-Score and the deviation distribution between clouds."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geom import as_points

PERCENTILES = (50, 75, 90, 95)
CD_SCALE = 1000.0

L1_EUCLIDEAN = "l1_euclidean"
L2_SQUARED = "l2_squared"
L2_EUCLIDEAN = "l2_euclidean"


def _pair(pred, gt):
    p, g = as_points(pred), as_points(gt)
    if len(p) == 0 or len(g) == 0:
        raise ValueError("empty cloud")
    return p, g


def nn_distances(src, dst) -> np.ndarray:
    """Distance from every ``src`` point to its nearest ``dst`` point."""
    _, d = kernels.nearest_neighbor(src, dst)
    return d


def chamfer(pred, gt, norm: str = L1_EUCLIDEAN) -> float:
    """Symmetric Chamfer distance (raw, unscaled).

    ``l1_euclidean`` averages plain nearest-neighbor distances,
    ``l2_squared`` averages their squares. ``l2_euclidean`` is an alias of the
    first, kept for callers reading the l2 metric as an unsquared norm.
    """
    p, g = _pair(pred, gt)
    d_pg = nn_distances(p, g)
    d_gp = nn_distances(g, p)
    if norm in (L1_EUCLIDEAN, L2_EUCLIDEAN):
        return float(d_pg.mean() + d_gp.mean())
    if norm == L2_SQUARED:
        return float((d_pg * d_pg).mean() + (d_gp * d_gp).mean())
    raise ValueError(f"unknown norm {norm!r}")


def precision_recall(pred, gt, d: float = 0.01):
    """Fractions of pred points (precision) and gt points (recall) strictly closer than ``d``."""
    if not d > 0:
        raise ValueError("distance threshold must be positive")
    p, g = _pair(pred, gt)
    precision = float((nn_distances(p, g) < d).mean())
    recall = float((nn_distances(g, p) < d).mean())
    return precision, recall


def fscore(pred, gt, d: float = 0.01) -> float:
    precision, recall = precision_recall(pred, gt, d)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def nearest_rank(values, percentiles=PERCENTILES) -> dict:
    """Nearest-rank percentiles: the ceil(p/100 * n)-th smallest value."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = len(v)
    out = {}
    for q in percentiles:
        if not 0 < q <= 100:
            raise ValueError(f"percentile {q} outside (0, 100]")
        rank = max(1, math.ceil(q / 100.0 * n))
        out[q] = float(v[rank - 1])
    return out


def deviation_distribution(pred, gt, percentiles=PERCENTILES) -> dict:
    """Percentiles of the distance from each gt point to the nearest pred point."""
    p, g = _pair(pred, gt)
    return nearest_rank(nn_distances(g, p), percentiles)


@dataclass
class MetricsReport:
    cd_l1: float
    cd_l2: float
    fscore: float
    deviation_percentiles: dict = field(default_factory=dict)
    n_pred: int = 0
    n_gt: int = 0
    frame: str = "normalized"

    def to_dict(self) -> dict:
        return {
            "cd_l1": self.cd_l1,
            "cd_l2": self.cd_l2,
            "fscore": self.fscore,
            "deviation_percentiles": {str(k): v for k, v in sorted(self.deviation_percentiles.items())},
            "n_pred": self.n_pred,
            "n_gt": self.n_gt,
            "frame": self.frame,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> MetricsReport:
        dev = {int(k): float(v) for k, v in d["deviation_percentiles"].items()}
        return cls(d["cd_l1"], d["cd_l2"], d["fscore"], dev, d["n_pred"], d["n_gt"], d.get("frame", "normalized"))

    def deviation_row(self) -> str:
        return "[" + ", ".join(f"{self.deviation_percentiles[q]:.3f}" for q in sorted(self.deviation_percentiles)) + "]"

    def csv_row(self, name: str = "") -> str:
        """``name,CD-l1,CD-l2,F-Score,[p50, p75, p90, p95]`` in table order."""
        return f'{name},{self.cd_l1:.3f},{self.cd_l2:.3f},{self.fscore:.3f},"{self.deviation_row()}"'


def evaluate(pred, gt, frame: str = "normalized", fscore_d: float = 0.01,
             l2_norm: str = L2_SQUARED, percentiles=PERCENTILES) -> MetricsReport:
    """All metrics for one prediction; Chamfer values are reported x1000."""
    p, g = _pair(pred, gt)
    if frame not in ("normalized", "world"):
        raise ValueError(f"unknown frame {frame!r}")
    return MetricsReport(
        cd_l1=chamfer(p, g, L1_EUCLIDEAN) * CD_SCALE,
        cd_l2=chamfer(p, g, l2_norm) * CD_SCALE,
        fscore=fscore(p, g, fscore_d),
        deviation_percentiles=deviation_distribution(p, g, percentiles),
        n_pred=len(p),
        n_gt=len(g),
        frame=frame,
    )
