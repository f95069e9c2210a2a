"""Training loop: batched AdamW over patch pairs with the continuous lr decay."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .assembly import normalize_patch, patch_scale
from .kernels import farthest_point_sampling
from .model import NetworkConfig, UpPoinTr, stage_targets, total_loss
from .nn.checkpoint import load_arrays, save_arrays
from .nn.optim import OptimizerState, adamw_step, lr_schedule
from .nn.tensor import no_grad

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    base_lr: float = 1e-5
    weight_decay: float = 5e-5
    batch_size: int = 16
    epochs: int = 600
    lr_decay: float = 0.9
    decay_every: float = 20
    stepwise_decay: bool = False
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        self.betas = tuple(self.betas)
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown training keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def paper(cls, **kw):
        return cls(**kw)

    @classmethod
    def desk(cls, **kw):
        """Laptop-scale schedule: a larger step that decays every 2 epochs
        instead of every 20, so the step has mostly died out by epoch ~100."""
        base = dict(base_lr=1e-2, weight_decay=5e-5, batch_size=16, epochs=200, decay_every=2)
        base.update(kw)
        return cls(**base)


class PatchDataset:
    """Normalized network inputs with FPS-downsampled targets for every stage."""

    def __init__(self, inputs, gts, stage_sizes):
        self.inputs = np.asarray(inputs, dtype=np.float64)
        self.gts = np.asarray(gts, dtype=np.float64)
        if len(self.inputs) == 0:
            raise ValueError("empty dataset")
        if len(self.inputs) != len(self.gts):
            raise ValueError("inputs and ground truths differ in count")
        self.stage_sizes = list(stage_sizes)
        self.targets = stage_targets(self.gts, self.stage_sizes)

    def __len__(self):
        return len(self.inputs)

    def batch(self, idx):
        return self.inputs[idx], [t[idx] for t in self.targets]


class Trainer:
    def __init__(self, model: UpPoinTr, dataset: PatchDataset, hyper: TrainConfig):
        self.model = model
        self.data = dataset
        self.hyper = hyper
        self.opt = OptimizerState(lr=hyper.base_lr, weight_decay=hyper.weight_decay, betas=hyper.betas, eps=hyper.eps)
        self.rng = np.random.default_rng(hyper.seed)
        self.epoch = 0
        self.history: list[float] = []

    def lr(self, epoch=None) -> float:
        h = self.hyper
        return lr_schedule(self.epoch if epoch is None else epoch, h.base_lr, h.lr_decay, h.decay_every, h.stepwise_decay)

    def run_epoch(self) -> float:
        self.opt.lr = self.lr()
        params = list(self.model.named_parameters())
        order = self.rng.permutation(len(self.data))
        total = 0.0
        for s in range(0, len(order), self.hyper.batch_size):
            idx = order[s:s + self.hyper.batch_size]
            x, targets = self.data.batch(idx)
            loss = total_loss(self.model(x), targets=targets)
            self.model.zero_grad()
            loss.backward()
            adamw_step(params, self.opt)
            total += loss.item() * len(idx)
        mean_j = total / len(self.data)
        self.history.append(mean_j)
        self.epoch += 1
        return mean_j

    def fit(self, epochs=None, ckpt_dir=None) -> list[float]:
        """Train up to ``epochs`` total (default: the configured count)."""
        end = self.hyper.epochs if epochs is None else epochs
        every = self.hyper.checkpoint_every
        while self.epoch < end:
            j = self.run_epoch()
            log.info("epoch %d  lr %.3g  J %.6f", self.epoch, self.opt.lr, j)
            if ckpt_dir is not None and every and self.epoch % every == 0:
                self.save(Path(ckpt_dir) / f"epoch_{self.epoch:04d}.ckpt")
        if ckpt_dir is not None:
            self.save(Path(ckpt_dir) / "last.ckpt")
        return self.history

    def evaluate_loss(self) -> float:
        with no_grad():
            x, targets = self.data.batch(np.arange(len(self.data)))
            return total_loss(self.model(x), targets=targets).item()

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {f"param/{k}": v for k, v in self.model.state_dict().items()}
        arrays.update({f"optim/{k}": v for k, v in self.opt.arrays().items()})
        meta = {
            "network": self.model.cfg.to_dict(),
            "train": self.hyper.to_dict(),
            "epoch": self.epoch,
            "history": self.history,
            "optim_step": self.opt.step,
            "rng": self.rng.bit_generator.state,
        }
        save_arrays(path, arrays, meta)

    def load(self, path) -> None:
        arrays, meta = load_arrays(path)
        self.model.load_state_dict({k[6:]: v for k, v in arrays.items() if k.startswith("param/")})
        self.opt.load_arrays({k[6:]: v for k, v in arrays.items() if k.startswith("optim/")})
        self.opt.step = meta["optim_step"]
        self.epoch = meta["epoch"]
        self.history = list(meta["history"])
        self.rng.bit_generator.state = meta["rng"]


def load_model(path) -> UpPoinTr:
    """Network with weights from a checkpoint written by :meth:`Trainer.save`."""
    arrays, meta = load_arrays(path)
    model = UpPoinTr(NetworkConfig.from_dict(meta["network"]))
    model.load_state_dict({k[6:]: v for k, v in arrays.items() if k.startswith("param/")})
    return model


def train(dataset: PatchDataset, cfg: NetworkConfig, hyper: TrainConfig, ckpt_dir=None) -> UpPoinTr:
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    model = UpPoinTr(cfg)
    Trainer(model, dataset, hyper).fit(ckpt_dir=ckpt_dir)
    return model


def fit_size(points, n: int) -> np.ndarray:
    """Exactly ``n`` points: FPS (start 0) when larger, cyclic repetition when smaller."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) == 0:
        raise ValueError("cannot resize an empty patch")
    if len(pts) > n:
        return pts[farthest_point_sampling(pts, n, 0)]
    return pts[np.arange(n) % len(pts)]


def pair_arrays(pair, n_in: int, n_out: int):
    """Normalized ``(radar input, lidar target, PatchTransform)`` for one PatchPair.

    Both patches share the lidar patch's radius around the anchor as scale.
    """
    scale = patch_scale(pair.lidar_patch, pair.anchor)
    gt, tf = normalize_patch(pair.lidar_patch, pair.anchor, scale)
    x, _ = normalize_patch(pair.radar_patch, pair.anchor, scale)
    return fit_size(x, n_in), fit_size(gt, n_out), tf


def pair_input(pair, n_in: int) -> np.ndarray:
    """Network input for one PatchPair (radar patch in the lidar patch's frame)."""
    scale = patch_scale(pair.lidar_patch, pair.anchor)
    x, _ = normalize_patch(pair.radar_patch, pair.anchor, scale)
    return fit_size(x, n_in)


def dataset_from_pairs(pairs, cfg: NetworkConfig) -> tuple[PatchDataset, list]:
    xs, gts, tfs = [], [], []
    for p in pairs:
        x, gt, tf = pair_arrays(p, cfg.n_in, cfg.output_size)
        xs.append(x)
        gts.append(gt)
        tfs.append(tf)
    if not xs:
        raise ValueError("empty dataset")
    return PatchDataset(np.stack(xs), np.stack(gts), cfg.stage_sizes), tfs
