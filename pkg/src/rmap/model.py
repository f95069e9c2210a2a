"""Desk-scale UpPoinTr: point proxies -> transformer encoder -> dynamic queries
-> geometry-biased decoder -> coarse cloud -> hierarchical upsampling.

Layer internals are deliberately small: a DGCNN-style edge MLP with max
pooling builds the proxies, decoder geometry awareness is an additive
attention bias computed from query-to-proxy offsets, and each upsample layer
spawns children as parent + MLP offset. The topology (0 noise queries,
coarse cloud of ``n_coarse`` points, upsample factors) is what is fixed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import kernels
from .nn import tensor as T
from .nn.module import MLP, FeedForward, LayerNorm, Linear, Module, MultiHeadAttention, uniform_init
from .nn.tensor import Parameter, Tensor, no_grad


@dataclass
class NetworkConfig:
    n_in: int = 256
    n_coarse: int = 64
    upsample_factors: tuple = (1, 4, 4)
    d_model: int = 64
    n_heads: int = 4
    n_enc_layers: int = 3
    n_dec_layers: int = 3
    knn_k: int = 8
    n_proxies: int = 64
    n_noise_queries: int = 0
    ffn_hidden: int = 128
    head_hidden: int = 128
    bias_hidden: int = 16
    seed: int = 0

    def __post_init__(self):
        self.upsample_factors = tuple(int(f) for f in self.upsample_factors)
        if self.n_noise_queries != 0:
            raise ValueError("noise queries are fixed at 0")
        if any(f < 1 for f in self.upsample_factors):
            raise ValueError("upsample factors must be >= 1")
        if not 1 <= self.n_proxies <= self.n_in:
            raise ValueError("need 1 <= n_proxies <= n_in")
        if not 1 <= self.knn_k <= self.n_in:
            raise ValueError("need 1 <= knn_k <= n_in")
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")

    @property
    def n_candidates(self) -> int:
        return 2 * self.n_coarse

    @property
    def stage_sizes(self) -> list:
        sizes = [self.n_coarse]
        for f in self.upsample_factors:
            sizes.append(sizes[-1] * f)
        return sizes

    @property
    def output_size(self) -> int:
        return self.stage_sizes[-1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["upsample_factors"] = list(self.upsample_factors)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> NetworkConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown network config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def desk(cls, **kw) -> NetworkConfig:
        return cls(**kw)

    @classmethod
    def paper(cls, **kw) -> NetworkConfig:
        base = dict(n_in=2048, n_coarse=512, d_model=384, n_heads=6, n_enc_layers=6, n_dec_layers=8,
                    knn_k=16, n_proxies=256, ffn_hidden=768, head_hidden=512, bias_hidden=16)
        base.update(kw)
        return cls(**base)

    @classmethod
    def tiny(cls, **kw) -> NetworkConfig:
        base = dict(n_in=32, n_coarse=8, d_model=16, n_heads=2, n_enc_layers=1, n_dec_layers=1,
                    knn_k=4, n_proxies=8, ffn_hidden=32, head_hidden=32, bias_hidden=8)
        base.update(kw)
        return cls(**base)


def _batch(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    return x[None] if x.ndim == 2 else x


def proxy_centers(x: np.ndarray, n_proxies: int) -> np.ndarray:
    """FPS proxy indices per batch item, started at the point nearest the centroid.

    Starting from a geometric rather than positional choice keeps the proxy
    set independent of input point order.
    """
    out = np.empty((x.shape[0], n_proxies), dtype=np.int64)
    for b, pts in enumerate(x):
        d = pts - pts.mean(axis=0)
        start = int(np.argmin((d * d).sum(axis=1)))
        out[b] = kernels.farthest_point_sampling(pts, n_proxies, start)
    return out


class EncoderLayer(Module):
    def __init__(self, d, h, ffn, rng):
        self.attn = MultiHeadAttention(d, h, rng)
        self.norm1 = LayerNorm(d)
        self.ffn = FeedForward(d, ffn, rng)
        self.norm2 = LayerNorm(d)

    def forward(self, x):
        x = self.norm1(x + self.attn(x, x))
        return self.norm2(x + self.ffn(x))


class DecoderLayer(Module):
    def __init__(self, d, h, ffn, bias_hidden, rng):
        self.self_attn = MultiHeadAttention(d, h, rng)
        self.norm1 = LayerNorm(d)
        self.cross_attn = MultiHeadAttention(d, h, rng)
        self.norm2 = LayerNorm(d)
        self.ffn = FeedForward(d, ffn, rng)
        self.norm3 = LayerNorm(d)
        self.bias_mlp = MLP([3, bias_hidden, h], rng)

    def geometry_bias(self, q_xyz, centers):
        b, nq, _ = q_xyz.shape
        off = T.reshape(q_xyz, (b, nq, 1, 3)) - centers[:, None, :, :]
        return T.transpose(self.bias_mlp(off), (0, 3, 1, 2))

    def forward(self, q, q_xyz, centers, memory, use_geometry=True):
        q = self.norm1(q + self.self_attn(q, q))
        bias = self.geometry_bias(q_xyz, centers) if use_geometry else None
        q = self.norm2(q + self.cross_attn(q, memory, bias))
        return self.norm3(q + self.ffn(q))


class UpsampleLayer(Module):
    """Each parent spawns ``factor`` children at parent + offset(feature, slot).

    The final layer carries no feature MLP since nothing consumes its features.
    """

    def __init__(self, d, factor, rng, child_features=True):
        self.factor = factor
        self.slot = Parameter(uniform_init(rng, d, (factor, d)))
        self.offset_mlp = MLP([2 * d, d, 3], rng)
        self.feature_mlp = MLP([d + 3, d, d], rng) if child_features else None

    def forward(self, xyz, feats):
        b, n, d = feats.shape
        f = self.factor
        fb = T.broadcast_to(T.reshape(feats, (b, n, 1, d)), (b, n, f, d))
        slot = T.broadcast_to(T.reshape(self.slot, (1, 1, f, d)), (b, n, f, d))
        off = self.offset_mlp(T.concat([fb, slot], axis=-1))
        child = T.reshape(T.reshape(xyz, (b, n, 1, 3)) + off, (b, n * f, 3))
        if self.feature_mlp is None:
            return child, None
        child_feats = T.reshape(self.feature_mlp(T.concat([fb, off], axis=-1)), (b, n * f, d))
        return child, child_feats


class UpPoinTr(Module):
    def __init__(self, cfg: NetworkConfig | None = None):
        cfg = cfg or NetworkConfig()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        d = cfg.d_model
        self.edge_mlp = MLP([6, d, d], rng)
        self.pos_embed = MLP([3, d, d], rng)
        self.encoder = [EncoderLayer(d, cfg.n_heads, cfg.ffn_hidden, rng) for _ in range(cfg.n_enc_layers)]
        self.coord_head = MLP([2 * d, cfg.head_hidden, cfg.n_candidates * 3], rng)
        self.score_head = MLP([2 * d, cfg.head_hidden, cfg.n_candidates], rng)
        self.query_coord = MLP([3, d, d], rng)
        self.query_context = Linear(2 * d, d, rng)
        self.decoder = [DecoderLayer(d, cfg.n_heads, cfg.ffn_hidden, cfg.bias_hidden, rng)
                        for _ in range(cfg.n_dec_layers)]
        last = len(cfg.upsample_factors) - 1
        self.upsample = [UpsampleLayer(d, f, rng, child_features=i < last)
                         for i, f in enumerate(cfg.upsample_factors)]

    # -- stages ---------------------------------------------------------------

    def encode(self, points, use_position=True):
        """Point proxies: returns ``(centers (B, P, 3) array, features (B, P, d) Tensor)``.

        ``use_position=False`` removes every path through which absolute
        center coordinates reach the features (the positional embedding and
        the center channels of the edge features).
        """
        x = _batch(points)
        cfg = self.cfg
        if x.shape[1] != cfg.n_in:
            raise ValueError(f"expected {cfg.n_in} input points, got {x.shape[1]}")
        cidx = proxy_centers(x, cfg.n_proxies)
        centers = np.take_along_axis(x, cidx[..., None], axis=1)
        edges = np.empty((x.shape[0], cfg.n_proxies, cfg.knn_k, 6))
        for b in range(x.shape[0]):
            nbr = kernels.knn(centers[b], x[b], cfg.knn_k)
            edges[b, :, :, :3] = x[b][nbr] - centers[b][:, None, :]
            edges[b, :, :, 3:] = centers[b][:, None, :] if use_position else 0.0
        feats = T.reduce_max(self.edge_mlp(Tensor(edges)), axis=2)
        if use_position:
            feats = feats + self.pos_embed(Tensor(centers))
        for layer in self.encoder:
            feats = layer(feats)
        return centers, feats

    def generate_queries(self, feats):
        """Rank ``2 * n_coarse`` candidate points and keep the top ``n_coarse``.

        Returns ``(coarse (B, n_coarse, 3), queries (B, n_coarse, d), selected)``.
        Ties in score keep candidate index order. No noise queries are added.
        """
        cfg = self.cfg
        b = feats.shape[0]
        pooled = T.concat([T.reduce_max(feats, axis=1), T.reduce_mean(feats, axis=1)], axis=-1)
        cands = T.reshape(self.coord_head(pooled), (b, cfg.n_candidates, 3))
        scores = T.reshape(self.score_head(pooled), (b, cfg.n_candidates, 1))
        sel = np.argsort(-scores.data[..., 0], axis=1, kind="stable")[:, :cfg.n_coarse]
        coarse = T.gather(cands, sel)
        gate = T.sigmoid(T.gather(scores, sel))
        ctx = T.reshape(self.query_context(pooled), (b, 1, cfg.d_model))
        queries = (self.query_coord(coarse) + ctx) * gate
        return coarse, queries, sel

    def decode(self, queries, coarse, centers, memory, use_geometry=True):
        q = queries
        for layer in self.decoder:
            q = layer(q, coarse, centers, memory, use_geometry)
        return q

    def forward(self, points):
        """All stage clouds ``[P_c0, P_c1, ...]`` as (B, n_i, 3) Tensors."""
        centers, memory = self.encode(points)
        coarse, queries, _ = self.generate_queries(memory)
        feats = self.decode(queries, coarse, centers, memory)
        stages = [coarse]
        xyz = coarse
        for layer in self.upsample:
            xyz, feats = layer(xyz, feats)
            stages.append(xyz)
        return stages

    def predict(self, points) -> list:
        with no_grad():
            return [s.data for s in self.forward(points)]

    def zero_offsets(self):
        for layer in self.upsample:
            layer.offset_mlp.zero_last()


# -- loss ------------------------------------------------------------------------

def stage_targets(gt, sizes, start: int = 0) -> list:
    """FPS-downsampled ground truth for every stage size (batched)."""
    g = _batch(gt)
    out = []
    for n in sizes:
        if n > g.shape[1]:
            raise ValueError(f"ground truth has {g.shape[1]} points, stage needs {n}")
        idx = np.stack([kernels.farthest_point_sampling(gb, n, start) for gb in g])
        out.append(np.take_along_axis(g, idx[..., None], axis=1))
    return out


def chamfer_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Per-item two-sided mean nearest-neighbor Euclidean distance, shape (B,)."""
    p = pred if isinstance(pred, Tensor) else Tensor(pred)
    if p.ndim == 2:
        p = T.reshape(p, (1,) + p.shape)
    g = _batch(target)
    b = p.shape[0]
    idx_pg = np.empty(p.shape[:2], dtype=np.int64)
    idx_gp = np.empty(g.shape[:2], dtype=np.int64)
    for i in range(b):
        idx_pg[i], _ = kernels.nearest_neighbor(p.data[i], g[i])
        idx_gp[i], _ = kernels.nearest_neighbor(g[i], p.data[i])
    matched_g = np.take_along_axis(g, idx_pg[..., None], axis=1)
    d_pg = T.norm(p - matched_g, axis=-1)
    d_gp = T.norm(T.gather(p, idx_gp) - g, axis=-1)
    return T.reduce_mean(d_pg, axis=1) + T.reduce_mean(d_gp, axis=1)


def total_loss(stages, gt=None, targets=None) -> Tensor:
    """J = sum over stages of the Chamfer distance to the FPS-downsampled ground truth.

    Pass either ``gt`` (downsampled here) or precomputed ``targets``.
    Returns the batch mean of J as a scalar Tensor.
    """
    if targets is None:
        targets = stage_targets(gt, [s.shape[-2] for s in stages])
    j = None
    for s, g in zip(stages, targets):
        cd = chamfer_loss(s, g)
        j = cd if j is None else j + cd
    return T.reduce_mean(j)
