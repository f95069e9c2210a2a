"""Parameter containers and the layers the completion network is built from."""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .tensor import Parameter


class Module:
    """Base class: parameters are discovered from attributes in definition order."""

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{full}.{i}", item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{name}: expected shape {p.shape}, got {arr.shape}")
            p.data = arr.copy()

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def uniform_init(rng, fan_in, shape):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, d_in, d_out, rng):
        self.weight = Parameter(uniform_init(rng, d_in, (d_in, d_out)))
        self.bias = Parameter(uniform_init(rng, d_in, (d_out,)))

    def forward(self, x):
        return T.matmul(x, self.weight) + self.bias


class MLP(Module):
    """Linear layers with GELU between them (none after the last)."""

    def __init__(self, dims, rng):
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.gelu(x)
        return x

    def zero_last(self):
        last = self.layers[-1]
        last.weight.data[...] = 0.0
        last.bias.data[...] = 0.0


class LayerNorm(Module):
    def __init__(self, d, eps=1e-5):
        self.gain = Parameter(np.ones(d))
        self.shift = Parameter(np.zeros(d))
        self.eps = eps

    def forward(self, x):
        return T.layer_norm(x, self.eps) * self.gain + self.shift


class MultiHeadAttention(Module):
    """Scaled dot-product attention over (B, N, d) inputs with optional
    additive logit bias of shape (B, H, Nq, Nk)."""

    def __init__(self, d_model, n_heads, rng):
        if d_model % n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        self.n_heads = n_heads
        self.q = Linear(d_model, d_model, rng)
        self.k = Linear(d_model, d_model, rng)
        self.v = Linear(d_model, d_model, rng)
        self.out = Linear(d_model, d_model, rng)

    def _split(self, x):
        b, n, d = x.shape
        h = self.n_heads
        return x.reshape(b, n, h, d // h).transpose(0, 2, 1, 3)

    def forward(self, query, context, bias=None):
        b, nq, d = query.shape
        q = self._split(self.q(query))
        k = self._split(self.k(context))
        v = self._split(self.v(context))
        logits = T.matmul(q, k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(d // self.n_heads))
        if bias is not None:
            logits = logits + bias
        attn = T.softmax(logits, axis=-1)
        y = T.matmul(attn, v).transpose(0, 2, 1, 3).reshape(b, nq, d)
        return self.out(y)


class FeedForward(Module):
    def __init__(self, d_model, d_hidden, rng):
        self.mlp = MLP([d_model, d_hidden, d_model], rng)

    def forward(self, x):
        return self.mlp(x)
