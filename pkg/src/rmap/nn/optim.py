"""AdamW with decoupled weight decay and the continuous learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    lr: float = 1e-5
    weight_decay: float = 5e-5
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def arrays(self) -> dict:
        out = {}
        for name, arr in self.m.items():
            out[f"m/{name}"] = arr
        for name, arr in self.v.items():
            out[f"v/{name}"] = arr
        return out

    def load_arrays(self, arrays: dict) -> None:
        self.m = {k[2:]: np.array(a) for k, a in arrays.items() if k.startswith("m/")}
        self.v = {k[2:]: np.array(a) for k, a in arrays.items() if k.startswith("v/")}


def adamw_step(params, state: OptimizerState) -> None:
    """One AdamW update over ``{name: Parameter}`` using their ``.grad``.

    Weight decay shrinks the parameter by ``lr * weight_decay`` before, and
    independently of, the bias-corrected Adam step.
    """
    items = params.items() if isinstance(params, dict) else params
    items = list(items)
    for name, p in items:
        if p.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient")
    state.step += 1
    b1, b2 = state.betas
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in items:
        g = p.grad
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[name], state.v[name] = m, v
        p.data = p.data * (1.0 - state.lr * state.weight_decay)
        p.data = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def lr_schedule(epoch: float, base_lr: float, decay: float = 0.9, every: float = 20, stepwise: bool = False) -> float:
    """``base_lr * decay ** (epoch / every)``; ``stepwise`` floors the exponent."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    e = epoch // every if stepwise else epoch / every
    return base_lr * decay ** e
