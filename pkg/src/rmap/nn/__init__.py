"""Minimal reverse-mode autodiff engine, layers, AdamW and checkpoints."""

from .checkpoint import load_arrays, save_arrays
from .module import MLP, FeedForward, LayerNorm, Linear, Module, MultiHeadAttention
from .optim import OptimizerState, adamw_step, lr_schedule
from .tensor import (
    Parameter,
    Tensor,
    add,
    broadcast_to,
    concat,
    div,
    exp,
    gather,
    gelu,
    getitem,
    layer_norm,
    matmul,
    mul,
    no_grad,
    norm,
    relu,
    reduce_max,
    reduce_mean,
    reduce_sum,
    reshape,
    sigmoid,
    softmax,
    sub,
    tanh,
    transpose,
)
