"""Dense float64 tensors with reverse-mode differentiation and optimizers."""

from .checkpoint import config_digest, read_checkpoint, save_checkpoint
from .init import init_glorot, init_orthonormal
from .optim import AdamState, adam_step, clip_global_norm, global_norm, lr_schedule
from .tensor import (
    Parameter,
    Tensor,
    add,
    as_tensor,
    backward,
    clamp_min,
    concat,
    conv1d_maxpool,
    dropout,
    embedding_lookup,
    exp,
    index,
    log,
    log_softmax,
    logsumexp,
    lstm_recurrence,
    masked_logsumexp,
    matmul,
    mul,
    neg,
    pick,
    reshape,
    scale,
    sigmoid,
    softmax,
    stack,
    sub,
    sum,
    take_rows,
    tanh,
    transpose,
)

__all__ = [
    "config_digest",
    "read_checkpoint",
    "save_checkpoint",
    "init_glorot",
    "init_orthonormal",
    "AdamState",
    "adam_step",
    "clip_global_norm",
    "global_norm",
    "lr_schedule",
    "Parameter",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "clamp_min",
    "concat",
    "conv1d_maxpool",
    "dropout",
    "embedding_lookup",
    "exp",
    "index",
    "log",
    "log_softmax",
    "logsumexp",
    "lstm_recurrence",
    "masked_logsumexp",
    "matmul",
    "mul",
    "neg",
    "pick",
    "reshape",
    "scale",
    "sigmoid",
    "softmax",
    "stack",
    "sub",
    "sum",
    "take_rows",
    "tanh",
    "transpose",
]
