"""Adam, per-epoch learning-rate decay, and global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def lr_schedule(epoch: int, eta0: float = 0.001, rho: float = 0.05) -> float:
    """eta0 / (1 + rho * epoch), where ``epoch`` counts completed epochs."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return eta0 / (1.0 + rho * epoch)


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads)))


def clip_global_norm(grads, threshold: float) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``threshold``.

    Returns the norm measured before clipping.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    norm = global_norm(grads)
    if norm > threshold:
        factor = threshold / norm
        for g in grads:
            g *= factor
    return norm


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update over ``params`` (Parameters with grads)."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p in params:
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.value)
            state.v[p.name] = np.zeros_like(p.value)
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * p.grad
        v *= b2
        v += (1.0 - b2) * p.grad * p.grad
        p.value -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
