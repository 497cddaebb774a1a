"""Parameter initializers."""

from __future__ import annotations

import numpy as np

from ..errors import BadShape


def init_glorot(shape, rng) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out)).

    For 2-D ``(rows, cols)`` shapes fan_out is rows and fan_in is cols; 1-D
    shapes use the length for both.
    """
    shape = tuple(shape)
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    elif len(shape) == 2:
        fan_out, fan_in = shape
    else:
        raise BadShape(f"glorot init expects 1-D or 2-D shape, got {shape}")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_orthonormal(shape, rng) -> np.ndarray:
    """Random matrix with orthonormal rows or columns (whichever is fewer)."""
    shape = tuple(shape)
    if len(shape) != 2:
        raise BadShape(f"orthonormal init needs a 2-D shape, got {shape}")
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    return q if rows >= cols else q.T
