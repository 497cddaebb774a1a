"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients.  Nodes whose
parents are all constants are not recorded, so frozen inputs cost nothing on
the backward pass.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import NonScalarLoss, ShapeMismatch


class Tensor:
    __slots__ = ("value", "parents", "backward_fn", "requires_grad", "grad", "name")

    def __init__(self, value, parents=(), backward_fn=None, requires_grad=False, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"<Tensor{tag} shape={self.shape}>"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)

    @property
    def T(self):
        return transpose(self)


class Parameter(Tensor):
    """A trainable leaf.  ``grad`` is always allocated and shaped like ``value``."""

    __slots__ = ()

    def __init__(self, value, name=None):
        super().__init__(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0.0


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value, parents, backward_fn):
    if any(p.requires_grad for p in parents):
        return Tensor(value, parents, backward_fn, requires_grad=True)
    return Tensor(value)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(*shapes):
    try:
        np.broadcast_shapes(*shapes)
    except ValueError:
        raise ShapeMismatch(f"cannot broadcast shapes {shapes}") from None


# ---------------------------------------------------------------------------
# Elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.shape, b.shape)
    return _make(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.shape, b.shape)
    return _make(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.shape, b.shape)
    return _make(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.value, (a,), lambda g: (-g,))


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return _make(a.value * c, (a,), lambda g: (g * c,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.value)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.value)
    return _make(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.log(a.value), (a,), lambda g: (g / a.value,))


def clamp_min(a, floor: float) -> Tensor:
    """max(a, floor); the gradient is zero wherever the floor is active."""
    a = as_tensor(a)
    active = a.value > floor
    return _make(np.where(active, a.value, floor), (a,), lambda g: (g * active,))


# ---------------------------------------------------------------------------
# Shape manipulation


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul of {a.shape} and {b.shape}")
    return _make(a.value @ b.value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.value.T, (a,), lambda g: (g.T,))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def index(a, key) -> Tensor:
    """``a[key]`` for basic slices or integer-array gathers."""
    a = as_tensor(a)
    basic = _is_basic(key)

    def backward(g):
        out = np.zeros_like(a.value)
        if basic:
            out[key] += g
        else:
            np.add.at(out, key, g)
        return (out,)

    return _make(a.value[key], (a,), backward)


def _is_basic(key):
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, np.integer, slice)) or k is Ellipsis or k is None for k in parts)


def take_rows(a, rows) -> Tensor:
    """Gather rows of a 2-D tensor; the embedding-lookup primitive."""
    a = as_tensor(a)
    rows = np.asarray(rows, dtype=np.intp)

    def backward(g):
        out = np.zeros_like(a.value)
        np.add.at(out, rows, g)
        return (out,)

    return _make(a.value[rows], (a,), backward)


embedding_lookup = take_rows


def concat(tensors, axis=-1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _make(out, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.value for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from None
    return _make(
        out,
        tuple(tensors),
        lambda g: tuple(np.moveaxis(g, axis, 0)),
    )


# ---------------------------------------------------------------------------
# Reductions and normalizers


def sum(a, axis=None) -> Tensor:  # noqa: A001
    a = as_tensor(a)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(a.value.sum(axis=axis), (a,), backward)


def logsumexp(a, axis=-1) -> Tensor:
    """Stabilized log-sum-exp along ``axis`` (reduced axis kept)."""
    a = as_tensor(a)
    m = a.value.max(axis=axis, keepdims=True)
    e = np.exp(a.value - m)
    s = e.sum(axis=axis, keepdims=True)
    out = m + np.log(s)
    return _make(out, (a,), lambda g: (g * e / s,))


def log_softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    return sub(a, logsumexp(a, axis=axis))


def softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.value - a.value.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), backward)


def masked_logsumexp(a, mask) -> Tensor:
    """Row-wise log-sum-exp of a 2-D tensor over entries where ``mask`` holds.

    Rows with no selected entry yield -inf and receive zero gradient.
    """
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise ShapeMismatch(f"mask {mask.shape} vs values {a.shape}")
    masked = np.where(mask, a.value, -np.inf)
    m = masked.max(axis=1, keepdims=True)
    empty = ~mask.any(axis=1, keepdims=True)
    m_safe = np.where(empty, 0.0, m)
    e = np.where(mask, np.exp(masked - m_safe), 0.0)
    s = e.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        out = np.where(empty, -np.inf, m_safe + np.log(np.where(empty, 1.0, s)))[:, 0]
    w = e / np.where(empty, 1.0, s)
    return _make(out, (a,), lambda g: (g[:, None] * w,))


def pick(a, cols) -> Tensor:
    """Select ``a[i, cols[i]]`` for each row i of a 2-D tensor."""
    a = as_tensor(a)
    rows = np.arange(a.shape[0])
    cols = np.asarray(cols, dtype=np.intp)
    return index(a, (rows, cols))


# ---------------------------------------------------------------------------
# Layers


def dropout(a, ratio: float, train: bool, rng=None) -> Tensor:
    """Inverted dropout; the identity when ``train`` is false or ratio is 0."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError("dropout ratio must be in [0, 1)")
    a = as_tensor(a)
    if not train or ratio == 0.0:
        return a
    mask = (rng.random(a.shape) >= ratio) / (1.0 - ratio)
    return _make(a.value * mask, (a,), lambda g: (g * mask,))


def conv1d_maxpool(x, weight, bias, valid) -> Tensor:
    """Convolve along axis 1 and max-pool over valid positions.

    x: (N, P, C) padded inputs; weight: (window*C, F); bias: (F,);
    valid: (N, P - window + 1) bool marking positions allowed in the pool.
    Returns (N, F).
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    N, P, C = x.shape
    F = weight.shape[1]
    window = weight.shape[0] // C
    if window * C != weight.shape[0] or bias.shape != (F,) or P < window:
        raise ShapeMismatch(f"conv1d_maxpool: x {x.shape}, weight {weight.shape}, bias {bias.shape}")
    npos = P - window + 1
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != (N, npos):
        raise ShapeMismatch(f"valid mask {valid.shape} != {(N, npos)}")
    # windows[n, p] = x[n, p:p+window, :].ravel()
    windows = sliding_window_view(x.value, window, axis=1)  # (N, npos, C, window)
    windows = np.ascontiguousarray(windows.transpose(0, 1, 3, 2)).reshape(N, npos, window * C)
    conv = windows @ weight.value + bias.value
    conv = np.where(valid[:, :, None], conv, -np.inf)
    arg = conv.argmax(axis=1)  # (N, F)
    out = np.take_along_axis(conv, arg[:, None, :], axis=1)[:, 0, :]

    def backward(g):
        dconv = np.zeros((N, npos, F))
        np.put_along_axis(dconv, arg[:, None, :], g[:, None, :], axis=1)
        dw = windows.reshape(-1, window * C).T @ dconv.reshape(-1, F)
        db = dconv.sum(axis=(0, 1))
        dwin = (dconv @ weight.value.T).reshape(N, npos, window, C)
        dx = np.zeros_like(x.value)
        for k in range(window):
            dx[:, k : k + npos, :] += dwin[:, :, k, :]
        return dx, dw, db

    return _make(out, (x, weight, bias), backward)


def lstm_recurrence(x_proj, wh) -> Tensor:
    """Left-to-right LSTM over pre-projected inputs, with zero initial state.

    x_proj: (B, T, 4H) holding W_x x_t + b with gate blocks ordered
    input, forget, output, candidate; wh: (H, 4H).  Returns hidden states
    (B, T, H).
    """
    x_proj, wh = as_tensor(x_proj), as_tensor(wh)
    B, T, H4 = x_proj.shape
    H = H4 // 4
    if H4 != 4 * H or wh.shape != (H, H4):
        raise ShapeMismatch(f"lstm_recurrence: x_proj {x_proj.shape}, wh {wh.shape}")
    W = wh.value
    hs = np.zeros((B, T + 1, H))
    cs = np.zeros((B, T + 1, H))
    acts = np.empty((B, T, H4))
    tcs = np.empty((B, T, H))
    for t in range(T):
        pre = x_proj.value[:, t] + hs[:, t] @ W
        gates = acts[:, t]
        gates[:, : 3 * H] = _sigmoid(pre[:, : 3 * H])
        gates[:, 3 * H :] = np.tanh(pre[:, 3 * H :])
        i, f, o, g = gates[:, :H], gates[:, H : 2 * H], gates[:, 2 * H : 3 * H], gates[:, 3 * H :]
        cs[:, t + 1] = f * cs[:, t] + i * g
        tcs[:, t] = np.tanh(cs[:, t + 1])
        hs[:, t + 1] = o * tcs[:, t]

    def backward(gout):
        dx = np.empty((B, T, H4))
        dW = np.zeros_like(W)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            gates = acts[:, t]
            i, f, o, g = gates[:, :H], gates[:, H : 2 * H], gates[:, 2 * H : 3 * H], gates[:, 3 * H :]
            tc = tcs[:, t]
            dh = gout[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dpre = dx[:, t]
            dpre[:, :H] = dc * g * i * (1.0 - i)
            dpre[:, H : 2 * H] = dc * cs[:, t] * f * (1.0 - f)
            dpre[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
            dpre[:, 3 * H :] = dc * i * (1.0 - g * g)
            dW += hs[:, t].T @ dpre
            dh_next = dpre @ W.T
            dc_next = dc * f
        return dx, dW

    return _make(hs[:, 1:].copy(), (x_proj, wh), backward)


# ---------------------------------------------------------------------------
# Backward pass


def _topological(root):
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(param) into every reachable Parameter's ``grad``."""
    if loss.value.size != 1 or loss.value.ndim > 1:
        raise NonScalarLoss(f"loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(_topological(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Parameter):
            node.grad += g
            continue
        if node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            prev = grads.get(id(parent))
            grads[id(parent)] = pg if prev is None else prev + pg
