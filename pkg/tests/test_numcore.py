import numpy as np
import pytest

from spannca import numcore as nc
from spannca.errors import BadShape, DigestMismatch, NonScalarLoss, ShapeMismatch


def fd_check(params, loss_fn, eps=1e-6, tol=1e-6):
    for p in params:
        p.zero_grad()
    nc.backward(loss_fn())
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        flat = p.value.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = float(loss_fn().value)
            flat[i] = old - eps
            down = float(loss_fn().value)
            flat[i] = old
            fd = (up - down) / (2 * eps)
            g = analytic.reshape(-1)[i]
            worst = max(worst, abs(fd - g) / max(abs(fd), abs(g), 1e-5))
    assert worst < tol, worst


def rand_param(rng, *shape, name=None):
    return nc.Parameter(rng.normal(size=shape), name=name)


@pytest.mark.parametrize(
    "op",
    [
        lambda a, b: nc.add(a, b),
        lambda a, b: nc.sub(a, b),
        lambda a, b: nc.mul(a, b),
        lambda a, b: nc.tanh(a) * nc.sigmoid(b),
        lambda a, b: nc.exp(nc.scale(a, 0.3)) - b,
        lambda a, b: nc.log(nc.exp(a) + 1.0) + nc.neg(b),
        lambda a, b: nc.softmax(a, axis=1) * b,
        lambda a, b: nc.log_softmax(a + b, axis=0),
        lambda a, b: nc.logsumexp(a * b, axis=1),
        lambda a, b: nc.matmul(a, nc.transpose(b)),
        lambda a, b: nc.concat([a, b], axis=1),
        lambda a, b: nc.stack([a, b], axis=0),
        lambda a, b: nc.reshape(a, (12,)) * nc.reshape(b, (12,)),
        lambda a, b: a[1:, ::2] + b[0, 1],
        lambda a, b: nc.take_rows(a, [2, 0, 2]) * b[0],
        lambda a, b: nc.pick(a, [1, 0, 3]) + nc.sum(b, axis=0)[:3],
        lambda a, b: nc.masked_logsumexp(a * b, np.array([[1, 0, 1, 1], [0, 0, 0, 1], [1, 1, 1, 1]], bool)),
        lambda a, b: nc.add(a, b[0]),
    ],
)
def test_op_gradients(op):
    rng = np.random.default_rng(0)
    a, b = rand_param(rng, 3, 4), rand_param(rng, 3, 4)
    w = rng.normal(size=op(a, b).shape)
    fd_check([a, b], lambda: nc.sum(op(a, b) * w))


def test_clamp_min_gradient_and_floor():
    a = nc.Parameter([0.5, 1e-20, 2.0])
    out = nc.clamp_min(a, 1e-12)
    assert out.value.tolist() == [0.5, 1e-12, 2.0]
    nc.backward(nc.sum(nc.log(out)))
    assert a.grad[1] == 0.0
    assert a.grad[0] == pytest.approx(2.0)


def test_masked_logsumexp_empty_row():
    a = nc.Parameter(np.ones((2, 3)))
    mask = np.array([[True, False, True], [False, False, False]])
    out = nc.masked_logsumexp(a, mask)
    assert out.value[0] == pytest.approx(1 + np.log(2))
    assert out.value[1] == -np.inf
    nc.backward(out[0])
    assert np.array_equal(a.grad, [[0.5, 0, 0.5], [0, 0, 0]])


def test_conv1d_maxpool_gradient():
    rng = np.random.default_rng(1)
    x = rand_param(rng, 2, 6, 3)
    w = rand_param(rng, 9, 4)
    b = rand_param(rng, 4)
    valid = np.array([[1, 1, 1, 0], [1, 1, 1, 1]], bool)
    fd_check([x, w, b], lambda: nc.sum(nc.tanh(nc.conv1d_maxpool(x, w, b, valid))), eps=1e-5, tol=1e-5)


def test_conv1d_maxpool_hand_oracle():
    # one sequence of 4 positions, 3 channels, window 3, single filter that sums everything
    x = np.arange(12, dtype=float).reshape(1, 4, 3)
    x[0, 3] = -100.0
    w = np.ones((9, 1))
    out = nc.conv1d_maxpool(x, w, np.zeros(1), np.ones((1, 2), bool))
    # window 0 sums rows 0..2 = 0+...+8 = 36; window 1 includes the -100 row
    assert out.value.tolist() == [[36.0]]
    masked = nc.conv1d_maxpool(x, w, np.zeros(1), np.array([[False, True]]))
    assert masked.value[0, 0] == 3 + 4 + 5 + 6 + 7 + 8 - 300


def test_conv1d_shape_errors():
    with pytest.raises(ShapeMismatch):
        nc.conv1d_maxpool(np.zeros((1, 4, 3)), np.zeros((8, 2)), np.zeros(2), np.ones((1, 2), bool))
    with pytest.raises(ShapeMismatch):
        nc.conv1d_maxpool(np.zeros((1, 4, 3)), np.zeros((9, 2)), np.zeros(2), np.ones((1, 3), bool))


def test_lstm_recurrence_gradient():
    rng = np.random.default_rng(2)
    H = 3
    x = nc.Parameter(rng.normal(size=(2, 5, 4 * H)))
    wh = nc.Parameter(rng.normal(size=(H, 4 * H)) * 0.5)
    w = rng.normal(size=(2, 5, H))
    fd_check([x, wh], lambda: nc.sum(nc.lstm_recurrence(x, wh) * w), eps=1e-5, tol=1e-4)


def _reference_lstm(xp, W):
    B, T, H4 = xp.shape
    H = H4 // 4
    h, c = np.zeros((B, H)), np.zeros((B, H))
    out = []
    sig = lambda z: 1 / (1 + np.exp(-z))  # noqa: E731
    for t in range(T):
        z = xp[:, t] + h @ W
        i, f, o, g = sig(z[:, :H]), sig(z[:, H:2 * H]), sig(z[:, 2 * H:3 * H]), np.tanh(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        out.append(h)
    return np.stack(out, axis=1)


def test_lstm_matches_reference():
    rng = np.random.default_rng(3)
    xp = rng.normal(size=(3, 7, 8))
    W = rng.normal(size=(2, 8))
    assert np.allclose(nc.lstm_recurrence(xp, W).value, _reference_lstm(xp, W), atol=1e-13)
    with pytest.raises(ShapeMismatch):
        nc.lstm_recurrence(xp, np.zeros((3, 8)))


def test_softmax_basic_values():
    assert np.allclose(nc.softmax(np.zeros(3)).value, [1 / 3] * 3, atol=1e-15)
    x = np.array([1.0, 2.0, 3.0])
    assert np.max(np.abs(nc.softmax(x).value - nc.softmax(x + 1000).value)) < 1e-12
    assert np.all(np.isfinite(nc.log_softmax(np.array([-1e4, 0.0, 1e4])).value))


def test_matmul_identity_and_shape():
    a = np.random.default_rng(4).normal(size=(3, 5))
    assert np.array_equal(nc.matmul(a, np.eye(5)).value, a)
    with pytest.raises(ShapeMismatch):
        nc.matmul(a, np.eye(3))
    with pytest.raises(ShapeMismatch):
        nc.add(np.zeros((2, 3)), np.zeros((3, 2)))


def test_backward_requires_scalar():
    a = nc.Parameter(np.ones(3))
    with pytest.raises(NonScalarLoss):
        nc.backward(a * 2.0)


def test_disconnected_parameter_gets_zero_grad():
    a, b = nc.Parameter(np.ones(2)), nc.Parameter(np.ones(2))
    nc.backward(nc.sum(a * 3.0))
    assert np.array_equal(a.grad, [3.0, 3.0])
    assert np.array_equal(b.grad, [0.0, 0.0])


def test_shared_parameter_accumulates():
    a = nc.Parameter([2.0])
    nc.backward(nc.sum(a * a + a))
    assert a.grad[0] == 5.0


def test_dropout_eval_identity_and_train_expectation():
    x = nc.Tensor(np.arange(1.0, 6.0))
    assert nc.dropout(x, 0.3, train=False) is x
    rng = np.random.default_rng(5)
    draws = np.stack([nc.dropout(x, 0.3, True, rng).value for _ in range(20000)])
    assert np.all(np.abs(draws.mean(axis=0) / x.value - 1) < 0.02)
    assert set(np.unique(draws[:, 0]).round(12)) <= {0.0, round(1 / 0.7, 12)}
    with pytest.raises(ValueError):
        nc.dropout(x, 1.0, True, rng)


def test_adam_first_step_is_lr_sized():
    p = nc.Parameter([1.0, -2.0, 3.0], name="p")
    p.grad[:] = [0.5, -7.0, 1e-3]
    state = nc.AdamState()
    nc.adam_step([p], state, lr=0.01)
    assert np.allclose(p.value, [0.99, -1.99, 2.99], atol=1e-7)
    q = nc.Parameter([4.0], name="q")
    nc.adam_step([q], nc.AdamState(), lr=0.01)
    assert q.value[0] == 4.0


def test_adam_minimizes_quadratic_monotonically():
    p = nc.Parameter([3.0, -2.0], name="x")
    state = nc.AdamState()
    losses = []
    for _ in range(100):
        p.zero_grad()
        loss = nc.sum(p * p)
        losses.append(float(loss.value))
        nc.backward(loss)
        nc.adam_step([p], state, lr=0.01)
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_lr_schedule():
    assert nc.lr_schedule(0) == 0.001
    assert nc.lr_schedule(20) == pytest.approx(0.0005)
    lrs = [nc.lr_schedule(e) for e in range(50)]
    assert all(b < a for a, b in zip(lrs, lrs[1:]))
    with pytest.raises(ValueError):
        nc.lr_schedule(-1)


def test_clip_global_norm():
    g = [np.array([30.0, 40.0])]
    assert nc.clip_global_norm(g, 5.0) == 50.0
    assert np.allclose(g[0], [3.0, 4.0])
    small = [np.array([2.0, 0.0])]
    nc.clip_global_norm(small, 5.0)
    assert small[0].tolist() == [2.0, 0.0]
    rng = np.random.default_rng(6)
    for _ in range(50):
        gs = [rng.normal(size=(3, 4)) * 10, rng.normal(size=7)]
        nc.clip_global_norm(gs, 5.0)
        assert nc.global_norm(gs) <= 5.0 + 1e-12


def test_init_orthonormal_and_glorot():
    rng = np.random.default_rng(7)
    q = nc.init_orthonormal((100, 100), rng)
    assert np.max(np.abs(q.T @ q - np.eye(100))) < 1e-8
    wide = nc.init_orthonormal((4, 10), rng)
    assert np.allclose(wide @ wide.T, np.eye(4))
    w = nc.init_glorot((30, 50), rng)
    bound = np.sqrt(6 / 80)
    assert np.all(np.abs(w) <= bound) and np.abs(w).max() > 0.9 * bound
    with pytest.raises(BadShape):
        nc.init_glorot((2, 3, 4), rng)
    with pytest.raises(BadShape):
        nc.init_orthonormal((5,), rng)


def test_init_is_seed_deterministic():
    a = nc.init_glorot((6, 6), np.random.default_rng(9))
    b = nc.init_glorot((6, 6), np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    arrays = {"b": rng.normal(size=(3,)), "a": rng.normal(size=(2, 4))}
    digest = nc.config_digest({"x": 1, "y": [1, 2]})
    path = tmp_path / "m.ckpt"
    nc.save_checkpoint(path, arrays, digest, meta={"labels": ["PER"]})
    back, d, meta = nc.read_checkpoint(path, expected_digest=digest)
    assert d == digest and meta == {"labels": ["PER"]}
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])
    path2 = tmp_path / "m2.ckpt"
    nc.save_checkpoint(path2, dict(reversed(list(arrays.items()))), digest, meta={"labels": ["PER"]})
    assert path.read_bytes() == path2.read_bytes()
    with pytest.raises(DigestMismatch):
        nc.read_checkpoint(path, expected_digest=nc.config_digest({"x": 2}))


def test_config_digest_is_key_order_free():
    assert nc.config_digest({"a": 1, "b": 2}) == nc.config_digest({"b": 2, "a": 1})
