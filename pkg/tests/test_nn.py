import numpy as np
import pytest

from wrapnet import autodiff as ad
from wrapnet.autodiff import Tensor
from wrapnet.mesh import build_face_adjacency
from wrapnet.nn import (MLP, Adam, AdamState, FaceConv, NonFiniteGradient, adam_step, face_conv,
                        global_mean_pool, grad_check, pool_children, rel_error, unpool_children)


def test_mlp_relu_placement():
    rng = np.random.default_rng(0)
    mlp = MLP([3, 4, 2], rng)
    x = rng.normal(size=(5, 3))
    p = {k: v.data for k, v in mlp.parameters().items()}
    ref = np.maximum(x @ p["W0"] + p["b0"], 0) @ p["W1"] + p["b1"]
    np.testing.assert_allclose(mlp(x).data, ref, rtol=1e-14)
    with pytest.raises(ValueError):
        mlp(np.ones((2, 4)))
    with pytest.raises(ValueError):
        MLP([3], rng)


def test_face_conv_matches_explicit_sum(octa):
    rng = np.random.default_rng(1)
    adj = build_face_adjacency(octa)
    layer = FaceConv(2, 3, rng)
    F = rng.normal(size=(octa.n_faces, 2))
    W, b = layer._params["W"].data, layer._params["b"].data
    w = [W[k * 2:(k + 1) * 2] for k in range(4)]
    ref = np.empty((octa.n_faces, 3))
    for i in range(octa.n_faces):
        nb = F[adj[i]]
        ring = sum(np.abs(nb[(j + 1) % 3] - nb[j]) for j in range(3))
        diff = sum(np.abs(F[i] - nb[j]) for j in range(3))
        ref[i] = F[i] @ w[0] + nb.sum(0) @ w[1] + ring @ w[2] + diff @ w[3] + b
    np.testing.assert_allclose(face_conv(F, adj, layer).data, ref, rtol=1e-12, atol=1e-14)


def test_face_conv_neighbor_order_is_irrelevant(ico):
    rng = np.random.default_rng(2)
    adj = build_face_adjacency(ico)
    layer = FaceConv(4, 5, rng)
    F = rng.normal(size=(ico.n_faces, 4))
    ref = face_conv(F, adj, layer).data
    for perm in ([1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0]):
        assert np.array_equal(face_conv(F, np.ascontiguousarray(adj[:, perm]), layer).data, ref)


def test_face_conv_shape_errors(tet):
    layer = FaceConv(2, 2, np.random.default_rng(0))
    adj = build_face_adjacency(tet)
    with pytest.raises(ValueError):
        face_conv(np.ones((4, 3)), adj, layer)
    with pytest.raises(ValueError):
        face_conv(np.ones((5, 2)), adj, layer)
    assert layer.n_params == 4 * 2 * 2 + 2


def test_pooling():
    rng = np.random.default_rng(3)
    F = rng.normal(size=(12, 5))
    pooled = pool_children(F).data
    np.testing.assert_allclose(pooled, F.reshape(3, 4, 5).mean(axis=1), rtol=1e-14)
    assert np.array_equal(pool_children(F[[1, 0, 3, 2, 4, 6, 5, 7, 11, 10, 9, 8]]).data, pooled)
    assert np.array_equal(unpool_children(F[:3]).data, np.repeat(F[:3], 4, axis=0))
    with pytest.raises(ValueError):
        pool_children(F[:7])
    g = global_mean_pool(F).data
    assert g.shape == (1, 5)
    assert np.array_equal(global_mean_pool(F[rng.permutation(12)]).data, g)
    with pytest.raises(ValueError):
        global_mean_pool(np.ones((0, 2)))


def _textbook_adam(p, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return p


def test_adam_matches_textbook_update():
    rng = np.random.default_rng(4)
    p0 = rng.normal(size=(3, 4))
    grads = [rng.normal(size=(3, 4)) for _ in range(6)]
    t = Tensor(p0.copy(), requires_grad=True)
    opt = Adam({"w": t}, lr=1e-2)
    for g in grads:
        t.grad = g
        opt.step()
    np.testing.assert_allclose(t.data, _textbook_adam(p0, grads, 1e-2), rtol=1e-13, atol=1e-15)


def test_adam_zero_gradient_leaves_value():
    t = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    state = AdamState(lr=0.1)
    adam_step({"w": t}, {"w": np.array([1.0, 0.0])}, state)
    assert t.data[1] == 2.0 and t.data[0] != 1.0
    adam_step({"w": t}, {}, state)  # missing gradient behaves like zeros
    assert state.step == 2 and state.v["w"][1] == 0.0


def test_adam_rejects_non_finite():
    t = Tensor(np.ones(2), requires_grad=True)
    state = AdamState()
    with pytest.raises(NonFiniteGradient):
        adam_step({"w": t}, {"w": np.array([np.nan, 0.0])}, state)
    assert state.step == 0 and t.data.tolist() == [1.0, 1.0]


def test_grad_check_catches_wrong_backward():
    x = Tensor(np.array([0.3, -1.2]), requires_grad=True)
    wrong = lambda: Tensor(np.sum(x.data ** 2), parents=(x,), backward=lambda g: (g * x.data,))
    assert not grad_check(wrong, [x]).ok
    right = lambda: ad.tsum(x * x)
    assert grad_check(right, [x]).ok


def test_rel_error():
    assert rel_error(np.zeros(3), np.zeros(3)) == 0.0
    assert rel_error(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(np.sqrt(2))


def test_face_conv_neighbor_start_is_immaterial(octa):
    # rotating each face's neighbor list changes which neighbor the ring difference starts from
    rng = np.random.default_rng(12)
    adj = build_face_adjacency(octa)
    layer = FaceConv(3, 4, rng)
    F = rng.normal(size=(octa.n_faces, 3))
    ref = face_conv(F, adj, layer).data
    for shift in (1, 2):
        rolled = np.ascontiguousarray(np.roll(adj, shift, axis=1))
        assert np.array_equal(face_conv(F, rolled, layer).data, ref)
