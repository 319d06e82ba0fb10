import io

import numpy as np
import pytest

from mrsgen.neural import (AdamState, BatchNorm1d, Conv1d, ConvTranspose1d, Dense, Flatten,
                           LayerError, LeakyReLU, Network, ReLU, Reshape, Sigmoid, Tanh,
                           adam_step, bce_loss, init_params, network_bytes, read_network,
                           save_network)
from mrsgen.neural.serialize import load_network
from oracles import numeric_grad, rel_error


def _away_from_kinks(x):
    return np.where(np.abs(x) < 0.05, 0.05 * np.sign(x) + (x == 0) * 0.05, x)


def gradient_errors(layer, x, rng, training=True):
    """Max relative error of input and parameter gradients for ``sum(R * layer(x))``."""
    net = Network([layer], x.shape[1:])
    out = net.forward(x, training)
    R = rng.normal(size=out.shape)

    def loss():
        return float(np.sum(R * net.forward(x, training)))

    net.zero_grad()
    net.forward(x, training)
    dx = net.backward(R)
    errs = [rel_error(dx, numeric_grad(loss, x))]
    for name, p in layer.params.items():
        errs.append(rel_error(layer.grads[name], numeric_grad(loss, p)))
    return max(errs)


def _random_layer(kind, rng):
    if kind == "dense":
        n_in, n_out = rng.integers(1, 7, size=2)
        return Dense(n_in, n_out), (int(rng.integers(1, 5)), n_in)
    if kind in ("conv1d", "convt1d"):
        cin, cout = rng.integers(1, 4, size=2)
        k, s = int(rng.integers(1, 5)), int(rng.integers(1, 3))
        p = int(rng.integers(0, k))
        L = int(rng.integers(k + 2, 12))
        cls = Conv1d if kind == "conv1d" else ConvTranspose1d
        return cls(cin, cout, k, s, p), (int(rng.integers(1, 4)), cin, L)
    if kind == "batchnorm1d":
        f = int(rng.integers(1, 5))
        if rng.random() < 0.5:
            return BatchNorm1d(f), (int(rng.integers(3, 7)), f)
        return BatchNorm1d(f), (int(rng.integers(2, 4)), f, int(rng.integers(2, 6)))
    shape = (int(rng.integers(1, 4)), int(rng.integers(1, 6)))
    return {"relu": ReLU(), "leaky_relu": LeakyReLU(0.2), "tanh": Tanh(),
            "sigmoid": Sigmoid()}[kind], shape


LAYER_KINDS = ["dense", "conv1d", "convt1d", "batchnorm1d", "relu", "leaky_relu", "tanh", "sigmoid"]


@pytest.mark.parametrize("kind", LAYER_KINDS)
def test_finite_difference_gradients(kind, backend):
    rng = np.random.default_rng(LAYER_KINDS.index(kind))
    for _ in range(5):
        layer, shape = _random_layer(kind, rng)
        for p in layer.params.values():
            p[...] = rng.normal(size=p.shape)
        x = _away_from_kinks(rng.normal(size=shape))
        assert gradient_errors(layer, x, rng) < 1e-4


def test_batchnorm_inference_gradient():
    rng = np.random.default_rng(0)
    bn = BatchNorm1d(3)
    bn.running_mean[:] = rng.normal(size=3)
    bn.running_var[:] = rng.uniform(0.5, 2, size=3)
    bn.params["gamma"][:] = rng.normal(size=3)
    assert gradient_errors(bn, rng.normal(size=(4, 3)), rng, training=False) < 1e-4


def test_bce_gradient():
    rng = np.random.default_rng(21)
    for _ in range(5):
        pred = rng.uniform(0.05, 0.95, size=(7, 1))
        target = rng.integers(0, 2, size=(7, 1)).astype(float)
        _, grad = bce_loss(pred, target)
        num = numeric_grad(lambda: bce_loss(pred, target)[0], pred)
        assert rel_error(grad, num) < 1e-5


def test_bce_values():
    loss, _ = bce_loss(np.array([0.5]), np.array([1.0]))
    assert abs(loss - np.log(2)) < 1e-12
    for t in (0.0, 1.0):
        loss, _ = bce_loss(np.array([t]), np.array([t]))
        assert loss <= -np.log(1 - 1e-7) + 1e-15


def test_dense_identity_and_chain_rule():
    d = Dense(2, 2)
    d.params["weight"][:] = np.eye(2)
    net = Network([d], (2,))
    np.testing.assert_array_equal(net.forward(np.array([[3.0, 4.0]])), [[3, 4]])
    single = Dense(1, 1)
    single.params["weight"][:] = 2.5
    net = Network([single], (1,))
    net.forward(np.array([[1.7]]))
    net.backward(np.ones((1, 1)))
    assert single.grads["weight"][0, 0] == 1.7 and single.grads["bias"][0] == 1.0


def test_activation_point_values():
    s = Network([Sigmoid()], (1,))
    assert s.forward(np.zeros((1, 1)))[0, 0] == 0.5
    t = Network([Tanh()], (1,))
    t.forward(np.zeros((1, 1)))
    assert t.backward(np.full((1, 1), 3.0))[0, 0] == 3.0
    assert np.all(np.isfinite(Network([Sigmoid()], (2,)).forward(np.array([[-800.0, 800.0]]))))


def test_convt_length():
    layer = ConvTranspose1d(1, 1, 4, 2, 1)
    net = Network([layer], (1, 8))
    assert net.output_shape == (1, 16)
    assert net.forward(np.zeros((2, 1, 8))).shape == (2, 1, 16)


def test_conv_then_convt_restores_length():
    for L in (8, 16, 64):
        net = Network([Conv1d(2, 3, 4, 2, 1), ConvTranspose1d(3, 2, 4, 2, 1)], (2, L))
        assert net.output_shape == (2, L)


def test_shape_mismatch_names_layer():
    with pytest.raises(LayerError, match="layer 1"):
        Network([Dense(4, 3), Dense(5, 2)], (4,))
    net = Network([Dense(4, 3)], (4,))
    with pytest.raises(LayerError, match="layer 0"):
        net.forward(np.zeros((2, 5)))


def test_backward_without_forward():
    net = Network([Dense(2, 2)], (2,))
    with pytest.raises(LayerError):
        net.backward(np.zeros((1, 2)))


def test_batchnorm_training_statistics():
    rng = np.random.default_rng(4)
    bn = BatchNorm1d(5)
    y = Network([bn], (5,)).forward(rng.normal(3, 4, size=(64, 5)))
    assert np.all(np.abs(y.mean(0)) < 1e-6)
    assert np.all(np.abs(y.var(0) - 1) < 1e-5 * 64)  # eps=1e-5 shifts the variance slightly
    y3 = Network([BatchNorm1d(3)], (3, 7)).forward(rng.normal(-2, 3, size=(8, 3, 7)))
    assert np.all(np.abs(y3.mean(axis=(0, 2))) < 1e-6)


def test_batchnorm_uses_running_stats_in_inference():
    bn = BatchNorm1d(2)
    net = Network([bn], (2,))
    x = np.array([[1.0, 10.0], [3.0, 30.0]])
    net.forward(x, training=True)
    np.testing.assert_allclose(bn.running_mean, [0.2, 2.0])
    out = net.forward(x, training=False)
    expected = (x - bn.running_mean) / np.sqrt(bn.running_var + bn.eps)
    np.testing.assert_allclose(out, expected)


def test_forward_deterministic():
    net = Network([Dense(3, 4), LeakyReLU(), Dense(4, 1), Sigmoid()], (3,))
    init_params(net, 3)
    x = np.random.default_rng(0).normal(size=(5, 3))
    assert np.array_equal(net.forward(x), net.forward(x))


def test_adam_first_step():
    p = np.zeros(4)
    st = AdamState([p], lr=0.001)
    adam_step([p], [np.ones(4)], st)
    np.testing.assert_allclose(p, -0.001, atol=1e-9)
    assert st.t == 1


def test_adam_zero_gradient():
    p = np.arange(3.0)
    st = AdamState([p])
    adam_step([p], [np.zeros(3)], st)
    np.testing.assert_array_equal(p, [0, 1, 2])


def test_adam_minimizes_square():
    x = np.array([1.0])
    st = AdamState([x], lr=0.05)
    for _ in range(100):
        adam_step([x], [2 * x], st)
    assert abs(x[0]) < 0.05


def test_init_params():
    def make():
        return Network([Dense(100, 100), BatchNorm1d(100), ReLU(), Dense(100, 2)], (100,))
    a, b = make(), make()
    init_params(a, 9)
    init_params(b, 9)
    for (pa, _), (pb, _) in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa, pb)
    w = a.layers[0].params["weight"].ravel()
    assert w.size == 10_000
    assert abs(w.mean()) < 3 * 0.02 / 100
    assert 0.018 <= w.std() <= 0.022
    assert np.all(a.layers[0].params["bias"] == 0) and np.all(a.layers[3].params["bias"] == 0)
    assert np.all(a.layers[1].params["gamma"] == 1) and np.all(a.layers[1].params["beta"] == 0)


def test_sfnet_round_trip(tmp_path):
    net = Network([Dense(6, 8), Reshape(2, 4), ConvTranspose1d(2, 1, 4, 2, 1), BatchNorm1d(1),
                   LeakyReLU(0.2), Conv1d(1, 2, 3, 1, 1), Flatten(), Dense(16, 1), Sigmoid()],
                  (6,))
    init_params(net, 1)
    net.forward(np.random.default_rng(0).normal(size=(4, 6)))  # move BN running stats
    p1, p2 = tmp_path / "a.sfnet", tmp_path / "b.sfnet"
    save_network(net, p1)
    raw = p1.read_bytes()
    assert raw.startswith(b"SFNET1\n")
    back = read_network(p1)
    assert back.describe() == net.describe()
    save_network(back, p2)
    assert p2.read_bytes() == raw
    x = np.random.default_rng(1).normal(size=(3, 6))
    np.testing.assert_array_equal(back.forward(x, False), net.forward(x, False))


def test_sfnet_rejects_corruption():
    net = Network([Dense(2, 2)], (2,))
    raw = network_bytes(net)
    with pytest.raises(ValueError):
        load_network(io.BytesIO(raw[:-3]))
    with pytest.raises(ValueError):
        load_network(io.BytesIO(b"NOPE\n" + raw))
