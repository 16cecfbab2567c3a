"""Tests for the embedding MLP: forward semantics, hand-checked backward,
initialization bounds, and checkpoint round-trips.
"""

import json

import numpy as np
import pytest

from metriclab import model as model_mod
from metriclab import numerics
from metriclab.errors import DimensionMismatch, IoError, SchemaError
from metriclab.losses import ClassifierWeights
from metriclab.model import EmbeddingModel, backward, forward, load_checkpoint, save_checkpoint


def test_init_shapes_and_bounds(rng):
    net = EmbeddingModel([5, 7, 3], rng)
    assert [W.shape for W in net.weights] == [(7, 5), (3, 7)]
    assert [b.shape for b in net.biases] == [(7,), (3,)]
    assert np.all(np.abs(net.weights[0]) <= 1.0 / np.sqrt(5))
    assert np.all(np.abs(net.weights[1]) <= 1.0 / np.sqrt(7))
    assert all(np.all(b == 0.0) for b in net.biases)
    assert net.embedding_dim == 3


def test_init_rejects_bad_widths(rng):
    with pytest.raises(DimensionMismatch):
        EmbeddingModel([4], rng)
    with pytest.raises(DimensionMismatch):
        EmbeddingModel([4, 0, 2], rng)


def test_forward_is_composed_affine_relu(rng):
    net = EmbeddingModel([3, 4, 2], rng)
    X = rng.normal(size=(6, 3))
    h = np.maximum(X @ net.weights[0].T + net.biases[0], 0.0)
    want = h @ net.weights[1].T + net.biases[1]
    assert np.allclose(forward(net, X), want, atol=1e-14)


def test_forward_linear_when_single_layer(rng):
    net = EmbeddingModel([4, 2], rng)
    X = rng.normal(size=(5, 4))
    assert np.allclose(forward(net, X), X @ net.weights[0].T + net.biases[0])


def test_forward_rejects_wrong_width(rng):
    net = EmbeddingModel([4, 2], rng)
    with pytest.raises(DimensionMismatch):
        forward(net, rng.normal(size=(3, 5)))


def test_backward_matches_fd(rng):
    net = EmbeddingModel([4, 6, 5, 3], rng)
    X = rng.normal(size=(7, 4))
    G = rng.normal(size=(7, 3))

    def scalar():
        return float(np.sum(G * forward(net, X)))

    w_grads, b_grads, x_grad = backward(net, X, G)

    for li in range(len(net.weights)):
        W0 = net.weights[li].copy()

        def f(Wf, li=li, W0=W0):
            net.weights[li] = Wf
            try:
                return scalar()
            finally:
                net.weights[li] = W0

        fd = numerics.finite_difference_gradient(f, W0)
        assert np.allclose(w_grads[li], fd, atol=1e-6), "layer %d weights" % li

        b0 = net.biases[li].copy()

        def g(bf, li=li, b0=b0):
            net.biases[li] = bf
            try:
                return scalar()
            finally:
                net.biases[li] = b0

        fd_b = numerics.finite_difference_gradient(g, b0)
        assert np.allclose(b_grads[li], fd_b, atol=1e-6), "layer %d bias" % li

    fd_x = numerics.finite_difference_gradient(
        lambda Xf: float(np.sum(G * forward(net, Xf))), X
    )
    assert np.allclose(x_grad, fd_x, atol=1e-6)


def test_backward_relu_blocks_dead_units(rng):
    # one hidden unit forced permanently negative: its incoming weights
    # must receive exactly zero gradient
    net = EmbeddingModel([3, 2, 2], rng)
    net.biases[0] = np.array([-100.0, 0.0])
    net.weights[0][0] = 0.0
    X = rng.normal(size=(5, 3))
    w_grads, _, _ = backward(net, X, rng.normal(size=(5, 2)))
    assert np.all(w_grads[0][0] == 0.0)
    assert np.any(w_grads[0][1] != 0.0)


def test_backward_shape_validation(rng):
    net = EmbeddingModel([3, 2], rng)
    X = rng.normal(size=(4, 3))
    with pytest.raises(DimensionMismatch):
        backward(net, X, rng.normal(size=(4, 3)))


# ------------------------------------------------------------- checkpoints

def test_checkpoint_roundtrip(tmp_path, rng):
    net = EmbeddingModel([4, 5, 2], rng)
    cls = ClassifierWeights(W=rng.normal(size=(3, 2)), bias=rng.normal(size=3))
    path = tmp_path / "ck.json"
    save_checkpoint(path, net, cls)

    net2, cls2 = load_checkpoint(path)
    assert net2.widths == net.widths
    for a, b in zip(net.weights, net2.weights):
        assert np.array_equal(a, b)
    for a, b in zip(net.biases, net2.biases):
        assert np.array_equal(a, b)
    assert np.array_equal(cls2.W, cls.W)
    assert np.array_equal(cls2.bias, cls.bias)

    X = rng.normal(size=(6, 4))
    assert np.allclose(forward(net, X), forward(net2, X), atol=1e-15)


def test_checkpoint_roundtrip_without_classifier(tmp_path, rng):
    net = EmbeddingModel([3, 2], rng)
    path = tmp_path / "ck.json"
    save_checkpoint(path, net)
    _, cls = load_checkpoint(path)
    assert cls is None


def test_checkpoint_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_checkpoint(tmp_path / "nope.json")


def test_checkpoint_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        load_checkpoint(p)


def test_checkpoint_missing_version(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"widths": [2, 2]}))
    with pytest.raises(SchemaError):
        load_checkpoint(p)


def test_checkpoint_wrong_version(tmp_path, rng):
    net = EmbeddingModel([3, 2], rng)
    p = tmp_path / "ck.json"
    save_checkpoint(p, net)
    record = json.loads(p.read_text())
    record["format_version"] = 99
    p.write_text(json.dumps(record))
    with pytest.raises(SchemaError):
        load_checkpoint(p)


def test_checkpoint_shape_mismatch(tmp_path, rng):
    net = EmbeddingModel([3, 2], rng)
    p = tmp_path / "ck.json"
    save_checkpoint(p, net)
    record = json.loads(p.read_text())
    record["weights"][0] = [[1.0, 2.0], [3.0, 4.0]]  # wrong fan-in
    p.write_text(json.dumps(record))
    with pytest.raises(SchemaError):
        load_checkpoint(p)
