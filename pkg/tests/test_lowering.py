import numpy as np
import pytest

from hzreach import (AvgPool, Conv, FullyConnected, Interval, MaxPool,
                     MaxoutGroup, ModelError, Network, infer, load_model,
                     lower_network)
from hzreach.lowering import (build_avgpool_matrix, build_conv_matrix,
                              build_maxpool_selectors, build_pad_matrix,
                              lower_avgpool, lower_conv, lower_maxpool)
from hzreach.model import flatten_tensor


def _random_image(rng, shape):
    return rng.uniform(-3.0, 3.0, size=shape)


def test_pad_matrix_entries():
    # 1 channel, 2x2 image, pad 1 -> 4x4 padded; pixel (0,0) lands at
    # padded row 1, col 1, i.e. flat index 5
    m = build_pad_matrix(1, 2, 2, 1, 1)
    assert m.shape == (16, 4)
    assert m[5, 0] == 1.0
    assert m[6, 1] == 1.0
    assert m[9, 2] == 1.0
    assert m[10, 3] == 1.0
    assert m.nnz == 4


def test_pad_matrix_matches_numpy_pad(rng):
    shape = (2, 3, 4)
    m = build_pad_matrix(2, 3, 4, 2, 1)
    x = _random_image(rng, shape)
    ref = np.pad(x, ((0, 0), (2, 2), (1, 1)))
    np.testing.assert_allclose(m @ flatten_tensor(x), flatten_tensor(ref))


def test_conv_matrix_matches_reference(rng):
    from hzreach.model import forward_conv

    shape = (2, 5, 6)
    layer = Conv(rng.standard_normal((3, 2, 3, 2)),
                 Interval.point(np.zeros(3)), pad_h=1, pad_w=1,
                 stride_h=2, stride_w=1, activation="identity")
    x = _random_image(rng, shape)
    padded = flatten_tensor(np.pad(x, ((0, 0), (1, 1), (1, 1))))
    y = build_conv_matrix(layer, shape) @ padded
    np.testing.assert_allclose(y, flatten_tensor(forward_conv(layer, x)),
                               atol=1e-12)


def test_avgpool_matrix_matches_reference(rng):
    from hzreach.model import forward_avgpool

    shape = (2, 4, 6)
    layer = AvgPool(2, 3, stride_h=2, stride_w=3)
    x = _random_image(rng, shape)
    y = build_avgpool_matrix(layer, shape) @ flatten_tensor(x)
    np.testing.assert_allclose(y, flatten_tensor(forward_avgpool(layer, x)),
                               atol=1e-12)


def test_maxpool_selectors_pick_window_values(rng):
    shape = (1, 4, 4)
    layer = MaxPool(2, 2, stride_h=2, stride_w=2)
    sels = build_maxpool_selectors(layer, shape)
    assert len(sels) == 4
    x = _random_image(rng, shape)
    flat = flatten_tensor(x)
    window0 = sels[0] @ flat
    np.testing.assert_allclose(sorted(window0),
                               sorted([x[0, 0, 0], x[0, 0, 1],
                                       x[0, 1, 0], x[0, 1, 1]]))


@pytest.mark.parametrize("pad,stride", [((0, 0), (1, 1)), ((1, 2), (2, 3))])
def test_lower_conv_exact(rng, pad, stride):
    from hzreach.model import forward_conv, forward_fc

    shape = (2, 6, 7)
    layer = Conv(rng.standard_normal((3, 2, 3, 3)),
                 Interval.point(rng.standard_normal(3)),
                 pad_h=pad[0], pad_w=pad[1], stride_h=stride[0],
                 stride_w=stride[1], activation="relu")
    fc = lower_conv(layer, shape)
    for _ in range(5):
        x = _random_image(rng, shape)
        np.testing.assert_allclose(forward_fc(fc, flatten_tensor(x)),
                                   flatten_tensor(forward_conv(layer, x)),
                                   atol=1e-10)


def test_lower_avgpool_exact(rng):
    from hzreach.model import forward_avgpool, forward_fc

    shape = (3, 5, 5)
    layer = AvgPool(3, 3, pad_h=1, pad_w=1, stride_h=2, stride_w=2)
    fc = lower_avgpool(layer, shape)
    for _ in range(5):
        x = _random_image(rng, shape)
        np.testing.assert_allclose(forward_fc(fc, flatten_tensor(x)),
                                   flatten_tensor(forward_avgpool(layer, x)),
                                   atol=1e-12)


@pytest.mark.parametrize("pool,stride", [((2, 2), (2, 2)), ((3, 3), (1, 1)),
                                         ((1, 1), (2, 2)), ((2, 3), (2, 3))])
def test_lower_maxpool_exact(rng, pool, stride):
    from hzreach.model import forward_fc, forward_maxpool

    shape = (2, 5, 6)
    layer = MaxPool(pool[0], pool[1], stride_h=stride[0], stride_w=stride[1])
    stack = lower_maxpool(layer, shape)
    # the stack ends in a linear fold; all preceding layers are ReLU
    assert stack[-1].activation == "identity"
    assert all(l.activation == "relu" for l in stack[:-1])
    for _ in range(5):
        x = _random_image(rng, shape)
        cur = flatten_tensor(x)
        for fc in stack:
            cur = forward_fc(fc, cur)
        np.testing.assert_allclose(cur, flatten_tensor(forward_maxpool(layer, x)),
                                   atol=1e-10)


def _random_cnn(rng):
    """Random small CNN touching conv, both pools, and a dense head."""
    c = rng.integers(1, 3)
    f = rng.integers(1, 4)
    net_in = (int(c), 8, 8)
    conv = Conv(rng.standard_normal((int(f), int(c), 3, 3)),
                Interval.point(rng.standard_normal(int(f))),
                pad_h=int(rng.integers(0, 2)), pad_w=int(rng.integers(0, 2)),
                stride_h=1, stride_w=1, activation="relu")
    layers = [conv]
    shape = conv.out_shape(net_in)
    pool_cls = AvgPool if rng.integers(0, 2) else MaxPool
    pool = pool_cls(2, 2, stride_h=2, stride_w=2)
    layers.append(pool)
    shape = pool.out_shape(shape)
    n = int(np.prod(shape))
    layers.append(FullyConnected(rng.standard_normal((3, n)),
                                 Interval.point(rng.standard_normal(3)),
                                 "identity"))
    return Network(layers, net_in)


def test_lower_network_exact_on_random_cnns(rng):
    for _ in range(10):
        net = _random_cnn(rng)
        lowered, provenance = lower_network(net)
        assert lowered.is_ffnn()
        assert provenance["lowered"]
        for _ in range(4):
            x = rng.uniform(-2.0, 2.0, size=net.input_dim)
            np.testing.assert_allclose(infer(lowered, x), infer(net, x),
                                       atol=1e-9)


def test_lower_network_alternates_affine_relu():
    rng = np.random.default_rng(3)
    net = _random_cnn(rng)
    lowered, _ = lower_network(net)
    # hidden layers are all ReLU, the output layer is linear
    assert lowered.layers[-1].activation == "identity"
    assert all(l.activation == "relu" for l in lowered.layers[:-1])


def test_lower_network_passthrough_for_ffnn(tiny_net):
    lowered, provenance = lower_network(tiny_net)
    assert lowered is tiny_net
    assert provenance["lowered"] is False


def test_lower_network_provenance_covers_all_layers():
    rng = np.random.default_rng(4)
    net = _random_cnn(rng)
    _, provenance = lower_network(net)
    assert set(provenance["layers"]) == {str(i) for i in range(len(net.layers))}


def test_lower_network_rejects_maxout():
    net = Network([MaxoutGroup(np.eye(4), Interval.point(np.zeros(4)), 2),
                   FullyConnected(np.eye(2), Interval.point(np.zeros(2)),
                                  "identity")], (4,))
    with pytest.raises(ModelError):
        lower_network(net)


def test_lower_trailing_relu_gets_linear_output():
    rng = np.random.default_rng(5)
    conv = Conv(rng.standard_normal((1, 1, 2, 2)), Interval.point([0.0]),
                activation="relu")
    net = Network([conv], (1, 3, 3))
    lowered, _ = lower_network(net)
    assert lowered.layers[-1].activation == "identity"
    x = rng.uniform(-1, 1, size=9)
    np.testing.assert_allclose(infer(lowered, x), infer(net, x), atol=1e-12)


def test_lowered_fixture_agrees_with_reference(fixtures, rng):
    net = load_model(str(fixtures / "mnist_cnn.json"))
    lowered, _ = lower_network(net)
    for _ in range(4):
        x = rng.uniform(0.0, 255.0, size=net.input_dim)
        np.testing.assert_allclose(infer(lowered, x), infer(net, x),
                                   atol=1e-8, rtol=1e-12)
