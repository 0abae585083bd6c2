import numpy as np
import pytest

from hztools.nets import ConvLayer, Fc, Net, Pool, forward, out_hw


def test_out_hw_formula():
    assert out_hw(28, 28, 5, 5, 0, 0, 3, 3) == (8, 8)
    assert out_hw(4, 6, 2, 3, 0, 0, 2, 3) == (2, 2)
    assert out_hw(5, 5, 3, 3, 1, 1, 2, 2) == (2, 2)
    with pytest.raises(ValueError):
        out_hw(2, 2, 5, 5, 0, 0, 1, 1)


def test_forward_fc_relu():
    net = Net([Fc(np.array([[1.0, -1.0]]), np.array([0.5]), "relu")], (2,))
    np.testing.assert_allclose(forward(net, np.array([2.0, 1.0])), [1.5])
    np.testing.assert_allclose(forward(net, np.array([0.0, 2.0])), [0.0])


def test_forward_conv_hand_example():
    # 2x2 summing filter over a 3x3 ramp image
    w = np.ones((1, 1, 2, 2))
    net = Net([ConvLayer(w, np.zeros(1), activation="identity")], (1, 3, 3))
    y = forward(net, np.arange(9.0))
    np.testing.assert_allclose(y, [8.0, 12.0, 20.0, 24.0])


def test_forward_conv_stride_and_pad():
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    net = Net([ConvLayer(w, np.ones(1), pad=(1, 1), stride=(2, 2),
                         activation="identity")], (1, 4, 4))
    y = forward(net, np.arange(16.0))
    np.testing.assert_allclose(y, [1.0, 3.0, 9.0, 11.0])


def test_forward_pools():
    x = np.array([1.0, 2.0, 5.0, 6.0,
                  3.0, 4.0, 7.0, 8.0,
                  0.0, 0.0, -1.0, -2.0,
                  0.0, 0.0, -3.0, -4.0])
    avg = Net([Pool("avgpool", (2, 2), stride=(2, 2))], (1, 4, 4))
    mx = Net([Pool("maxpool", (2, 2), stride=(2, 2))], (1, 4, 4))
    np.testing.assert_allclose(forward(avg, x), [2.5, 6.5, 0.0, -2.5])
    np.testing.assert_allclose(forward(mx, x), [4.0, 8.0, 0.0, -1.0])


def test_forward_rejects_unknown_kind():
    class Odd:
        kind = "odd"

    net = Net([Odd()], (1, 2, 2))
    assert not net.supported()
    with pytest.raises(ValueError):
        forward(net, np.zeros(4))
