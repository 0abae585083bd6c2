"""Per-layer pre-/post-activation interval bounds for ReLU FFNNs.

Three engines with increasing cost and tightness: plain interval
propagation, backward linear relaxation (CROWN-style), and exact interval
hulls of propagated hybrid zonotopes. The linear-relaxation bounds are
intersected with the interval-propagation bounds, so they are elementwise
at least as tight by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .intervals import Interval
from .model import FullyConnected, Network

#: Below this pre-activation width an unstable neuron is treated as stable.
STABLE_WIDTH_GUARD = 1e-12


@dataclass
class LayerBounds:
    pre: Interval
    post: Interval


@dataclass
class LinearBoundPair:
    """Affine lower/upper envelopes in the network input variables."""
    lower_slope: np.ndarray
    lower_offset: np.ndarray
    upper_slope: np.ndarray
    upper_offset: np.ndarray

    def concretize(self, box: Interval) -> Interval:
        up = np.maximum(self.upper_slope, 0.0)
        un = np.minimum(self.upper_slope, 0.0)
        lp = np.maximum(self.lower_slope, 0.0)
        ln = np.minimum(self.lower_slope, 0.0)
        hi = self.upper_offset + up @ box.hi + un @ box.lo
        lo = self.lower_offset + lp @ box.lo + ln @ box.hi
        return Interval(np.minimum(lo, hi), np.maximum(lo, hi))


def _ffnn_layers(net: Network) -> list[FullyConnected]:
    if not net.is_ffnn():
        raise ValueError("bound propagation expects a fully-connected network")
    return net.layers


def _apply_activation(layer: FullyConnected, pre: Interval) -> Interval:
    return pre.relu() if layer.activation == "relu" else pre


def ibp_bounds(net: Network, input_box: Interval) -> list[LayerBounds]:
    """Interval propagation; sound for every selection of the interval biases."""
    layers = _ffnn_layers(net)
    box = input_box
    out = []
    for layer in layers:
        pre = box.matmul(layer.weights_dense()) + layer.bias
        post = _apply_activation(layer, pre)
        out.append(LayerBounds(pre, post))
        box = post
    return out


def _relu_relaxation(pre: Interval):
    """Per-neuron slopes/offsets of the ReLU envelope over the pre-bounds."""
    alpha, beta = pre.lo, pre.hi
    n = alpha.shape[0]
    us = np.zeros(n)
    ut = np.zeros(n)
    ls = np.zeros(n)
    pos = alpha >= 0.0
    neg = beta <= 0.0
    tiny = (beta - alpha) < STABLE_WIDTH_GUARD
    pos |= tiny & ~neg
    unstable = ~(pos | neg)
    us[pos] = 1.0
    ls[pos] = 1.0
    w = np.where(unstable, beta - alpha, 1.0)
    us[unstable] = (beta / w)[unstable]
    ut[unstable] = (-alpha * beta / w)[unstable]
    ls[unstable] = (np.abs(alpha) < beta)[unstable].astype(float)
    return us, ut, ls


def crown_linear_bounds(net: Network, pre_bounds: list[Interval],
                        layer_k: int) -> LinearBoundPair:
    """Backward substitution for layer ``layer_k``'s pre-activations."""
    layers = _ffnn_layers(net)
    wk = layers[layer_k].weights_dense()
    au = wk.copy()
    al = wk.copy()
    bu = layers[layer_k].bias.hi.copy()
    bl = layers[layer_k].bias.lo.copy()
    for j in range(layer_k - 1, -1, -1):
        layer = layers[j]
        if layer.activation == "relu":
            us, ut, ls = _relu_relaxation(pre_bounds[j])
            aup, aun = np.maximum(au, 0.0), np.minimum(au, 0.0)
            alp, aln = np.maximum(al, 0.0), np.minimum(al, 0.0)
            bu = bu + aup @ ut
            bl = bl + aln @ ut
            au = aup * us + aun * ls
            al = alp * ls + aln * us
        w = layer.weights_dense()
        aup, aun = np.maximum(au, 0.0), np.minimum(au, 0.0)
        alp, aln = np.maximum(al, 0.0), np.minimum(al, 0.0)
        bu = bu + aup @ layer.bias.hi + aun @ layer.bias.lo
        bl = bl + alp @ layer.bias.lo + aln @ layer.bias.hi
        au = au @ w
        al = al @ w
    return LinearBoundPair(al, bl, au, bu)


def crown_bounds(net: Network, input_box: Interval) -> list[LayerBounds]:
    """Backward linear-relaxation bounds, clipped to the interval bounds."""
    layers = _ffnn_layers(net)
    ibp = ibp_bounds(net, input_box)
    pre_bounds: list[Interval] = []
    out = []
    for k, layer in enumerate(layers):
        pair = crown_linear_bounds(net, pre_bounds, k)
        pre = pair.concretize(input_box).intersect(ibp[k].pre)
        post = _apply_activation(layer, pre)
        pre_bounds.append(pre)
        out.append(LayerBounds(pre, post))
    return out


def exact_hull_bounds(prefix_net: Network, input_hz) -> Interval:
    """Exact interval hull of the pre-activations of the prefix's last layer.

    Propagates the input set exactly (no reduction, no relaxation) through
    the hidden layers of ``prefix_net`` and solves one mixed-binary program
    per bound.
    """
    from .reach import ReachConfig, propagate_preactivation

    z = propagate_preactivation(prefix_net, input_hz,
                                ReachConfig(rho=0.0, gamma=0.0, bound_method="ibp"))
    return z.interval_hull()


def dump_bounds_csv(bounds: list[LayerBounds], path: str) -> None:
    with open(path, "w") as fh:
        fh.write("layer,neuron,alpha,beta\n")
        for k, lb in enumerate(bounds):
            for i, (a, b) in enumerate(zip(lb.pre.lo, lb.pre.hi)):
                fh.write(f"{k},{i},{a:.17g},{b:.17g}\n")
