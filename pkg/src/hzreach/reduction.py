"""Error-bounded neuron removal for ReLU FFNNs.

A hidden neuron j with post-activation bounds [alpha_j, beta_j] scores

    h_j = (sum_i |W_next[i, j]|) * (beta_j - alpha_j)

and is removed when h_j <= rho. The removed neurons' downstream
contribution is absorbed into the next layer's bias as an interval, so the
reduced network's reachable set over-approximates the original's. The total
width added across the next layer's pre-activations equals the sum of the
removed scores, hence is at most rho times the number removed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bounds import crown_bounds, ibp_bounds
from .intervals import Interval
from .model import FullyConnected, ModelError, Network

_BOUND_ENGINES = {"ibp": ibp_bounds, "crown": crown_bounds}


def neuron_scores(w_next: np.ndarray, post: Interval) -> np.ndarray:
    w_next = np.asarray(w_next, dtype=float)
    return np.abs(w_next).sum(axis=0) * post.width


def select_neurons(w_next: np.ndarray, post: Interval, rho: float) -> np.ndarray:
    """Indices of removable neurons: every j with score h_j <= rho."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    return np.flatnonzero(neuron_scores(w_next, post) <= rho)


def removal_error(w_next: np.ndarray, post: Interval, removed: np.ndarray) -> Interval:
    """Interval absorbed into the next bias when ``removed`` neurons vanish."""
    w_next = np.asarray(w_next, dtype=float)
    removed = np.asarray(removed, dtype=int)
    if removed.size == 0:
        return Interval.zeros(w_next.shape[0])
    return _matvec(w_next[:, removed], post[removed])


def _matvec(w: np.ndarray, iv: Interval) -> Interval:
    mid = w @ iv.mid
    rad = np.abs(w) @ iv.rad
    return Interval(mid - rad, mid + rad)


def error_size(eps: Interval) -> float:
    """Total width of the interval error, summed over components."""
    return float(np.sum(eps.width))


def reduce_layer(layer: FullyConnected, next_layer: FullyConnected,
                 post: Interval, removed: np.ndarray
                 ) -> tuple[FullyConnected, FullyConnected, Interval]:
    """Drop ``removed`` outputs of ``layer``; fold their effect into the next bias."""
    removed = np.asarray(removed, dtype=int)
    keep = np.setdiff1d(np.arange(layer.out_dim), removed)
    w = layer.weights_dense()
    wn = next_layer.weights_dense()
    eps = removal_error(wn, post, removed)
    new_layer = FullyConnected(w[keep, :], layer.bias[keep], layer.activation)
    new_next = FullyConnected(wn[:, keep], next_layer.bias + eps,
                              next_layer.activation)
    return new_layer, new_next, eps


def _rho_schedule(rho, num_hidden: int) -> list[float]:
    if np.isscalar(rho):
        return [float(rho)] * num_hidden
    rho = list(np.asarray(rho, dtype=float).reshape(-1))
    if len(rho) != num_hidden:
        raise ValueError(f"expected {num_hidden} per-layer thresholds, got {len(rho)}")
    return rho


@dataclass
class ReductionReport:
    layers: list = field(default_factory=list)

    def add(self, layer_idx: int, rho: float, before: int, removed: np.ndarray,
            eps: Interval) -> None:
        self.layers.append({
            "layer": layer_idx,
            "rho": rho,
            "neurons_before": before,
            "neurons_after": before - int(removed.size),
            "removed": [int(j) for j in removed],
            "error_lo": eps.lo.tolist(),
            "error_hi": eps.hi.tolist(),
            "error_size": error_size(eps),
        })

    @property
    def total_before(self) -> int:
        return sum(e["neurons_before"] for e in self.layers)

    @property
    def total_removed(self) -> int:
        return sum(len(e["removed"]) for e in self.layers)

    def to_dict(self) -> dict:
        return {"layers": self.layers,
                "neurons_before": self.total_before,
                "neurons_removed": self.total_removed}

    def save_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def reduce_network(net: Network, input_box: Interval, rho,
                   bound_method: str = "ibp") -> tuple[Network, ReductionReport]:
    """Reduce every hidden layer of an FFNN in input-to-output order.

    Bounds are recomputed on the partially reduced network before each
    layer's selection, so the accumulated interval biases are accounted for.
    ``rho`` is a scalar or one threshold per hidden layer.
    """
    if not net.is_ffnn():
        raise ModelError("reduction expects a fully-connected network")
    if bound_method not in _BOUND_ENGINES:
        raise ValueError(f"unknown bound method {bound_method!r}")
    engine = _BOUND_ENGINES[bound_method]
    layers = list(net.layers)
    num_hidden = len(layers) - 1
    schedule = _rho_schedule(rho, num_hidden)
    report = ReductionReport()
    for k in range(num_hidden):
        current = Network(layers, (net.input_dim,))
        post = engine(current, input_box)[k].post
        removed = select_neurons(layers[k + 1].weights_dense(), post, schedule[k])
        if removed.size == layers[k].out_dim and removed.size:
            # keep one neuron so the layer (and shape chain) stays well-formed;
            # drop the one with the largest score
            h = neuron_scores(layers[k + 1].weights_dense(), post)
            removed = np.delete(removed, int(np.argmax(h[removed])))
        new_layer, new_next, eps = reduce_layer(layers[k], layers[k + 1], post, removed)
        report.add(k, schedule[k], layers[k].out_dim, removed, eps)
        layers[k] = new_layer
        layers[k + 1] = new_next
    return Network(layers, (net.input_dim,)), report
