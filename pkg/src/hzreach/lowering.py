"""Lowering of conv / pooling layers to fully-connected form.

Every transformation is an exact rewrite of the reference forward pass on
flattened (row-major) tensors. The lowering matrices are built directly in
sparse triplet form from the index maps; they are never densified.

Max pooling is realized as a stack of ReLU layers computing each window's
maximum through a balanced pairwise-max tree, using max(a, b) =
ReLU(a - b) + b and the identity split v = ReLU(v) - ReLU(-v) to carry
values through uniform ReLU stages.
"""

from __future__ import annotations

import json

import numpy as np
import scipy.sparse as sp

from .intervals import Interval
from .model import (AvgPool, Conv, FullyConnected, MaxPool, ModelError,
                    Network, pool_output_hw)


def build_pad_matrix(cx: int, hx: int, wx: int, ph: int, pw: int) -> sp.csr_matrix:
    """Sparse matrix mapping a flattened tensor to its zero-padded flattening."""
    hp_, wp_ = hx + 2 * ph, wx + 2 * pw
    icx, ihx, iwx = np.meshgrid(np.arange(cx), np.arange(hx), np.arange(wx),
                                indexing="ij")
    rows = (icx * hp_ * wp_ + (ihx + ph) * wp_ + pw + iwx).ravel()
    cols = (icx * hx * wx + ihx * wx + iwx).ravel()
    return sp.csr_matrix((np.ones(rows.size), (rows, cols)),
                         shape=(cx * hp_ * wp_, cx * hx * wx))


def build_conv_matrix(layer: Conv, in_shape) -> sp.csr_matrix:
    """Filter application on the padded, flattened input."""
    cx, hx, wx = in_shape
    fw_, _, hw_, ww_ = layer.weights.shape
    hy, wy = pool_output_hw(hx, wx, hw_, ww_, layer.pad_h, layer.pad_w,
                            layer.stride_h, layer.stride_w)
    hp_, wp_ = hx + 2 * layer.pad_h, wx + 2 * layer.pad_w

    icy, ihy, iwy, icx, ihw, iww = np.meshgrid(
        np.arange(fw_), np.arange(hy), np.arange(wy),
        np.arange(cx), np.arange(hw_), np.arange(ww_), indexing="ij")
    rows = (icy * hy * wy + ihy * wy + iwy).ravel()
    cols = (icx * hp_ * wp_ + (ihy * layer.stride_h + ihw) * wp_
            + iwy * layer.stride_w + iww).ravel()
    vals = layer.weights[icy.ravel(), icx.ravel(), ihw.ravel(), iww.ravel()]
    return sp.csr_matrix((vals, (rows, cols)), shape=(fw_ * hy * wy, cx * hp_ * wp_))


def _pool_indices(layer, in_shape):
    cx, hx, wx = in_shape
    hy, wy = pool_output_hw(hx, wx, layer.pool_h, layer.pool_w,
                            layer.pad_h, layer.pad_w, layer.stride_h, layer.stride_w)
    hp_, wp_ = hx + 2 * layer.pad_h, wx + 2 * layer.pad_w
    return hy, wy, hp_, wp_


def build_avgpool_matrix(layer: AvgPool, in_shape) -> sp.csr_matrix:
    cx = in_shape[0]
    hy, wy, hp_, wp_ = _pool_indices(layer, in_shape)
    icx, ihy, iwy, ihp, iwp = np.meshgrid(
        np.arange(cx), np.arange(hy), np.arange(wy),
        np.arange(layer.pool_h), np.arange(layer.pool_w), indexing="ij")
    rows = (icx * hy * wy + ihy * wy + iwy).ravel()
    cols = (icx * hp_ * wp_ + (ihy * layer.stride_h + ihp) * wp_
            + iwy * layer.stride_w + iwp).ravel()
    vals = np.full(rows.size, 1.0 / (layer.pool_h * layer.pool_w))
    return sp.csr_matrix((vals, (rows, cols)), shape=(cx * hy * wy, cx * hp_ * wp_))


def build_maxpool_selectors(layer: MaxPool, in_shape) -> list[sp.csr_matrix]:
    """One (pool_h*pool_w) x (padded length) selector per output cell."""
    cx = in_shape[0]
    hy, wy, hp_, wp_ = _pool_indices(layer, in_shape)
    ihp, iwp = np.meshgrid(np.arange(layer.pool_h), np.arange(layer.pool_w),
                           indexing="ij")
    rows = (ihp * layer.pool_w + iwp).ravel()
    selectors = []
    for icx in range(cx):
        for ihy_ in range(hy):
            for iwy_ in range(wy):
                cols = (icx * hp_ * wp_
                        + (ihy_ * layer.stride_h + ihp) * wp_
                        + iwy_ * layer.stride_w + iwp).ravel()
                selectors.append(sp.csr_matrix(
                    (np.ones(rows.size), (rows, cols)),
                    shape=(layer.pool_h * layer.pool_w, cx * hp_ * wp_)))
    return selectors


def _zero_bias(n: int) -> Interval:
    return Interval.zeros(n)


def lower_conv(layer: Conv, in_shape) -> FullyConnected:
    cy, hy, wy = layer.out_shape(in_shape)
    wpad = build_pad_matrix(in_shape[0], in_shape[1], in_shape[2],
                            layer.pad_h, layer.pad_w)
    wconv = build_conv_matrix(layer, in_shape)
    bias = Interval(np.repeat(layer.bias.lo, hy * wy), np.repeat(layer.bias.hi, hy * wy))
    return FullyConnected(wconv @ wpad, bias, layer.activation)


def lower_avgpool(layer: AvgPool, in_shape) -> FullyConnected:
    wpad = build_pad_matrix(in_shape[0], in_shape[1], in_shape[2],
                            layer.pad_h, layer.pad_w)
    wap = build_avgpool_matrix(layer, in_shape)
    w = wap @ wpad
    return FullyConnected(w, _zero_bias(w.shape[0]), "identity")


def lower_maxpool(layer: MaxPool, in_shape) -> list[FullyConnected]:
    """ReLU layer stack computing all window maxima, ending in a linear fold."""
    wpad = build_pad_matrix(in_shape[0], in_shape[1], in_shape[2],
                            layer.pad_h, layer.pad_w)
    selectors = build_maxpool_selectors(layer, in_shape)
    ncells = len(selectors)
    k = layer.pool_h * layer.pool_w
    # current: linear map from the previous layer's output to the cell values,
    # stacked cell-major with `width` values per cell
    current = sp.vstack(selectors, format="csr") @ wpad
    width = k
    layers: list[FullyConnected] = []
    if width == 1:
        return [FullyConnected(current, _zero_bias(ncells), "identity")]
    while width > 1:
        pairs, leftover = divmod(width, 2)
        per_cell = 3 * pairs + 2 * leftover
        stage_rows = []
        fold = sp.lil_matrix((ncells * (pairs + leftover), ncells * per_cell))
        for cell in range(ncells):
            base = cell * width
            out = cell * per_cell
            for i in range(pairs):
                a = current[base + 2 * i]
                b = current[base + 2 * i + 1]
                stage_rows.extend([a - b, b, -b])
                row = cell * (pairs + leftover) + i
                fold[row, out + 3 * i] = 1.0      # relu(a - b)
                fold[row, out + 3 * i + 1] = 1.0  # relu(b)
                fold[row, out + 3 * i + 2] = -1.0  # relu(-b)
            if leftover:
                v = current[base + width - 1]
                stage_rows.extend([v, -v])
                row = cell * (pairs + leftover) + pairs
                fold[row, out + 3 * pairs] = 1.0
                fold[row, out + 3 * pairs + 1] = -1.0
        stage = sp.vstack(stage_rows, format="csr")
        layers.append(FullyConnected(stage, _zero_bias(stage.shape[0]), "relu"))
        current = fold.tocsr()
        width = pairs + leftover
    layers.append(FullyConnected(current, _zero_bias(ncells), "identity"))
    return layers


def _as_sparse(w):
    return w if sp.issparse(w) else sp.csr_matrix(w)


def _interval_matvec(w, iv: Interval) -> Interval:
    absw = abs(_as_sparse(w))
    mid = _as_sparse(w) @ iv.mid
    rad = absw @ iv.rad
    return Interval(np.asarray(mid).ravel() - np.asarray(rad).ravel(),
                    np.asarray(mid).ravel() + np.asarray(rad).ravel())


def lower_network(net: Network) -> tuple[Network, dict]:
    """Rewrite a CNN as an equivalent FFNN.

    Returns the fully-connected network plus a provenance map from original
    layer indices to the ranges of lowered layers they produced (after the
    identity-fusion pass that merges linear pooling layers into their
    successors).
    """
    if net.is_ffnn():
        return net, {"lowered": False,
                     "layers": {str(i): [i] for i in range(len(net.layers))}}

    items = []  # (weights, bias Interval, activation, orig indices)
    for i, layer in enumerate(net.layers):
        shape = net.layer_shapes[i]
        if isinstance(layer, FullyConnected):
            items.append([layer.weights, layer.bias, layer.activation, [i]])
        elif isinstance(layer, Conv):
            fc = lower_conv(layer, shape)
            items.append([fc.weights, fc.bias, fc.activation, [i]])
        elif isinstance(layer, AvgPool):
            fc = lower_avgpool(layer, shape)
            items.append([fc.weights, fc.bias, fc.activation, [i]])
        elif isinstance(layer, MaxPool):
            for fc in lower_maxpool(layer, shape):
                items.append([fc.weights, fc.bias, fc.activation, [i]])
        else:
            raise ModelError(f"cannot lower layer type {type(layer).__name__}")

    # fuse identity-activated hidden layers into their successor so the FFNN
    # alternates affine + ReLU as the reachability engine expects
    fused = []
    pending = None  # identity layer awaiting its successor
    for w, b, act, origs in items:
        if pending is not None:
            pw, pb, _, porigs = pending
            b = _interval_matvec(w, pb) + b
            w = _as_sparse(w) @ _as_sparse(pw)
            origs = porigs + origs
            pending = None
        if act == "identity":
            pending = [w, b, act, origs]
        else:
            fused.append([w, b, act, origs])
    if pending is not None:
        fused.append(pending)

    if fused[-1][2] == "relu":
        # keep a linear output layer; the trailing ReLU becomes a hidden layer
        m = fused[-1][0].shape[0]
        fused.append([sp.identity(m, format="csr"), _zero_bias(m), "identity", [len(net.layers) - 1]])

    layers = [FullyConnected(w, b, act) for w, b, act, _ in fused]
    provenance: dict[str, list[int]] = {}
    for pos, (_, _, _, origs) in enumerate(fused):
        for o in origs:
            provenance.setdefault(str(o), []).append(pos)
    lowered = Network(layers, (net.input_dim,))
    return lowered, {"lowered": True, "layers": provenance}


def save_provenance(provenance: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(provenance, fh, indent=1)
