"""Minimal network description and forward pass used for fixture export.

This is an intentionally separate implementation of the layer semantics of
the shared model format (channels-first tensors, row-major flattening,
output size floor((extent - window + pad + stride) / stride)); probe files
generated with it cross-check the consuming implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def out_hw(hx, wx, fh, fw, ph, pw, sh, sw):
    hy = (hx - fh + ph + sh) // sh
    wy = (wx - fw + pw + sw) // sw
    if hy < 1 or wy < 1:
        raise ValueError(f"non-positive output dims {hy}x{wy}")
    return hy, wy


@dataclass
class Fc:
    kind = "fc"
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "relu"


@dataclass
class ConvLayer:
    kind = "conv"
    weights: np.ndarray  # (filters, in_ch, h, w)
    bias: np.ndarray
    pad: tuple = (0, 0)
    stride: tuple = (1, 1)
    activation: str = "relu"


@dataclass
class Pool:
    kind: str            # "avgpool" | "maxpool"
    window: tuple
    pad: tuple = (0, 0)
    stride: tuple = (1, 1)


@dataclass
class Net:
    layers: list
    input_shape: tuple

    def supported(self) -> bool:
        return all(l.kind in ("fc", "conv", "avgpool", "maxpool") for l in self.layers)


def _windows(x, fh, fw, ph, pw, sh, sw):
    """(hy, wy, window-stack) over the zero-padded input, channelwise."""
    c, hx, wx = x.shape
    hy, wy = out_hw(hx, wx, fh, fw, ph, pw, sh, sw)
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    out = np.empty((c, hy, wy, fh, fw))
    for iy in range(hy):
        for ix in range(wy):
            out[:, iy, ix] = xp[:, iy * sh:iy * sh + fh, ix * sw:ix * sw + fw]
    return hy, wy, out


def forward(net: Net, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(net.input_shape)
    for layer in net.layers:
        if layer.kind == "fc":
            z = layer.weights @ x.reshape(-1) + layer.bias
            x = np.maximum(z, 0.0) if layer.activation == "relu" else z
        elif layer.kind == "conv":
            f, cin, fh, fw = layer.weights.shape
            hy, wy, win = _windows(x, fh, fw, *layer.pad, *layer.stride)
            z = (np.einsum("fchw,cyxhw->fyx", layer.weights, win)
                 + layer.bias[:, None, None])
            x = np.maximum(z, 0.0) if layer.activation == "relu" else z
        elif layer.kind in ("avgpool", "maxpool"):
            fh, fw = layer.window
            hy, wy, win = _windows(x, fh, fw, *layer.pad, *layer.stride)
            x = (win.mean(axis=(3, 4)) if layer.kind == "avgpool"
                 else win.max(axis=(3, 4)))
        else:
            raise ValueError(f"unsupported layer kind {layer.kind!r}")
    return np.asarray(x, dtype=float).reshape(-1)
