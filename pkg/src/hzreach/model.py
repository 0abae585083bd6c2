"""Network and tensor data model, file format, and reference forward passes.

The forward passes here are the ground truth that the CNN lowering and the
reachability engine are tested against. 3-D tensors are numpy arrays of
shape (channels, height, width); flattening is row-major (C order), so
index (ic, ih, iw) lands at ic*h*w + ih*w + iw.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .intervals import Interval

MODEL_FORMAT = "hzreach-model-v1"


class ModelError(Exception):
    """Schema violation, shape inconsistency, or checksum mismatch."""


def flatten_tensor(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)


def unflatten_tensor(v: np.ndarray, shape) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(shape)


def pool_output_hw(hx, wx, fh, fw, ph, pw, sh, sw) -> tuple[int, int]:
    """Output height/width shared by conv and pooling layers."""
    hy = (hx - fh + ph + sh) // sh
    wy = (wx - fw + pw + sw) // sw
    if hy < 1 or wy < 1:
        raise ModelError(f"non-positive output dims {hy}x{wy}")
    return int(hy), int(wy)


def _check_hyper(ph, pw, sh, sw):
    if ph < 0 or pw < 0:
        raise ModelError("paddings must be nonnegative")
    if sh < 1 or sw < 1:
        raise ModelError("strides must be positive")


def _padded_value(x, ic, jh, jw):
    c, h, w = x.shape
    if 0 <= jh < h and 0 <= jw < w:
        return x[ic, jh, jw]
    return 0.0


@dataclass
class FullyConnected:
    kind = "fc"
    weights: object  # (m, n) ndarray or scipy sparse matrix
    bias: Interval
    activation: str = "relu"  # "relu" | "identity"

    def __post_init__(self):
        if self.activation not in ("relu", "identity"):
            raise ModelError(f"unknown activation {self.activation!r}")
        if not sp.issparse(self.weights):
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.ndim != 2:
                raise ModelError("weights must be a 2-D matrix")
        if self.weights.shape[0] != self.bias.dim:
            raise ModelError("bias length does not match weight rows")

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    def weights_dense(self) -> np.ndarray:
        w = self.weights
        return w.toarray() if sp.issparse(w) else np.asarray(w, dtype=float)


@dataclass
class Conv:
    kind = "conv"
    weights: np.ndarray  # (fW, cx, hW, wW)
    bias: Interval  # per output channel
    pad_h: int = 0
    pad_w: int = 0
    stride_h: int = 1
    stride_w: int = 1
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 4:
            raise ModelError("conv weights must be 4-D (filters, in_ch, h, w)")
        if self.bias.dim != self.weights.shape[0]:
            raise ModelError("conv bias length must equal filter count")
        if self.activation not in ("relu", "identity"):
            raise ModelError(f"unknown activation {self.activation!r}")
        _check_hyper(self.pad_h, self.pad_w, self.stride_h, self.stride_w)

    def out_shape(self, in_shape):
        cx, hx, wx = in_shape
        if cx != self.weights.shape[1]:
            raise ModelError("conv input channels mismatch")
        hy, wy = pool_output_hw(hx, wx, self.weights.shape[2], self.weights.shape[3],
                                self.pad_h, self.pad_w, self.stride_h, self.stride_w)
        return (self.weights.shape[0], hy, wy)


@dataclass
class _Pool:
    pool_h: int
    pool_w: int
    pad_h: int = 0
    pad_w: int = 0
    stride_h: int = 1
    stride_w: int = 1

    def __post_init__(self):
        if self.pool_h < 1 or self.pool_w < 1:
            raise ModelError("pool window must be at least 1x1")
        _check_hyper(self.pad_h, self.pad_w, self.stride_h, self.stride_w)

    def out_shape(self, in_shape):
        cx, hx, wx = in_shape
        hy, wy = pool_output_hw(hx, wx, self.pool_h, self.pool_w,
                                self.pad_h, self.pad_w, self.stride_h, self.stride_w)
        return (cx, hy, wy)


@dataclass
class AvgPool(_Pool):
    kind = "avgpool"


@dataclass
class MaxPool(_Pool):
    kind = "maxpool"


@dataclass
class MaxoutGroup:
    """Fully-connected layer whose outputs are group-wise maxima."""
    kind = "maxout"
    weights: object
    bias: Interval
    group_size: int = 2

    def __post_init__(self):
        if self.group_size < 1 or self.weights.shape[0] % self.group_size:
            raise ModelError("weight rows must be a multiple of the group size")

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0] // self.group_size


@dataclass
class Network:
    layers: list
    input_shape: tuple  # (c, h, w) for CNNs, (n,) for FFNNs

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        # chain the shapes once to surface inconsistencies at construction
        self.layer_shapes = [self.input_shape]
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            if isinstance(layer, (Conv, AvgPool, MaxPool)):
                if len(shape) != 3:
                    raise ModelError(f"layer {i} expects a 3-D tensor input")
                shape = layer.out_shape(shape)
            elif isinstance(layer, (FullyConnected, MaxoutGroup)):
                if int(np.prod(shape)) != layer.in_dim:
                    raise ModelError(
                        f"layer {i} expects {layer.in_dim} inputs, got {np.prod(shape)}")
                shape = (layer.out_dim,)
            else:
                raise ModelError(f"unsupported layer type {type(layer).__name__}")
            self.layer_shapes.append(shape)

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.input_shape))

    @property
    def output_dim(self) -> int:
        return int(np.prod(self.layer_shapes[-1]))

    def is_ffnn(self) -> bool:
        return all(isinstance(l, FullyConnected) for l in self.layers)


# ------------------------------------------------------------- forward passes

def _require_point_bias(layer):
    if np.any(layer.bias.lo != layer.bias.hi):
        raise ModelError("reference forward pass requires a point bias")
    return layer.bias.lo


def forward_fc(layer: FullyConnected, x: np.ndarray) -> np.ndarray:
    v = _require_point_bias(layer)
    x = np.asarray(x, dtype=float).reshape(layer.in_dim)
    z = layer.weights @ x + v
    return np.maximum(z, 0.0) if layer.activation == "relu" else z


def forward_conv(layer: Conv, x: np.ndarray) -> np.ndarray:
    v = _require_point_bias(layer)
    x = np.asarray(x, dtype=float)
    cy, hy, wy = layer.out_shape(x.shape)
    fw, cx, hw, ww = layer.weights.shape
    y = np.empty((cy, hy, wy))
    for icy in range(cy):
        for ihy in range(hy):
            for iwy in range(wy):
                acc = v[icy]
                for icx in range(cx):
                    for ihw in range(hw):
                        for iww in range(ww):
                            jh = ihw + ihy * layer.stride_h - layer.pad_h
                            jw = iww + iwy * layer.stride_w - layer.pad_w
                            acc += layer.weights[icy, icx, ihw, iww] * _padded_value(x, icx, jh, jw)
                y[icy, ihy, iwy] = acc
    return np.maximum(y, 0.0) if layer.activation == "relu" else y


def _pool_windows(layer: _Pool, x: np.ndarray):
    cx = x.shape[0]
    _, hy, wy = layer.out_shape(x.shape)
    for icx in range(cx):
        for ihy in range(hy):
            for iwy in range(wy):
                vals = [
                    _padded_value(x, icx,
                                  ihp + ihy * layer.stride_h - layer.pad_h,
                                  iwp + iwy * layer.stride_w - layer.pad_w)
                    for ihp in range(layer.pool_h)
                    for iwp in range(layer.pool_w)
                ]
                yield (icx, ihy, iwy), vals


def forward_avgpool(layer: AvgPool, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.empty(layer.out_shape(x.shape))
    for idx, vals in _pool_windows(layer, x):
        y[idx] = sum(vals) / (layer.pool_h * layer.pool_w)
    return y


def forward_maxpool(layer: MaxPool, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.empty(layer.out_shape(x.shape))
    for idx, vals in _pool_windows(layer, x):
        y[idx] = max(vals)
    return y


def forward_maxout(layer: MaxoutGroup, x: np.ndarray) -> np.ndarray:
    v = _require_point_bias(layer)
    x = np.asarray(x, dtype=float).reshape(layer.in_dim)
    z = layer.weights @ x + v
    return z.reshape(layer.out_dim, layer.group_size).max(axis=1)


_FORWARD = {
    FullyConnected: forward_fc,
    Conv: forward_conv,
    AvgPool: forward_avgpool,
    MaxPool: forward_maxpool,
    MaxoutGroup: forward_maxout,
}


def infer(net: Network, x: np.ndarray) -> np.ndarray:
    """Composition of the per-layer reference forwards."""
    x = np.asarray(x, dtype=float)
    if x.shape != net.input_shape and x.size == net.input_dim:
        x = x.reshape(net.input_shape)
    elif x.shape != net.input_shape:
        raise ModelError(f"input shape {x.shape} does not match {net.input_shape}")
    for layer in net.layers:
        if isinstance(layer, (FullyConnected, MaxoutGroup)):
            x = flatten_tensor(x)
        x = _FORWARD[type(layer)](layer, x)
    return flatten_tensor(x)


# ------------------------------------------------------------------ model I/O

class _BlobWriter:
    def __init__(self):
        self.chunks = []
        self.offset = 0

    def put(self, arr) -> dict:
        arr = arr.toarray() if sp.issparse(arr) else np.asarray(arr, dtype=float)
        ref = {"offset": self.offset, "shape": list(arr.shape)}
        flat = np.ascontiguousarray(arr, dtype="<f8").reshape(-1)
        self.chunks.append(flat.tobytes())
        self.offset += flat.size
        return ref

    def bytes(self) -> bytes:
        return b"".join(self.chunks)


class _BlobReader:
    def __init__(self, raw: bytes):
        self.data = np.frombuffer(raw, dtype="<f8")

    def get(self, ref) -> np.ndarray:
        shape = tuple(ref["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = ref["offset"]
        if start + count > self.data.size:
            raise ModelError("weight blob shorter than the manifest claims")
        return self.data[start:start + count].astype(float).reshape(shape)


def _layer_manifest(layer, blob: _BlobWriter) -> dict:
    if isinstance(layer, FullyConnected):
        return {"kind": "fc", "activation": layer.activation,
                "weights": blob.put(layer.weights),
                "bias_lo": blob.put(layer.bias.lo), "bias_hi": blob.put(layer.bias.hi)}
    if isinstance(layer, Conv):
        return {"kind": "conv", "activation": layer.activation,
                "pad_h": layer.pad_h, "pad_w": layer.pad_w,
                "stride_h": layer.stride_h, "stride_w": layer.stride_w,
                "weights": blob.put(layer.weights),
                "bias_lo": blob.put(layer.bias.lo), "bias_hi": blob.put(layer.bias.hi)}
    if isinstance(layer, (AvgPool, MaxPool)):
        return {"kind": layer.kind,
                "pool_h": layer.pool_h, "pool_w": layer.pool_w,
                "pad_h": layer.pad_h, "pad_w": layer.pad_w,
                "stride_h": layer.stride_h, "stride_w": layer.stride_w}
    if isinstance(layer, MaxoutGroup):
        return {"kind": "maxout", "group_size": layer.group_size,
                "weights": blob.put(layer.weights),
                "bias_lo": blob.put(layer.bias.lo), "bias_hi": blob.put(layer.bias.hi)}
    raise ModelError(f"unsupported layer type {type(layer).__name__}")


def _layer_from_manifest(entry: dict, blob: _BlobReader):
    kind = entry.get("kind")
    if kind == "fc":
        return FullyConnected(blob.get(entry["weights"]),
                              Interval(blob.get(entry["bias_lo"]), blob.get(entry["bias_hi"])),
                              entry["activation"])
    if kind == "conv":
        return Conv(blob.get(entry["weights"]),
                    Interval(blob.get(entry["bias_lo"]), blob.get(entry["bias_hi"])),
                    entry["pad_h"], entry["pad_w"], entry["stride_h"], entry["stride_w"],
                    entry["activation"])
    if kind in ("avgpool", "maxpool"):
        cls = AvgPool if kind == "avgpool" else MaxPool
        return cls(entry["pool_h"], entry["pool_w"], entry["pad_h"], entry["pad_w"],
                   entry["stride_h"], entry["stride_w"])
    if kind == "maxout":
        return MaxoutGroup(blob.get(entry["weights"]),
                           Interval(blob.get(entry["bias_lo"]), blob.get(entry["bias_hi"])),
                           entry["group_size"])
    raise ModelError(f"unknown layer kind {kind!r}")


def save_model(net: Network, path: str) -> None:
    """Write the JSON manifest at ``path`` and the weight blob next to it."""
    blob = _BlobWriter()
    layers = [_layer_manifest(l, blob) for l in net.layers]
    raw = blob.bytes()
    blob_name = os.path.basename(path) + ".bin"
    manifest = {
        "format": MODEL_FORMAT,
        "input_shape": list(net.input_shape),
        "blob": blob_name,
        "blob_sha256": hashlib.sha256(raw).hexdigest(),
        "layers": layers,
    }
    with open(os.path.join(os.path.dirname(path) or ".", blob_name), "wb") as fh:
        fh.write(raw)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_model(path: str) -> Network:
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != MODEL_FORMAT:
        raise ModelError(f"unknown model format {manifest.get('format')!r}")
    blob_path = os.path.join(os.path.dirname(path) or ".", manifest["blob"])
    with open(blob_path, "rb") as fh:
        raw = fh.read()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != manifest["blob_sha256"]:
        raise ModelError("weight blob checksum mismatch")
    blob = _BlobReader(raw)
    layers = [_layer_from_manifest(e, blob) for e in manifest["layers"]]
    return Network(layers, tuple(manifest["input_shape"]))


def dump_tensor_csv(x: np.ndarray, path: str) -> None:
    """Debug dump: one CSV block per channel, blank-line separated."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        x = x.reshape(1, 1, -1)
    with open(path, "w") as fh:
        for ic in range(x.shape[0]):
            fh.write(f"# channel {ic}\n")
            for row in x[ic]:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
            fh.write("\n")
