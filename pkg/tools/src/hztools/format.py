"""Independent writer/reader for the shared model file format.

JSON manifest (format tag, input shape, layer entries with blob offsets)
plus a little-endian float64 weight blob whose SHA-256 is pinned in the
manifest.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .nets import ConvLayer, Fc, Net, Pool

FORMAT = "hzreach-model-v1"


class _Blob:
    def __init__(self):
        self.parts = []
        self.offset = 0

    def put(self, arr) -> dict:
        arr = np.asarray(arr, dtype="<f8")
        ref = {"offset": self.offset, "shape": list(arr.shape)}
        self.parts.append(arr.tobytes(order="C"))
        self.offset += arr.size
        return ref


def _entry(layer, blob: _Blob) -> dict:
    if layer.kind == "fc":
        return {"kind": "fc", "activation": layer.activation,
                "weights": blob.put(layer.weights),
                "bias_lo": blob.put(layer.bias), "bias_hi": blob.put(layer.bias)}
    if layer.kind == "conv":
        return {"kind": "conv", "activation": layer.activation,
                "pad_h": layer.pad[0], "pad_w": layer.pad[1],
                "stride_h": layer.stride[0], "stride_w": layer.stride[1],
                "weights": blob.put(layer.weights),
                "bias_lo": blob.put(layer.bias), "bias_hi": blob.put(layer.bias)}
    if layer.kind in ("avgpool", "maxpool"):
        return {"kind": layer.kind,
                "pool_h": layer.window[0], "pool_w": layer.window[1],
                "pad_h": layer.pad[0], "pad_w": layer.pad[1],
                "stride_h": layer.stride[0], "stride_w": layer.stride[1]}
    raise ValueError(f"refusing to export unsupported layer kind {layer.kind!r}")


def write_model(net: Net, path: str) -> str:
    """Write manifest + blob; returns the blob's SHA-256 hex digest."""
    if not net.supported():
        raise ValueError("network contains unsupported layer kinds")
    blob = _Blob()
    layers = [_entry(l, blob) for l in net.layers]
    raw = b"".join(blob.parts)
    digest = hashlib.sha256(raw).hexdigest()
    blob_name = os.path.basename(path) + ".bin"
    manifest = {"format": FORMAT, "input_shape": list(net.input_shape),
                "blob": blob_name, "blob_sha256": digest, "layers": layers}
    with open(os.path.join(os.path.dirname(path) or ".", blob_name), "wb") as fh:
        fh.write(raw)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return digest


def read_model(path: str) -> Net:
    """Read a model back with this package's layer classes (self-check)."""
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != FORMAT:
        raise ValueError(f"unknown format {manifest.get('format')!r}")
    blob_path = os.path.join(os.path.dirname(path) or ".", manifest["blob"])
    with open(blob_path, "rb") as fh:
        raw = fh.read()
    if hashlib.sha256(raw).hexdigest() != manifest["blob_sha256"]:
        raise ValueError("blob checksum mismatch")
    data = np.frombuffer(raw, dtype="<f8")

    def get(ref):
        shape = tuple(ref["shape"])
        n = int(np.prod(shape)) if shape else 1
        return data[ref["offset"]:ref["offset"] + n].reshape(shape).copy()

    layers = []
    for e in manifest["layers"]:
        if e["kind"] == "fc":
            layers.append(Fc(get(e["weights"]), get(e["bias_lo"]), e["activation"]))
        elif e["kind"] == "conv":
            layers.append(ConvLayer(get(e["weights"]), get(e["bias_lo"]),
                                    (e["pad_h"], e["pad_w"]),
                                    (e["stride_h"], e["stride_w"]),
                                    e["activation"]))
        elif e["kind"] in ("avgpool", "maxpool"):
            layers.append(Pool(e["kind"], (e["pool_h"], e["pool_w"]),
                               (e["pad_h"], e["pad_w"]),
                               (e["stride_h"], e["stride_w"])))
        else:
            raise ValueError(f"unknown layer kind {e['kind']!r}")
    return Net(layers, tuple(manifest["input_shape"]))


def export_model(net: Net, path: str, probes: int = 16, seed: int = 0) -> dict:
    """Write the model plus a probe file of (input, output) pairs."""
    digest = write_model(net, path)
    from .nets import forward

    rng = np.random.default_rng(seed)
    n_in = int(np.prod(net.input_shape))
    pairs = []
    for _ in range(probes):
        x = rng.uniform(-1.0, 1.0, size=n_in)
        pairs.append({"input": x.tolist(), "output": forward(net, x).tolist()})
    probe_path = path + ".probes.json"
    with open(probe_path, "w") as fh:
        json.dump({"model": os.path.basename(path), "sha256": digest,
                   "probes": pairs}, fh)
    return {"sha256": digest, "probes": probe_path}
