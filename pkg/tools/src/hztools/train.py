"""Tiny deterministic fixture training.

Architecture presets pair a fixed random feature extractor (conv layers)
with a softmax linear head trained by full-batch gradient descent, so
every run with the same seed reproduces the exported blob bit for bit.
"""

from __future__ import annotations

import numpy as np
from sklearn.datasets import load_digits

from .nets import ConvLayer, Fc, Net, forward

PIXEL_SCALE = 255.0


def dataset(name: str, seed: int = 0):
    """(images, labels) with pixel values in [0, 255]."""
    rng = np.random.default_rng(seed)
    if name == "mnist_subset":
        digits = load_digits()
        images = digits.images[:, None, :, :] * (PIXEL_SCALE / 16.0)
        return images.astype(float), digits.target.astype(int)
    if name == "synthetic":
        # two blob classes on 1x6x6 images
        n = 400
        labels = rng.integers(0, 2, size=n)
        images = rng.uniform(0.0, 40.0, size=(n, 1, 6, 6))
        images[labels == 1, :, 2:4, 2:4] += 200.0
        return np.clip(images, 0.0, PIXEL_SCALE), labels
    raise ValueError(f"unknown dataset {name!r}")


def _feature_net(arch: str, in_shape, seed: int) -> list:
    rng = np.random.default_rng(seed + 1)
    if arch == "toy_cnn":
        w = rng.standard_normal((4, in_shape[0], 3, 3)) * 0.2
        b = rng.standard_normal(4) * 0.05
        return [ConvLayer(w, b, pad=(0, 0), stride=(2, 2), activation="relu")]
    if arch == "ffnn4":
        n_in = int(np.prod(in_shape))
        dims = [n_in, 24, 20, 16]
        layers = []
        for a, b_ in zip(dims, dims[1:]):
            w = rng.standard_normal((b_, a)) * (1.2 / np.sqrt(a))
            layers.append(Fc(w, rng.standard_normal(b_) * 0.05, "relu"))
        return layers
    raise ValueError(f"unknown architecture preset {arch!r}")


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_fixture(dataset_name: str, arch: str, seed: int = 0,
                  samples: int = 300, epochs: int = 3000, lr: float = 1.0,
                  feature_scale: float = 1.0 / PIXEL_SCALE) -> tuple[Net, float]:
    """Train a softmax head on fixed random features; returns (net, accuracy).

    ``feature_scale`` is folded into the first layer's weights so exported
    models consume raw 0-255 pixels.
    """
    images, labels = dataset(dataset_name, seed)
    images, labels = images[:samples], labels[:samples]
    classes = int(labels.max()) + 1
    in_shape = images.shape[1:]

    features = _feature_net(arch, in_shape, seed)
    scaled = [_scale_first(features[0], feature_scale)] + features[1:]
    feats = np.array([forward(Net(scaled, in_shape), img) for img in images])

    rng = np.random.default_rng(seed + 2)
    w = rng.standard_normal((classes, feats.shape[1])) * 0.01
    b = np.zeros(classes)
    onehot = np.eye(classes)[labels]
    n = feats.shape[0]
    for _ in range(epochs):
        p = _softmax(feats @ w.T + b)
        grad = (p - onehot) / n
        w -= lr * (grad.T @ feats)
        b -= lr * grad.sum(axis=0)
    net = Net(scaled + [Fc(w, b, "identity")], in_shape)
    pred = np.array([np.argmax(forward(net, img)) for img in images])
    return net, float(np.mean(pred == labels))


def _scale_first(layer, scale: float):
    if layer.kind == "conv":
        return ConvLayer(layer.weights * scale, layer.bias, layer.pad,
                         layer.stride, layer.activation)
    return Fc(layer.weights * scale, layer.bias, layer.activation)
