"""Generate every committed fixture consumed by the main test suite."""

from __future__ import annotations

import argparse
import json
import os

import numpy as np

from .format import export_model
from .nets import ConvLayer, Fc, Net, Pool
from .oracle import exact_ranges
from .plot import plot_ranges
from .train import dataset, train_fixture


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh)


def gen_tiny(out: str) -> None:
    """Small FFNN plus input box plus oracle-generated golden ranges."""
    rng = np.random.default_rng(11)
    dims = [2, 4, 3, 2]
    layers = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        act = "identity" if i == len(dims) - 2 else "relu"
        layers.append(Fc(rng.standard_normal((b, a)),
                         0.3 * rng.standard_normal(b), act))
    net = Net(layers, (dims[0],))
    export_model(net, os.path.join(out, "tiny.json"))
    lo = np.array([-1.0, -0.5])
    hi = np.array([0.8, 1.2])
    _write_json(os.path.join(out, "tiny_box.json"),
                {"lo": lo.tolist(), "hi": hi.tolist()})
    ranges = exact_ranges([(l.weights, l.bias, l.activation) for l in layers],
                          lo, hi)
    with open(os.path.join(out, "tiny_ranges_golden.csv"), "w") as fh:
        fh.write("class,lo,hi\n")
        for j, (a, b) in enumerate(ranges):
            fh.write(f"{j},{a:.17g},{b:.17g}\n")


def gen_toy_cnn(out: str) -> None:
    """Trained digit CNN plus a 50-image campaign and a golden attack image."""
    net, acc = train_fixture("mnist_subset", "toy_cnn", seed=0)
    print(f"toy_cnn train accuracy: {acc:.3f}")
    export_model(net, os.path.join(out, "toy_cnn.json"))
    images, labels = dataset("mnist_subset", seed=0)
    sel = slice(300, 350)  # held out from the 300 training images
    _write_json(os.path.join(out, "campaign_images.json"),
                [img.tolist() for img in images[sel]])
    _write_json(os.path.join(out, "campaign_labels.json"),
                [int(v) for v in labels[sel]])
    _write_json(os.path.join(out, "golden_image.json"), images[300].tolist())


def gen_ffnn4(out: str) -> None:
    net, acc = train_fixture("synthetic", "ffnn4", seed=0)
    print(f"ffnn4 train accuracy: {acc:.3f}")
    export_model(net, os.path.join(out, "ffnn4.json"))


def gen_mnist_cnn(out: str) -> None:
    """MNIST-shaped random-weight CNN covering every lowered layer kind."""
    rng = np.random.default_rng(5)
    net = Net([
        ConvLayer(0.3 * rng.standard_normal((2, 1, 5, 5)),
                  0.1 * rng.standard_normal(2), pad=(0, 0), stride=(3, 3)),
        Pool("avgpool", (2, 2), stride=(2, 2)),
        Pool("maxpool", (2, 2), stride=(2, 2)),
        Fc(rng.standard_normal((10, 8)), 0.1 * rng.standard_normal(10),
           "identity"),
    ], (1, 28, 28))
    export_model(net, os.path.join(out, "mnist_cnn.json"))


def gen_plot_golden(out: str) -> None:
    """Deterministic ranges CSV / verdict JSON pair and its rendered SVG."""
    with open(os.path.join(out, "tiny_ranges_golden.csv")) as fh:
        rows = fh.read().strip().splitlines()[1:]
    with open(os.path.join(out, "ranges_golden.csv"), "w") as fh:
        fh.write("image,class,lo,hi,verdict,label\n")
        for row in rows:
            j, lo, hi = row.split(",")
            fh.write(f"0,{j},{lo},{hi},Robust,0\n")
    _write_json(os.path.join(out, "verdict_golden.json"),
                {"records": [{"image": 0, "label": 0, "verdict": "Robust"}]})
    plot_ranges(os.path.join(out, "ranges_golden.csv"),
                os.path.join(out, "verdict_golden.json"),
                os.path.join(out, "ranges_golden.svg"))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="fixtures")
    args = parser.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    gen_tiny(args.out)
    gen_toy_cnn(args.out)
    gen_ffnn4(args.out)
    gen_mnist_cnn(args.out)
    gen_plot_golden(args.out)
    print(f"fixtures written to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
