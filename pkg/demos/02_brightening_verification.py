"""Certifying a CNN classifier against brightening attacks.

A brightening attack may reset any pixel at or above a threshold d to an
arbitrary value in [0, 255 * delta]. This demo loads the committed toy CNN
(8x8 grayscale, 10 classes), lowers it to an equivalent fully-connected
network, builds the perturbed-input box for a handful of committed campaign
images, and checks whether the true class keeps a strictly maximal score
over the entire reachable output set.

Run from the repository root:  python3 demos/02_brightening_verification.py
"""

import json
from pathlib import Path

import numpy as np

from hzreach import (AttackSpec, ReachConfig, brighten, load_model,
                     run_campaign)

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def main():
    net = load_model(str(FIXTURES / "toy_cnn.json"))
    images = [np.asarray(v) for v in
              json.loads((FIXTURES / "campaign_images.json").read_text())]
    labels = json.loads((FIXTURES / "campaign_labels.json").read_text())
    spec = AttackSpec(threshold=245.0, delta=0.01)

    box = brighten(images[0], spec)
    hot = int((box.hi - box.lo > 0).sum())
    print(f"image 0: {hot} of {box.lo.size} pixels are attackable; each "
          f"spans [0, {spec.scale * spec.delta:.2f}]\n")

    n = 10
    report = run_campaign(net, images[:n], labels[:n], spec,
                          ReachConfig(gamma=0.0))
    print(f"{'image':>5} {'label':>5} {'verdict':>8} {'worst margin':>13} "
          f"{'vs class':>8}")
    for rec in report.records:
        print(f"{rec['image']:>5} {rec['label']:>5} {rec['verdict']:>8} "
              f"{rec['worst_margin']:>13.4f} {rec['worst_class']:>8}")
    robust = sum(r.get("verdict") == "Robust" for r in report.records)
    print(f"\n{robust} / {len(report.records)} certified Robust "
          f"(a negative worst margin certifies; 'Unknown' only means the "
          f"over-approximation could not rule the attack out)")

    out = Path(__file__).resolve().parent / "campaign_report.json"
    report.save_json(str(out))
    print(f"full report written to {out}")


if __name__ == "__main__":
    main()
