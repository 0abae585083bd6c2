"""Error-bounded neuron removal on a desk-scale network.

Scores every hidden neuron by its worst-case influence on the next layer
(column weight mass times post-activation width), removes all neurons whose
score falls at or below a threshold rho, and absorbs the incurred error
into an interval bias of the following layer. The absorbed error is
guaranteed to be at most rho times the number of removed neurons.

Run from the repository root:  python3 demos/03_neuron_reduction.py
"""

from pathlib import Path

import numpy as np

from hzreach import (Interval, ReachConfig, ibp_bounds, infer, load_model,
                     neuron_scores, reach_ffnn, reduce_network)

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def main():
    net = load_model(str(FIXTURES / "ffnn4.json"))
    box = Interval(np.zeros(net.input_dim), np.full(net.input_dim, 255.0))
    widths = [l.out_dim for l in net.layers]
    print(f"original network: {net.input_dim} inputs -> {widths}\n")

    # per-layer rho at the 90th percentile of the neuron scores
    bounds = ibp_bounds(net, box)
    rho = []
    for k in range(len(net.layers) - 1):
        h = neuron_scores(net.layers[k + 1].weights_dense(), bounds[k].post)
        rho.append(float(np.percentile(h, 90)))
    print("per-layer removal thresholds (90th percentile of scores):",
          [f"{r:.3g}" for r in rho])

    reduced, report = reduce_network(net, box, rho)
    kept = [l.out_dim for l in reduced.layers]
    removed = sum(len(r["removed"]) for r in report.layers)
    total = sum(widths[:-1])
    print(f"reduced network:  {net.input_dim} inputs -> {kept} "
          f"({removed}/{total} hidden neurons removed, "
          f"{100 * removed / total:.0f}%)")
    for r in report.layers:
        n = len(r["removed"])
        print(f"  layer {r['layer']}: removed {n}, "
              f"absorbed error size {r['error_size']:.4g} "
              f"(bound {r['rho']:.4g} x {n} = {r['rho'] * n:.4g})")

    # the reduced network's interval output still encloses the original
    rng = np.random.default_rng(0)
    out_hull = reach_ffnn(reduced, box, ReachConfig(gamma=1.0)
                          ).output_set.interval_hull()
    worst = 0.0
    for x in box.sample(2000, rng):
        y = infer(net, x)
        worst = max(worst, float(np.max(np.maximum(out_hull.lo - y,
                                                   y - out_hull.hi))))
    print(f"\n2000 sampled original outputs vs reduced-network hull: "
          f"max overshoot {worst:.3e} (<= 0 means fully enclosed)")


if __name__ == "__main__":
    main()
