"""Acceptance suite.

Each test exercises one release gate end to end at its pinned tolerance and
prints a single machine-greppable PASS/FAIL line. The heavy randomized
sweeps live here rather than in the per-module unit tests.
"""

import itertools
import json
import time

import numpy as np
import pytest

from hzreach import (AttackSpec, AvgPool, Conv, HybridZonotope, Interval,
                     MaxPool, Network, ReachConfig, brighten, crown_bounds,
                     error_size, exact_hull_bounds, ibp_bounds, infer,
                     load_model, lower_network, neuron_scores, reach_ffnn,
                     removal_error, run_campaign, select_neurons,
                     witness_residuals)
from hzreach.model import flatten_tensor

from oracles import net_point_layers, random_ffnn, relu_net_vertex_outputs


def _report(name, ok, detail):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


# --------------------------------------------------------------------------
# Lowering exactness: 200 randomized conv / avg-pool / max-pool layers,
# lowered-vs-direct forward agreement within 1e-9 on 100 inputs each.
# --------------------------------------------------------------------------

def _random_layer_config(rng):
    c = int(rng.integers(1, 4))
    h = int(rng.integers(3, 9))
    w = int(rng.integers(3, 9))
    sh, sw = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    ph, pw = int(rng.integers(0, 3)), int(rng.integers(0, 3))
    kind = rng.choice(["conv", "avgpool", "maxpool"])
    if kind == "conv":
        f = int(rng.integers(1, 4))
        fh = int(rng.integers(1, min(h + ph, 4)))
        fw = int(rng.integers(1, min(w + pw, 4)))
        layer = Conv(rng.standard_normal((f, c, fh, fw)),
                     Interval.point(rng.standard_normal(f)), ph, pw, sh, sw,
                     activation=str(rng.choice(["relu", "identity"])))
    else:
        fh = int(rng.integers(1, min(h + ph, 4)))
        fw = int(rng.integers(1, min(w + pw, 4)))
        cls = AvgPool if kind == "avgpool" else MaxPool
        layer = cls(fh, fw, ph, pw, sh, sw)
    return Network([layer], (c, h, w))


def test_lowering_exactness():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    built = 0
    while built < 200:
        try:
            net = _random_layer_config(rng)
        except Exception:
            continue  # sampled extents with no valid output cell
        built += 1
        lowered, _ = lower_network(net)
        assert lowered.is_ffnn()
        for _ in range(100):
            x = rng.uniform(-3.0, 3.0, size=net.input_dim)
            err = float(np.max(np.abs(infer(lowered, x) - infer(net, x))))
            worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    _report("lowering-exactness",
            worst <= 1e-9 and elapsed < 120.0,
            f"200 configs x 100 inputs, max err {worst:.3e}, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# Exact reachability: 50 random FFNNs (<= 16 hidden neurons), supports in 50
# directions match an independent activation-pattern vertex oracle to 1e-6.
# --------------------------------------------------------------------------

def test_exact_reachability_matches_oracle():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        depth = int(rng.integers(1, 3))
        hidden = [int(rng.integers(3, 9)) for _ in range(depth)]
        while sum(hidden) > 16:
            hidden[np.argmax(hidden)] -= 1
        dims = [2] + hidden + [2]
        net = random_ffnn(rng, dims)
        box = Interval(-rng.uniform(0.3, 1.2, 2), rng.uniform(0.3, 1.2, 2))
        res = reach_ffnn(net, box, ReachConfig(rho=0.0, gamma=0.0))
        verts = relu_net_vertex_outputs(net_point_layers(net), box.lo, box.hi)
        for _ in range(50):
            d = rng.standard_normal(2)
            got = res.output_set.support(d)
            ref = float((verts @ d).max())
            worst = max(worst, abs(got - ref))
    elapsed = time.perf_counter() - t0
    _report("exact-reachability",
            worst <= 1e-6 and elapsed < 600.0,
            f"50 nets x 50 directions, max support err {worst:.3e}, "
            f"{elapsed:.1f}s")


# --------------------------------------------------------------------------
# Soundness sweep: every (rho, gamma, bound method) combination maps 10k
# sampled inputs per net into the computed set (membership tolerance 1e-7).
# --------------------------------------------------------------------------

def _membership_violations(net, res, xs, tol=1e-7):
    resid = witness_residuals(net, res.witness, res.output_set, xs)
    bad = np.flatnonzero(resid > tol)
    violations = 0
    for i in bad[:20]:  # residual overflow alone is not yet a violation
        y = infer(net, xs[i])
        if not res.output_set.contains_point(y, tol=tol):
            violations += 1
    if bad.size > 20:
        violations += bad.size - 20
    return violations, float(resid.max())


def test_soundness_sweep():
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    nets = []
    for _ in range(20):
        net = random_ffnn(rng, [3, 7, 5, 2])
        box = Interval(-rng.uniform(0.3, 1.0, 3), rng.uniform(0.3, 1.0, 3))
        nets.append((net, box))
    total_violations = 0
    worst = 0.0
    combos = list(itertools.product([0.0, 0.1, 1.0], [0.0, 0.5, 1.0],
                                    ["ibp", "crown", "exact_hull"]))
    for rho, gamma, bm in combos:
        cfg = ReachConfig(rho=rho, gamma=gamma, bound_method=bm)
        for j, (net, box) in enumerate(nets):
            res = reach_ffnn(net, box, cfg)
            xs = box.sample(10_000, np.random.default_rng(j))
            v, r = _membership_violations(net, res, xs)
            total_violations += v
            worst = max(worst, r)
    elapsed = time.perf_counter() - t0
    _report("soundness-sweep",
            total_violations == 0,
            f"27 configs x 20 nets x 10k samples, {total_violations} "
            f"violations, max residual {worst:.3e}, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# Removal error bound: size(eps) <= rho * |N| on 1000 random triples, and N
# minimizes the absorbed error among equal-cardinality subsets (nk <= 12).
# --------------------------------------------------------------------------

def test_removal_error_bound_and_minimality():
    rng = np.random.default_rng(13)
    t0 = time.perf_counter()
    bound_ok = True
    minimal_ok = True
    worst_slack = np.inf
    for _ in range(1000):
        nk = int(rng.integers(2, 13))
        m = int(rng.integers(1, 6))
        w = rng.standard_normal((m, nk))
        post = Interval(np.zeros(nk), rng.uniform(0.0, 2.0, nk))
        rho = float(rng.uniform(0.0, 3.0))
        removed = select_neurons(w, post, rho)
        eps = removal_error(w, post, removed)
        size = error_size(eps)
        slack = rho * removed.size - size
        worst_slack = min(worst_slack, slack)
        if size > rho * removed.size + 1e-12:
            bound_ok = False
        if nk <= 12 and removed.size:
            h = neuron_scores(w, post)
            best = float(h[removed].sum())
            for subset in itertools.combinations(range(nk), removed.size):
                alt = float(
                    error_size(removal_error(w, post, np.array(subset))))
                if alt < best - 1e-12:
                    minimal_ok = False
                    break
    elapsed = time.perf_counter() - t0
    _report("removal-error-bound",
            bound_ok and minimal_ok,
            f"1000 triples, bound {'holds' if bound_ok else 'VIOLATED'}, "
            f"min slack {worst_slack:.3e}, minimality "
            f"{'confirmed' if minimal_ok else 'VIOLATED'}, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# Gamma nesting: relaxing more neurons can only grow the support.
# --------------------------------------------------------------------------

def test_gamma_nesting():
    rng = np.random.default_rng(17)
    t0 = time.perf_counter()
    worst = -np.inf
    ok = True
    for _ in range(20):
        net = random_ffnn(rng, [2, 5, 4, 2])
        box = Interval(-rng.uniform(0.3, 1.0, 2), rng.uniform(0.3, 1.0, 2))
        dirs = rng.standard_normal((50, 2))
        sups = {}
        for gamma in (0.0, 0.5, 1.0):
            res = reach_ffnn(net, box, ReachConfig(gamma=gamma))
            sups[gamma] = np.array([res.output_set.support(d) for d in dirs])
        for lo_g, hi_g in ((0.0, 0.5), (0.5, 1.0), (0.0, 1.0)):
            gap = float((sups[lo_g] - sups[hi_g]).max())
            worst = max(worst, gap)
            if gap > 1e-7:
                ok = False
    elapsed = time.perf_counter() - t0
    _report("gamma-nesting", ok,
            f"20 nets x 50 directions, max nesting violation {worst:.3e}, "
            f"{elapsed:.1f}s")


# --------------------------------------------------------------------------
# Bound dominance: width(exact_hull) <= width(crown) <= width(ibp).
# --------------------------------------------------------------------------

def test_bound_dominance():
    rng = np.random.default_rng(19)
    t0 = time.perf_counter()
    ok = True
    worst = -np.inf
    for _ in range(100):
        dims = [2, int(rng.integers(3, 6)), int(rng.integers(2, 5)), 2]
        net = random_ffnn(rng, dims)
        box = Interval(-rng.uniform(0.3, 1.0, 2), rng.uniform(0.3, 1.0, 2))
        ibp = ibp_bounds(net, box)
        crown = crown_bounds(net, box)
        z0 = HybridZonotope.from_interval(box)
        for k in range(len(net.layers)):
            prefix = Network(net.layers[:k + 1], (2,))
            exact = exact_hull_bounds(prefix, z0)
            gaps = [float((crown[k].pre.width - ibp[k].pre.width).max()),
                    float((exact.width - crown[k].pre.width).max())]
            worst = max(worst, *gaps)
            if max(gaps) > 1e-9:
                ok = False
    elapsed = time.perf_counter() - t0
    _report("bound-dominance", ok,
            f"100 nets, all layers, max dominance violation {worst:.3e}, "
            f"{elapsed:.1f}s")


# --------------------------------------------------------------------------
# Brightening-attack construction is bit-exact on the golden image for both
# published parameter pairs.
# --------------------------------------------------------------------------

@pytest.mark.parametrize("d,delta", [(245.0, 0.01), (200.0, 0.05)])
def test_brightening_bit_exact(fixtures, d, delta):
    image = np.asarray(json.loads((fixtures / "golden_image.json").read_text()))
    box = brighten(image, AttackSpec(d, delta))
    flat = flatten_tensor(image)
    hot = flat >= d
    exp_lo = np.where(hot, 0.0, flat)
    exp_hi = np.where(hot, 255.0 * delta, flat)
    ok = (np.array_equal(box.lo, np.minimum(exp_lo, exp_hi))
          and np.array_equal(box.hi, np.maximum(exp_lo, exp_hi))
          and int(hot.sum()) > 0)
    _report(f"brightening-bit-exact-d{int(d)}", ok,
            f"{int(hot.sum())} attacked pixels, lo/hi bit-identical")


# --------------------------------------------------------------------------
# No false Robust: every Robust verdict on the committed 50-image campaign
# survives 1000 random perturbation samples.
# --------------------------------------------------------------------------

def test_no_false_robust(fixtures):
    t0 = time.perf_counter()
    net = load_model(str(fixtures / "toy_cnn.json"))
    images = [np.asarray(v) for v in
              json.loads((fixtures / "campaign_images.json").read_text())]
    labels = json.loads((fixtures / "campaign_labels.json").read_text())
    assert len(images) == 50
    spec = AttackSpec(245.0, 0.01)
    report = run_campaign(net, images, labels, spec, ReachConfig(),
                          with_ranges=False)
    ffnn, _ = lower_network(net)
    false_robust = 0
    robust = 0
    rng = np.random.default_rng(23)
    for rec, image, label in zip(report.records, images, labels):
        if rec.get("verdict") != "Robust":
            continue
        robust += 1
        box = brighten(image, spec)
        for x in box.sample(1000, rng):
            y = infer(ffnn, x)
            if int(np.argmax(y)) != label:
                false_robust += 1
                break
    elapsed = time.perf_counter() - t0
    failures = sum("error" in r for r in report.records)
    _report("no-false-robust",
            false_robust == 0 and failures == 0 and elapsed < 900.0,
            f"50 images, {robust} Robust x 1000 samples, "
            f"{false_robust} contradicted, {failures} errors, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# Desk-scale reduction: per-layer rho at the 90th percentile of the scores
# removes at least half the hidden neurons and stays sound under the sweep.
# --------------------------------------------------------------------------

def test_desk_scale_reduction(fixtures):
    t0 = time.perf_counter()
    net = load_model(str(fixtures / "ffnn4.json"))
    assert len(net.layers) == 4
    box = Interval(np.zeros(net.input_dim), np.full(net.input_dim, 255.0))
    bounds = ibp_bounds(net, box)
    rho = []
    for k in range(len(net.layers) - 1):
        h = neuron_scores(net.layers[k + 1].weights_dense(), bounds[k].post)
        rho.append(float(np.percentile(h, 90)))
    hidden_total = sum(l.out_dim for l in net.layers[:-1])

    removed_baseline = None
    violations = 0
    worst = 0.0
    rng = np.random.default_rng(29)
    xs = box.sample(10_000, rng)
    for gamma in (0.0, 0.5, 1.0):
        for bm in ("ibp", "crown", "exact_hull"):
            cfg = ReachConfig(rho=rho, gamma=gamma, bound_method=bm)
            res = reach_ffnn(net, box, cfg)
            removed = sum(s["removed"] for s in res.stats)
            if gamma == 0.0 and bm == "ibp":
                removed_baseline = removed
            v, r = _membership_violations(net, res, xs)
            violations += v
            worst = max(worst, r)
    elapsed = time.perf_counter() - t0
    frac = removed_baseline / hidden_total
    _report("desk-scale-reduction",
            frac >= 0.5 and violations == 0,
            f"removed {removed_baseline}/{hidden_total} hidden neurons "
            f"({100 * frac:.0f}%), sweep violations {violations}, "
            f"max residual {worst:.3e}, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# Fixture pipeline: train -> export -> primary load + probe agreement, and
# the plotting tool reproduces the committed golden SVG.
# --------------------------------------------------------------------------

def test_fixture_pipeline(fixtures, tmp_path):
    pytest.importorskip("hztools")
    from hztools.format import export_model
    from hztools.plot import plot_ranges
    from hztools.train import train_fixture

    t0 = time.perf_counter()
    trained, acc = train_fixture("synthetic", "ffnn4", seed=0)
    path = tmp_path / "ffnn4.json"
    export_model(trained, str(path))
    net = load_model(str(path))
    probes = json.loads((tmp_path / "ffnn4.json.probes.json").read_text())
    worst = 0.0
    for pair in probes["probes"]:
        got = infer(net, np.asarray(pair["input"]))
        worst = max(worst, float(np.max(np.abs(got - pair["output"]))))
    assert len(probes["probes"]) == 16

    svg = tmp_path / "golden.svg"
    plot_ranges(str(fixtures / "ranges_golden.csv"),
                str(fixtures / "verdict_golden.json"), str(svg))
    svg_ok = svg.read_bytes() == (fixtures / "ranges_golden.svg").read_bytes()
    elapsed = time.perf_counter() - t0
    _report("fixture-pipeline",
            worst <= 1e-6 and acc >= 0.99 and svg_ok,
            f"train acc {acc:.3f}, 16-probe max err {worst:.3e}, "
            f"golden SVG {'matches' if svg_ok else 'DIFFERS'}, {elapsed:.1f}s")
