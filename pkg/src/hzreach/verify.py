"""Brightening-attack robustness verification.

A brightening attack may reset any pixel whose intensity reaches a
threshold ``d`` to an arbitrary value in [0, scale * delta]; all other
pixels stay fixed. An image is certified robust when, over the whole
reachable output set of the perturbed input box, the true class keeps a
strictly maximal score against every other class.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .intervals import Interval
from .lowering import lower_network
from .model import Network, flatten_tensor, infer
from .reach import ReachConfig, reach_ffnn
from .sets import HybridZonotope


@dataclass
class AttackSpec:
    threshold: float          # pixels at or above this value are attackable
    delta: float              # perturbation radius as a fraction of the scale
    scale: float = 255.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not 0 <= self.threshold <= self.scale:
            raise ValueError("threshold must lie within the pixel range")


def brighten(image: np.ndarray, spec: AttackSpec) -> Interval:
    """Perturbed-input box: attacked pixels span [0, scale*delta], others are points."""
    flat = flatten_tensor(image)
    hot = flat >= spec.threshold
    lo = np.where(hot, 0.0, flat)
    hi = np.where(hot, spec.scale * spec.delta, flat)
    return Interval(np.minimum(lo, hi), np.maximum(lo, hi))


@dataclass
class Verdict:
    robust: bool
    label: int
    margins: np.ndarray          # mu_j = max over R of (y_j - y_label); self = -inf
    worst_class: int
    worst_margin: float

    @property
    def verdict(self) -> str:
        return "Robust" if self.robust else "Unknown"


def verify_classification(r: HybridZonotope, label: int,
                          strategy: str = "branch_and_bound") -> Verdict:
    """Certify that class ``label`` is the strict argmax everywhere on ``r``."""
    m = r.dim
    if not 0 <= label < m:
        raise ValueError(f"label {label} out of range for {m} outputs")
    margins = np.full(m, -np.inf)
    for j in range(m):
        if j == label:
            continue
        d = np.zeros(m)
        d[j] = 1.0
        d[label] = -1.0
        margins[j] = r.support(d, strategy)
    worst = int(np.argmax(margins))
    worst_margin = float(margins[worst])
    return Verdict(worst_margin < 0.0, label, margins, worst, worst_margin)


def output_ranges(r: HybridZonotope, strategy: str = "branch_and_bound") -> Interval:
    return r.interval_hull(strategy)


@dataclass
class VerificationReport:
    config: dict
    records: list = field(default_factory=list)

    @property
    def robust_rate(self) -> float:
        done = [r for r in self.records if "error" not in r]
        if not done:
            return 0.0
        return sum(r["verdict"] == "Robust" for r in done) / len(done)

    @property
    def mean_runtime(self) -> float:
        times = [r["runtime"] for r in self.records if "runtime" in r]
        return float(np.mean(times)) if times else 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "records": self.records,
            "aggregate": {
                "images": len(self.records),
                "failures": sum("error" in r for r in self.records),
                "robust_rate": self.robust_rate,
                "mean_runtime": self.mean_runtime,
            },
        }

    def save_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def save_ranges_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("image,class,lo,hi,verdict,label\n")
            for rec in self.records:
                if "ranges_lo" not in rec:
                    continue
                for j, (lo, hi) in enumerate(zip(rec["ranges_lo"], rec["ranges_hi"])):
                    fh.write(f"{rec['image']},{j},{lo:.17g},{hi:.17g},"
                             f"{rec['verdict']},{rec['label']}\n")


def _verify_one(idx: int, ffnn: Network, image: np.ndarray, label: int,
                spec: AttackSpec, cfg: ReachConfig, with_ranges: bool) -> dict:
    t0 = time.perf_counter()
    try:
        box = brighten(image, spec)
        r = reach_ffnn(ffnn, box, cfg).output_set
        verdict = verify_classification(r, label, cfg.strategy)
        rec = {
            "image": idx,
            "label": int(label),
            "predicted": int(np.argmax(infer(ffnn, flatten_tensor(image)))),
            "verdict": verdict.verdict,
            "worst_class": verdict.worst_class,
            "worst_margin": verdict.worst_margin,
            "margins": [None if not np.isfinite(v) else float(v)
                        for v in verdict.margins],
        }
        if with_ranges:
            hull = output_ranges(r, cfg.strategy)
            rec["ranges_lo"] = hull.lo.tolist()
            rec["ranges_hi"] = hull.hi.tolist()
    except Exception as exc:  # campaign keeps going past individual failures
        rec = {"image": idx, "label": int(label), "error": str(exc)}
    rec["runtime"] = time.perf_counter() - t0
    return rec


def run_campaign(net: Network, images, labels, spec: AttackSpec,
                 cfg: ReachConfig | None = None, workers: int = 1,
                 with_ranges: bool = True) -> VerificationReport:
    """Verify a batch of images; records are sorted by image index."""
    cfg = cfg or ReachConfig()
    ffnn, _ = lower_network(net)
    config = {
        "threshold": spec.threshold, "delta": spec.delta, "scale": spec.scale,
        "rho": cfg.rho if np.isscalar(cfg.rho) else list(np.asarray(cfg.rho, dtype=float)),
        "gamma": cfg.gamma, "bound_method": cfg.bound_method,
        "strategy": cfg.strategy, "workers": workers,
    }
    jobs = [(i, ffnn, np.asarray(img, dtype=float), int(lab), spec, cfg, with_ranges)
            for i, (img, lab) in enumerate(zip(images, labels))]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda args: _verify_one(*args), jobs))
    else:
        records = [_verify_one(*args) for args in jobs]
    records.sort(key=lambda r: r["image"])
    return VerificationReport(config, records)
