"""Command-line interface.

Subcommands: ``lower``, ``reach``, ``verify``, ``reduce``. Exit codes:
1 usage error, 2 model load/shape failure, 3 empty or infeasible set,
4 optimization budget exceeded. All randomness is controlled by ``--seed``
and every artifact embeds the effective configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .intervals import Interval
from .lowering import lower_network, save_provenance
from .model import ModelError, Network, flatten_tensor, infer, load_model, save_model
from .optim import BudgetExceededError
from .reach import ReachConfig, reach_ffnn
from .reduction import reduce_network
from .sets import EmptySetError
from .verify import AttackSpec, brighten, run_campaign

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_EMPTY = 3
EXIT_BUDGET = 4

log = logging.getLogger("hzreach")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _load_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def _parse_rho(text: str):
    parts = [float(v) for v in text.split(",")]
    return parts[0] if len(parts) == 1 else parts


def _make_config(args) -> ReachConfig:
    bounds = {"ibp": "ibp", "crown": "crown", "exact": "exact_hull",
              "exact_hull": "exact_hull"}[args.bounds]
    return ReachConfig(rho=_parse_rho(args.rho), gamma=args.gamma,
                       bound_method=bounds)


def _config_echo(args, cfg: ReachConfig | None = None) -> dict:
    echo = {"command": args.command, "seed": args.seed}
    for key in ("model", "out", "input_box", "image", "images", "label_file",
                "d", "delta", "workers"):
        if hasattr(args, key):
            echo[key] = getattr(args, key)
    if cfg is not None:
        echo.update({"rho": cfg.rho, "gamma": cfg.gamma,
                     "bounds": cfg.bound_method})
    return echo


def _load_net(path: str) -> Network:
    try:
        return load_model(path)
    except (OSError, ModelError, json.JSONDecodeError, KeyError) as exc:
        sys.stderr.write(f"error: cannot load model {path!r}: {exc}\n")
        raise SystemExit(EXIT_MODEL)


def _input_box(args, net: Network) -> Interval:
    if getattr(args, "input_box", None):
        data = _load_json(args.input_box)
        box = Interval(np.asarray(data["lo"], dtype=float),
                       np.asarray(data["hi"], dtype=float))
    else:
        image = np.asarray(_load_json(args.image), dtype=float)
        box = brighten(image, AttackSpec(args.d, args.delta))
    if box.dim != net.input_dim:
        sys.stderr.write(f"error: input box has {box.dim} coordinates, "
                         f"model expects {net.input_dim}\n")
        raise SystemExit(EXIT_MODEL)
    return box


def cmd_lower(args) -> int:
    net = _load_net(args.model)
    lowered, provenance = lower_network(net)
    if not provenance["lowered"]:
        print("model is already fully-connected; copied unchanged")
    save_model(lowered, args.out)
    save_provenance(provenance, args.out + ".provenance.json")
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(16):
        x = rng.uniform(-1.0, 1.0, size=net.input_dim)
        err = float(np.max(np.abs(infer(net, x) - infer(lowered, x))))
        worst = max(worst, err)
    print(f"lowered {len(net.layers)} layers -> {len(lowered.layers)} "
          f"fully-connected layers; max probe error {worst:.3e} over 16 probes")
    return EXIT_OK


def cmd_reach(args) -> int:
    try:
        cfg = _make_config(args)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    net = _load_net(args.model)
    lowered, _ = lower_network(net)
    box = _input_box(args, net)
    result = reach_ffnn(lowered, box, cfg)
    r = result.output_set
    if r.is_empty():
        sys.stderr.write("error: reachable set is empty\n")
        return EXIT_EMPTY
    hull = r.interval_hull(cfg.strategy)
    r.save_json(args.out + ".hz.json")
    with open(args.out + ".complexity.csv", "w") as fh:
        fh.write("layer,activation,removed,ng,nb,nc\n")
        for s in result.stats:
            fh.write(f"{s['layer']},{s['activation']},{s['removed']},"
                     f"{s['ng']},{s['nb']},{s['nc']}\n")
    with open(args.out + ".ranges.csv", "w") as fh:
        fh.write("class,lo,hi\n")
        for j, (lo, hi) in enumerate(zip(hull.lo, hull.hi)):
            fh.write(f"{j},{lo:.17g},{hi:.17g}\n")
    with open(args.out + ".config.json", "w") as fh:
        json.dump(_config_echo(args, cfg), fh, indent=1)
    print(f"reachable set: {r.ng} continuous / {r.nb} binary factors, "
          f"{r.nc} constraints; runtime {result.runtime:.3f}s")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        cfg = _make_config(args)
        spec = AttackSpec(args.d, args.delta)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    net = _load_net(args.model)
    images = [np.asarray(img, dtype=float) for img in _load_json(args.images)]
    labels = [int(v) for v in _load_json(args.label_file)]
    if len(images) != len(labels):
        sys.stderr.write("error: image and label counts differ\n")
        return EXIT_USAGE
    report = run_campaign(net, images, labels, spec, cfg, workers=args.workers)
    report.config.update(_config_echo(args, cfg))
    report.save_json(args.out + ".report.json")
    report.save_ranges_csv(args.out + ".ranges.csv")
    failures = sum("error" in r for r in report.records)
    print(f"verified {len(report.records)} images: robust rate "
          f"{report.robust_rate:.3f}, {failures} failures, "
          f"mean runtime {report.mean_runtime:.3f}s")
    if report.records and failures == len(report.records):
        return EXIT_EMPTY
    return EXIT_OK


def cmd_reduce(args) -> int:
    net = _load_net(args.model)
    if not net.is_ffnn():
        net, _ = lower_network(net)
    data = _load_json(args.input_box)
    box = Interval(np.asarray(data["lo"], dtype=float),
                   np.asarray(data["hi"], dtype=float))
    bounds = "crown" if args.bounds == "crown" else "ibp"
    try:
        reduced, report = reduce_network(net, box, _parse_rho(args.rho), bounds)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    save_model(reduced, args.out)
    payload = report.to_dict()
    payload["config"] = _config_echo(args)
    payload["config"].update({"rho": _parse_rho(args.rho), "bounds": bounds})
    with open(args.out + ".reduction.json", "w") as fh:
        json.dump(payload, fh, indent=1)
    print(f"removed {report.total_removed} of {report.total_before} "
          f"hidden neurons")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="hzreach", description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lower", help="rewrite a CNN as an equivalent FFNN")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lower)

    p = sub.add_parser("reach", help="compute a reachable output set")
    p.add_argument("--model", required=True)
    p.add_argument("--input-box")
    p.add_argument("--image")
    p.add_argument("--d", type=float, default=245.0)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--rho", default="0")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--bounds", default="ibp",
                   choices=["ibp", "crown", "exact", "exact_hull"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("verify", help="run a brightening-attack campaign")
    p.add_argument("--model", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--label-file", required=True)
    p.add_argument("--rho", default="0")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--bounds", default="ibp",
                   choices=["ibp", "crown", "exact", "exact_hull"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reduce", help="remove low-impact neurons")
    p.add_argument("--model", required=True)
    p.add_argument("--input-box", required=True)
    p.add_argument("--rho", default="0")
    p.add_argument("--bounds", default="ibp", choices=["ibp", "crown"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("HZREACH_LOG", "WARNING"))
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "reach" and not (args.input_box or args.image):
        parser.error("reach requires --input-box or --image")
    try:
        return args.func(args)
    except SystemExit:
        raise
    except BudgetExceededError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_BUDGET
    except EmptySetError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_EMPTY
    except ModelError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
