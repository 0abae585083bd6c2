"""Render per-class output-range bars from a ranges CSV and verdict JSON."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "hztools"
matplotlib.rcParams["svg.fonttype"] = "none"

import matplotlib.pyplot as plt  # noqa: E402


def read_ranges(path: str, image: int | None = None):
    """Rows of (image, class, lo, hi, verdict, label) for one image."""
    with open(path) as fh:
        reader = csv.DictReader(fh)
        required = {"image", "class", "lo", "hi"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            missing = sorted(required - set(reader.fieldnames or []))
            raise ValueError(f"ranges CSV missing columns: {', '.join(missing)}")
        rows = [r for r in reader]
    if not rows:
        raise ValueError("ranges CSV has no data rows")
    if image is None:
        image = int(rows[0]["image"])
    rows = [r for r in rows if int(r["image"]) == image]
    rows.sort(key=lambda r: int(r["class"]))
    return image, rows


def plot_ranges(ranges_csv: str, verdict_json: str | None, out_svg: str,
                image: int | None = None) -> None:
    image, rows = read_ranges(ranges_csv, image)
    lo = [float(r["lo"]) for r in rows]
    hi = [float(r["hi"]) for r in rows]
    classes = [int(r["class"]) for r in rows]
    label = int(rows[0]["label"]) if "label" in rows[0] and rows[0]["label"] != "" else None
    verdict = rows[0].get("verdict")
    if verdict_json:
        with open(verdict_json) as fh:
            report = json.load(fh)
        for rec in report.get("records", []):
            if rec.get("image") == image:
                label = rec.get("label", label)
                verdict = rec.get("verdict", verdict)
                break

    fig, ax = plt.subplots(figsize=(6, 3.2))
    colors = ["#2b6cb0" if label is not None and c == label else "#a0aec0"
              for c in classes]
    heights = [h - l for l, h in zip(lo, hi)]
    ax.bar(classes, heights, bottom=lo, color=colors, width=0.7)
    for c, l, h in zip(classes, lo, hi):
        ax.plot([c - 0.35, c + 0.35], [l, l], color="#1a202c", lw=0.8)
        ax.plot([c - 0.35, c + 0.35], [h, h], color="#1a202c", lw=0.8)
    ax.set_xlabel("class")
    ax.set_ylabel("output range")
    title = f"image {image}"
    if label is not None:
        title += f", label {label}"
    if verdict:
        title += f" ({verdict})"
    ax.set_title(title)
    ax.set_xticks(classes)
    fig.tight_layout()
    fig.savefig(out_svg, format="svg", metadata={"Date": None})
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ranges", required=True)
    parser.add_argument("--report")
    parser.add_argument("--image", type=int)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        plot_ranges(args.ranges, args.report, args.out, args.image)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
