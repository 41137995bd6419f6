"""Replot a sweep CSV: quality against sampling rate, one line per method and block width.

Usage: python scripts/plot_sweep.py sweep.csv --metric ssim --out sweep.png
Needs the ``plot`` extra (matplotlib).
"""

from __future__ import annotations

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load_series(path: Path, metric: str) -> dict[tuple[str, int], list[tuple[float, float]]]:
    series: dict[tuple[str, int], list[tuple[float, float]]] = defaultdict(list)
    with path.open(encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            b = 1 if row["method"] in ("single", "whole_frame") else int(row["b"])
            point = (float(row["rate"]), float(row[metric]))
            if point not in series[(row["method"], b)]:
                series[(row["method"], b)].append(point)
    return {key: sorted(points) for key, points in series.items()}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv", type=Path)
    parser.add_argument("--metric", choices=["ssim", "psnr"], default="ssim")
    parser.add_argument("--out", type=Path, help="Image path; defaults next to the CSV")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    for (method, b), points in sorted(load_series(args.csv, args.metric).items()):
        rates, values = zip(*points)
        label = method if method in ("single", "whole_frame") else f"{method} b={b}"
        ax.plot([100 * r for r in rates], values, marker="o", label=label)
    ax.set_xlabel("Sampling rate (%)")
    ax.set_ylabel("SSIM" if args.metric == "ssim" else "PSNR (dB)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()

    out = args.out or args.csv.with_suffix(".png")
    fig.savefig(out, dpi=150)
    print(f"Wrote {out}")


if __name__ == "__main__":
    main()
