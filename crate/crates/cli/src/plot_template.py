#!/usr/bin/env python3
"""Plot measured competitive ratios against the WarmUp lower bounds.

Usage: python3 plot_ratios.py [plot_data.tsv] [output.png]
"""
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def num(text):
    return float("nan") if text == "NA" else float(text)


def main():
    src = sys.argv[1] if len(sys.argv) > 1 else "plot_data.tsv"
    dst = sys.argv[2] if len(sys.argv) > 2 else "ratios.png"
    with open(src, newline="") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))

    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, key, bound in [
        (axes[0], "profit_ratio", "profit_bound"),
        (axes[1], "fairness_ratio", "fairness_bound"),
    ]:
        for policy in sorted({r["policy"] for r in rows}):
            sel = sorted((r for r in rows if r["policy"] == policy), key=lambda r: num(r["alpha"]))
            xs = [num(r["alpha"]) for r in sel]
            ys = [num(r[key]) for r in sel]
            es = [num(r[key + "_stderr"]) for r in sel]
            if len(sel) == 1:
                ax.axhline(ys[0], linestyle=":", label=policy)
            else:
                ax.errorbar(xs, ys, yerr=es, marker="o", label=policy)
                ax.plot(xs, [num(r[bound]) for r in sel], "k--", linewidth=0.8)
        ax.set_xlabel("alpha (beta = 1 - alpha)")
        ax.set_title(key.replace("_", " "))
        ax.legend()
    fig.tight_layout()
    fig.savefig(dst, dpi=150)


if __name__ == "__main__":
    main()
