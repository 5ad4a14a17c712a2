"""Log-log figure from a sweep's series.csv.

    python demos/plot_rates.py out/series.csv rates.png
"""

from __future__ import annotations

import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def load(path):
    series = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            series[row["metric"]].append((int(row["n"]), float(row["mean"]), float(row["stderr"])))
    return series


def main(src, dst):
    fig, ax = plt.subplots(figsize=(5, 4))
    for metric, pts in sorted(load(src).items()):
        n, mean, se = (np.array(v) for v in zip(*pts))
        ax.errorbar(n, mean, yerr=2 * se, marker="o", capsize=2, label=metric)
        if len(n) >= 2:
            slope = np.polyfit(np.log(n), np.log(mean), 1)[0]
            ax.plot(n, mean[0] * (n / n[0]) ** slope, ls=":", color="gray")
            ax.annotate(f"{slope:.2f}", (n[-1], mean[-1]), textcoords="offset points", xytext=(4, 0))
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("mean sup-norm error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(dst, dpi=120)


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
