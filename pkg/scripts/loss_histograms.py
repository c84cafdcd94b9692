"""Overlayed histograms of per-impression loss samples.

Usage:
    python3 scripts/loss_histograms.py losses_a.txt losses_b.txt ... -o hist.png
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from newsrec.dominance import read_losses


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("files", nargs="+", help="loss files (one value per line)")
    parser.add_argument("-o", "--out", default="loss_hist.png")
    parser.add_argument("--bins", type=int, default=40)
    args = parser.parse_args(argv)

    fig, ax = plt.subplots(figsize=(7, 4))
    for path in args.files:
        losses = read_losses(path)
        ax.hist(losses, bins=args.bins, histtype="step", density=True, label=path)
    ax.set_xlabel("per-impression mean BCE loss")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
