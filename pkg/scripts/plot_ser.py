#!/usr/bin/env python3
"""Render SER curves from one or more `qamsdr simulate` CSV files.

usage: plot_ser.py results.csv [more.csv ...] -o ser.png [--title TEXT]
"""
import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from qamsdr.plotting import plot_ser, read_ser_csv  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv", nargs="+")
    ap.add_argument("-o", "--output", default="ser.png")
    ap.add_argument("--title")
    args = ap.parse_args()
    fig, axes = plt.subplots(1, len(args.csv), figsize=(5.5 * len(args.csv), 4), squeeze=False)
    for ax, path in zip(axes[0], args.csv):
        plot_ser(read_ser_csv(path), ax=ax, title=args.title or path)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(args.output)


if __name__ == "__main__":
    main()
