"""SER curves from the simulate CSV (needs matplotlib)."""
from __future__ import annotations

import csv
from collections import defaultdict


def read_ser_csv(path) -> dict[str, list[tuple[float, float]]]:
    """detector -> sorted [(snr_db, ser)] pairs."""
    curves = defaultdict(list)
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            curves[row["detector"]].append((float(row["snr_db"]), float(row["ser"])))
    return {k: sorted(v) for k, v in curves.items()}


def plot_ser(curves, ax=None, title=None):
    import matplotlib.pyplot as plt

    if ax is None:
        _, ax = plt.subplots(figsize=(5.5, 4))
    markers = "osd^v<>xp*"
    for k, (name, pts) in enumerate(sorted(curves.items())):
        snr = [p[0] for p in pts]
        # zero SER cannot sit on a log axis
        ser = [p[1] if p[1] > 0 else float("nan") for p in pts]
        ax.semilogy(snr, ser, marker=markers[k % len(markers)], label=name, fillstyle="none")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("symbol error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    return ax
