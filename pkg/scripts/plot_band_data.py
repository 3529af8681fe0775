#!/usr/bin/env python3
"""Plot the CSV artifacts emitted by `blochband sweep`.

Produces three figures from an output directory: the min |Im lambda| curve
over frequency (gap margins), the band-gap tube over (omega, theta), and the
real spectral surfaces over (theta, lambda).
"""

import argparse
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("results", help="directory containing tube.csv etc.")
    ap.add_argument("--out", default=None,
                    help="directory for PNGs (default: the results dir)")
    args = ap.parse_args()
    out = args.out or args.results

    tube = np.genfromtxt(os.path.join(args.results, "tube.csv"),
                         delimiter=",", names=True)
    margin = np.where(tube["gap_margin"] < 0, np.nan, tube["gap_margin"])

    fig, ax = plt.subplots(figsize=(7, 4))
    omegas = np.unique(tube["omega"])
    curve = [np.nanmin(margin[tube["omega"] == w]) for w in omegas]
    ax.plot(omegas, curve, lw=1)
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel(r"$\min_\theta \min |\mathrm{Im}\,\lambda|$")
    ax.set_title("gap margin over frequency")
    fig.tight_layout()
    fig.savefig(os.path.join(out, "gap_margin.png"), dpi=150)

    fig, ax = plt.subplots(figsize=(7, 4))
    sc = ax.scatter(tube["omega"], tube["theta"], c=margin, s=6,
                    cmap="viridis")
    fig.colorbar(sc, label=r"$\min |\mathrm{Im}\,\lambda|$")
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel(r"$\theta$")
    ax.set_title("band gap tube")
    fig.tight_layout()
    fig.savefig(os.path.join(out, "tube.png"), dpi=150)

    surf = np.genfromtxt(os.path.join(args.results, "surfaces.csv"),
                         delimiter=",", names=True)
    if surf.size:
        fig = plt.figure(figsize=(7, 5))
        ax = fig.add_subplot(projection="3d")
        ax.scatter(surf["theta"], surf["lambda"], surf["omega"], s=2)
        ax.set_xlabel(r"$\theta$")
        ax.set_ylabel(r"$\lambda$")
        ax.set_zlabel(r"$\omega$")
        ax.set_title("real spectral branches")
        fig.savefig(os.path.join(out, "surfaces.png"), dpi=150)

    print(f"wrote plots to {out}")


if __name__ == "__main__":
    main()
