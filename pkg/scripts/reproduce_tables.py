#!/usr/bin/env python3
"""Reproduce the benchmark band-gap tables for both material models.

Runs the full sweep for the constant-permittivity and the single-resonance
cylinder models and prints the detected gap intervals.  With --fast the grid
is coarsened (about a minute per model); the default grid matches the
production config (tens of minutes).
"""

import argparse
import time

from blochband import (SolverSettings, SweepConfig, build_structured_mesh,
                       dobson_model, resonant_model, sweep_band_structure)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-per-side", type=int, default=20)
    ap.add_argument("--fast", action="store_true",
                    help="coarser omega/theta grid")
    args = ap.parse_args()

    cfg = SweepConfig(
        omega_range=(0.0, 0.7),
        omega_step=8e-3 if args.fast else 2e-3,
        theta_count=5 if args.fast else 17,
        endpoint_tolerance=1e-4 if args.fast else 1e-5,
        full_grid=False,
        solver=SolverSettings())
    mesh = build_structured_mesh(args.n_per_side)

    for label, model in (("constant eps=8.9 cylinders", dobson_model()),
                         ("resonant cylinders", resonant_model())):
        t0 = time.time()
        report = sweep_band_structure(cfg, mesh, model)
        print(f"\n{label} (n={args.n_per_side}, {time.time() - t0:.0f}s):")
        if not report.gaps:
            print("  no gaps found")
        for g in report.gaps:
            tag = "  [indeterminate]" if g.indeterminate else ""
            print(f"  gap ({g.lo:.5f}, {g.hi:.5f})"
                  f"  margin {g.margin:.3e}{tag}")


if __name__ == "__main__":
    main()
