"""Potential and restoring force for the symmetric, compensated and 35-degree
configurations, written as one CSV (x, then U and F_r per case)."""

import argparse
import csv

import numpy as np

from bistable_harvester import equilibria, potential_energy, preset, restoring_force

CASES = {"symmetric": preset("symmetric"), "optimal": preset("a-opt"), "tilt35": preset("a35")}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="potential_profiles.csv")
    ap.add_argument("--n", type=int, default=801)
    args = ap.parse_args()

    xs = np.linspace(-2.0, 2.0, args.n)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"{k}_{q}" for k in CASES for q in ("U", "F_r")])
        cols = [xs]
        for p in CASES.values():
            cols += [potential_energy(p, xs), restoring_force(p, xs)]
        w.writerows(np.column_stack(cols).tolist())

    for name, p in CASES.items():
        eq = equilibria(p)
        depths = ", ".join(f"U({x:+.4f})={float(potential_energy(p, x)):+.5f}" for x in eq)
        print(f"{name:10s} phi={p.phi_deg:+8.4f} deg  equilibria: {depths}")


if __name__ == "__main__":
    main()
