"""Forward and backward continuation sweeps for one scenario.

Defaults are the scaled desk runs (120 points, 300 cycles); --full uses
1200 points and 1000 cycles. Each direction is written to its own CSV and a
summary of periods and disagreements is printed.
"""

import argparse
import collections
import csv

from bistable_harvester import preset
from bistable_harvester.bifurcation import Direction, SweepSpec, diagrams_agree, default_window, sweep


def write(diag, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param_value", "sample_index", "v_sample"])
        for val, volts in zip(diag.values, diag.voltages):
            w.writerows([repr(float(val)), k, repr(float(v))] for k, v in enumerate(volts))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="a35")
    ap.add_argument("--parameter", default="f", choices=["f", "omega", "phi"])
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--stem", default="sweep")
    args = ap.parse_args()

    base = preset(args.preset, **{k: float(v) for k, v in (s.split("=", 1) for s in args.set)})
    n_points, n_cycles = (1200, 1000) if args.full else (120, 300)
    lo, hi = default_window(args.parameter)
    diags = {}
    for d in Direction:
        diags[d] = sweep(base, SweepSpec(args.parameter, lo, hi, n_points, d, n_cycles),
                         on_divergence="record")
        write(diags[d], f"{args.stem}.{d.value}.csv")
        counts = collections.Counter(diags[d].periods())
        print(f"{d.value:8s} periods: {dict(sorted(counts.items(), key=str))}")
    agree = diagrams_agree(diags[Direction.FORWARD], diags[Direction.BACKWARD])
    print(f"forward/backward agree at {int(agree.sum())}/{len(agree)} values")


if __name__ == "__main__":
    main()
