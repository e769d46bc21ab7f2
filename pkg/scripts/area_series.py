"""Relative basin areas per display color over a range of amplitudes."""

import argparse
import time

from bistable_harvester import preset
from bistable_harvester.basins import GridSpec, color_areas, compute_basins
from bistable_harvester.chaos01 import Chaos01Config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="a35")
    ap.add_argument("--omega", type=float, default=0.8)
    ap.add_argument("--amplitudes", type=float, nargs="+",
                    default=[0.019, 0.051, 0.083, 0.115, 0.147, 0.179])
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--n-cycles", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", default="area_series.csv")
    args = ap.parse_args()

    rows = []
    for f in args.amplitudes:
        t0 = time.perf_counter()
        bmap = compute_basins(preset(args.preset, f=f, omega=args.omega),
                              GridSpec(nx=args.n, ny=args.n), args.n_cycles,
                              Chaos01Config(seed=args.seed), workers=args.workers)
        areas = color_areas(bmap)
        rows += [(f, col, float(frac)) for col, frac in areas.items()]
        shown = ", ".join(f"{c}={float(v):.3f}" for c, v in areas.items())
        print(f"f={f}: {shown}  ({time.perf_counter() - t0:.0f} s)", flush=True)
    with open(args.out, "w") as fh:
        fh.write("f,color,fraction\n")
        fh.writelines(f"{f!r},{c},{v!r}\n" for f, c, v in rows)


if __name__ == "__main__":
    main()
