"""Voltage responses of the symmetric harvester at f=0.115 and f=0.083.

Prints the 0-1 test verdict for the reference initial condition and, with
--ic-sample N, the majority verdict over N random initial conditions.
"""

import argparse
import collections

import numpy as np

from bistable_harvester import InitialCondition, State, integrate, preset
from bistable_harvester.chaos01 import Chaos01Config, classify
from bistable_harvester.integrator import poincare, tail_length


def verdict(params, ic, n_cycles, cfg):
    n_test = tail_length(n_cycles, 0.5)
    ps = poincare(params, ic, n_cycles, keep_from=n_cycles - n_test + 1)
    return classify(ps.voltage, cfg)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--omega", type=float, default=0.8)
    ap.add_argument("--n-cycles", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--ic-sample", type=int, default=0)
    ap.add_argument("--series-out", help="write the last 50 periods of v(t) per amplitude")
    args = ap.parse_args()

    cfg = Chaos01Config(seed=args.seed)
    rng = np.random.default_rng(args.seed)
    for f in (0.115, 0.083):
        p = preset("symmetric", f=f, omega=args.omega)
        res = verdict(p, InitialCondition(), args.n_cycles, cfg)
        line = f"f={f}: K={res.k_median:.4f} {res.label.value}"
        if args.ic_sample:
            votes = collections.Counter(
                verdict(p, InitialCondition(State(*rng.uniform(-2, 2, 2), 0.0)), args.n_cycles,
                        cfg).label.value
                for _ in range(args.ic_sample))
            line += f"  ic sample: {dict(votes)}"
        print(line)
        if args.series_out:
            t_end = args.n_cycles * p.period
            t = np.linspace(t_end - 50 * p.period, t_end, 5001)
            tr = integrate(p, InitialCondition(), t_end, t_eval=t)
            np.savetxt(f"{args.series_out}_f{f}.csv", np.column_stack([t, tr.states[:, 2]]),
                       delimiter=",", header="t,v", comments="")


if __name__ == "__main__":
    main()
