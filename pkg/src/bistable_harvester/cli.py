"""Command-line entry point.

    harvester potential | optimal-angle | bifurcate | basin | areas | chaos-test

Every command reads an optional flat ``key = value`` file (``--config``),
then ``--set key=value`` overrides, then the dedicated flags. Angles are in
degrees everywhere on this interface.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import basins as bs
from .bifurcation import Direction, SweepSpec, default_window, sweep
from .chaos01 import Chaos01Config, classify
from .config import (ConfigError, fmt, fmt12, get_float, get_int, ic_from_config,
                     load_config, params_from_config)
from .integrator import IntegratorConfig, poincare, set_workers, tail_length
from .model import optimal_angle, potential_energy, restoring_force

C_SUPPORTS = {"full": (0.0, 2.0 * math.pi), "restricted": (math.pi / 5, 4 * math.pi / 5)}


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def integrator_config(cfg: dict) -> IntegratorConfig:
    return IntegratorConfig(
        rtol=get_float(cfg, "rtol", 1e-6),
        atol=get_float(cfg, "atol", 1e-9),
        max_step=get_float(cfg, "max_step") if "max_step" in cfg else None,
        method=cfg.get("method", "dopri5"),
        steps_per_period=get_int(cfg, "steps_per_period", 512),
        divergence_bound=get_float(cfg, "divergence_bound", 1e6),
    )


def chaos_config(cfg: dict) -> Chaos01Config:
    if "seed" not in cfg:
        raise ConfigError("the 0-1 test needs a seed (--seed N)")
    support = cfg.get("c_support", "full")
    if support not in C_SUPPORTS:
        raise ConfigError(f"c_support must be one of {sorted(C_SUPPORTS)}")
    return Chaos01Config(
        seed=get_int(cfg, "seed"),
        n_c=get_int(cfg, "n_c", 100),
        c_support=C_SUPPORTS[support],
        cut_fraction=get_float(cfg, "cut_fraction", 0.1),
        k_chaotic=get_float(cfg, "k_chaotic", 0.8),
        k_regular=get_float(cfg, "k_regular", 0.2),
    )


def grid_spec(cfg: dict) -> bs.GridSpec:
    return bs.GridSpec(
        x_range=(get_float(cfg, "x0_min", -3.0), get_float(cfg, "x0_max", 3.0)),
        xdot_range=(get_float(cfg, "xdot0_min", -3.0), get_float(cfg, "xdot0_max", 3.0)),
        v0=get_float(cfg, "v0", 0.0),
        nx=get_int(cfg, "nx", 100),
        ny=get_int(cfg, "ny", get_int(cfg, "nx", 100)),
    )


def basin_options(cfg: dict) -> bs.BasinOptions:
    return bs.BasinOptions(
        tail_fraction=get_float(cfg, "tail_fraction", 0.1),
        chaos_window=get_float(cfg, "chaos_window", 0.5),
        cluster_tol=get_float(cfg, "cluster_tol", 1e-2),
        match_tol=get_float(cfg, "match_tol", 1e-2),
    )


# ---------------------------------------------------------------------------
# commands

def cmd_potential(cfg: dict) -> str:
    params = params_from_config(cfg)
    xs = np.linspace(get_float(cfg, "x_min", -2.0), get_float(cfg, "x_max", 2.0),
                     get_int(cfg, "n_points", 401))
    u = potential_energy(params, xs)
    fr = restoring_force(params, xs)
    return _csv(([fmt(a), fmt(b), fmt(c)] for a, b, c in zip(xs, u, fr)), ["x", "U", "F_r"])


def cmd_optimal_angle(cfg: dict) -> str:
    delta = get_float(cfg, "delta", 0.15)
    p = get_float(cfg, "p", 0.59)
    return f"{math.degrees(optimal_angle(delta, p)):.4f}\n"


def cmd_bifurcate(cfg: dict) -> dict[str, str]:
    params = params_from_config(cfg)
    parameter = cfg.get("parameter", "f")
    lo_def, hi_def = default_window(parameter)
    direction = cfg.get("direction", "forward")
    dirs = [Direction.FORWARD, Direction.BACKWARD] if direction == "both" else [Direction(direction)]
    out = {}
    for d in dirs:
        spec = SweepSpec(parameter, get_float(cfg, "lo", lo_def), get_float(cfg, "hi", hi_def),
                         get_int(cfg, "n_points", 1200), d, get_int(cfg, "n_cycles", 1000),
                         get_float(cfg, "tail_fraction", 0.1))
        diag = sweep(params, spec, ic_from_config(cfg), integrator_config(cfg),
                     on_divergence="record")
        rows = []
        for val, volts, bad in zip(diag.values, diag.voltages, diag.diverged):
            if bad:
                rows.append([fmt(val), "0", "nan", "1"])
                continue
            rows.extend([fmt(val), str(k), fmt12(v), "0"] for k, v in enumerate(volts))
        out[d.value] = _csv(rows, ["param_value", "sample_index", "v_sample", "diverged"])
    return out


def run_basins(cfg: dict) -> bs.BasinMap:
    return bs.compute_basins(params_from_config(cfg), grid_spec(cfg), get_int(cfg, "n_cycles", 1000),
                             chaos_config(cfg), integrator_config(cfg), basin_options(cfg),
                             workers=get_int(cfg, "workers") if "workers" in cfg else None,
                             phase0=ic_from_config(cfg).phase0)


def basin_csv(bmap: bs.BasinMap) -> str:
    xs = bmap.grid.x_values
    ys = bmap.grid.xdot_values
    rows = []
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            rows.append([fmt(x), fmt(y), bmap.label_name(bmap.labels[iy, ix]), fmt(bmap.k[iy, ix])])
    return _csv(rows, ["x0", "xdot0", "label", "K"])


def registry_csv(bmap: bs.BasinMap) -> str:
    rows = []
    for e in bmap.registry.entries:
        fp = e.fingerprint
        lo, hi = fp.x_span if fp.x_span is not None else (math.nan, math.nan)
        pts = "|".join(f"{fmt(x)}:{fmt(y)}" for x, y in fp.points)
        rows.append([f"C{e.class_id}", e.color, str(fp.period), fp.well.value, fp.energy.value,
                     str(e.cells), fmt(lo), fmt(hi), pts])
    return _csv(rows, ["class_id", "color", "period", "well", "energy", "cells",
                       "x_min", "x_max", "points"])


def registry_path(out: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + ".registry.csv"))


def cmd_basin(cfg: dict) -> tuple[str, str]:
    bmap = run_basins(cfg)
    return basin_csv(bmap), registry_csv(bmap)


def read_label_counts(basin_path: str, group: str) -> dict[str, int]:
    colors = {}
    reg = Path(registry_path(basin_path))
    if group == "color":
        if not reg.exists():
            raise ConfigError(f"registry file {reg} not found (use --group label)")
        with open(reg, encoding="utf-8") as fh:
            colors = {r["class_id"]: r["color"] for r in csv.DictReader(fh)}
    counts: dict[str, int] = {}
    with open(basin_path, encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            lab = r["label"]
            key = colors.get(lab, "gray" if lab == "chaotic" else lab) if group == "color" else lab
            counts[key] = counts.get(key, 0) + 1
    return counts


def areas_table(counts_by_scenario: dict[str, dict[str, int]]) -> str:
    rows = []
    for scen, counts in counts_by_scenario.items():
        total = sum(counts.values())
        fracs = {k: Fraction(n, total) for k, n in counts.items()}
        assert sum(fracs.values()) == 1
        rows.extend([scen, k, fmt(float(v))] for k, v in sorted(fracs.items()))
    return _csv(rows, ["scenario", "class", "fraction"])


def cmd_areas(cfg: dict, inputs: list[str], scenarios: list[str], group: str) -> str:
    counts: dict[str, dict[str, int]] = {}
    for item in inputs:
        name, _, path = item.rpartition("=")
        name = name or Path(path).stem
        counts[name] = read_label_counts(path, group)
    for item in scenarios:
        name, _, spec = item.partition(":")
        sub = dict(cfg)
        for kv in filter(None, spec.split(",")):
            if "=" not in kv:
                raise ConfigError(f"scenario entry {kv!r} is not key=value")
            k, v = kv.split("=", 1)
            sub[k.strip()] = v.strip()
        bmap = run_basins(sub)
        fr = bs.color_areas(bmap) if group == "color" else bs.relative_areas(bmap)
        counts[name] = {k: int(v * bmap.labels.size) for k, v in fr.items()}
    if not counts:
        raise ConfigError("areas needs basin CSV inputs or --scenario entries")
    return areas_table(counts)


def read_series(path: str) -> np.ndarray:
    vals = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                vals.append(float(line.split(",")[0]))
    return np.array(vals)


def cmd_chaos_test(cfg: dict, series_path: str | None) -> str:
    ccfg = chaos_config(cfg)
    if series_path is not None:
        series = read_series(series_path)
    else:
        params = params_from_config(cfg)
        n_cycles = get_int(cfg, "n_cycles", 1000)
        n_test = tail_length(n_cycles, get_float(cfg, "chaos_window", 0.5))
        ps = poincare(params, ic_from_config(cfg), n_cycles, integrator_config(cfg),
                      keep_from=n_cycles - n_test + 1)
        series = ps.voltage
    res = classify(series, ccfg)
    return f"K={res.k_median:.4f} class={res.label.value}\n"


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("--preset", help="parameter preset (paper-s3, symmetric, a35, a-opt)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)

    ap = argparse.ArgumentParser(prog="harvester", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("potential", parents=[common], help="U(x) and F_r(x) table")
    p = sub.add_parser("optimal-angle", parents=[common], help="compensating angle in degrees")
    p.add_argument("--delta", type=float)
    p.add_argument("--p", type=float)
    p = sub.add_parser("bifurcate", parents=[common], help="continuation sweep")
    p.add_argument("--parameter", choices=["f", "omega", "phi"])
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--n-points", type=int)
    p.add_argument("--n-cycles", type=int)
    p.add_argument("--direction", choices=["forward", "backward", "both"])
    p = sub.add_parser("basin", parents=[common], help="basin map + attractor registry")
    p.add_argument("--n", type=int, help="grid points per axis")
    p.add_argument("--n-cycles", type=int)
    p.add_argument("--registry", help="registry output (default: <out>.registry.csv)")
    p = sub.add_parser("areas", parents=[common], help="relative basin areas")
    p.add_argument("inputs", nargs="*", help="basin CSVs, optionally NAME=PATH")
    p.add_argument("--scenario", action="append", default=[],
                   help="inline scenario NAME:key=value,key=value")
    p.add_argument("--group", choices=["color", "label"], default="color")
    p = sub.add_parser("chaos-test", parents=[common], help="0-1 test on a series or scenario")
    p.add_argument("--series", help="file with one observation per line")
    p.add_argument("--n-cycles", type=int)
    return ap


def _merge_flags(args, cfg: dict):
    simple = {"preset": "preset", "seed": "seed", "workers": "workers", "delta": "delta",
              "p": "p", "parameter": "parameter", "n_points": "n_points",
              "n_cycles": "n_cycles", "direction": "direction"}
    for attr, key in simple.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = str(val)
    if getattr(args, "range", None):
        cfg["lo"], cfg["hi"] = (repr(v) for v in args.range)
    if getattr(args, "n", None):
        cfg["nx"] = cfg["ny"] = str(args.n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        _merge_flags(args, cfg)
        if "workers" in cfg:
            set_workers(get_int(cfg, "workers"))
        cmd = args.command
        if cmd == "potential":
            _write(args.out, cmd_potential(cfg))
        elif cmd == "optimal-angle":
            _write(args.out, cmd_optimal_angle(cfg))
        elif cmd == "bifurcate":
            res = cmd_bifurcate(cfg)
            if len(res) == 1 or args.out in (None, "-"):
                for text in res.values():
                    _write(args.out, text)
            else:
                stem = Path(args.out)
                for d, text in res.items():
                    _write(str(stem.with_name(f"{stem.stem}.{d}{stem.suffix}")), text)
        elif cmd == "basin":
            if args.out in (None, "-"):
                raise ConfigError("basin writes two files; pass --out PATH")
            basin, registry = cmd_basin(cfg)
            _write(args.out, basin)
            _write(args.registry or registry_path(args.out), registry)
        elif cmd == "areas":
            _write(args.out, cmd_areas(cfg, args.inputs, args.scenario, args.group))
        elif cmd == "chaos-test":
            _write(args.out, cmd_chaos_test(cfg, args.series))
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
