"""Flat ``key = value`` configuration and the number formats of output files."""

from __future__ import annotations

import math
from pathlib import Path

from .model import InitialCondition, State, preset

PARAM_KEYS = ("xi", "chi", "lam", "kappa", "f", "omega", "delta", "p", "phi_deg")


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key.replace("-", "_")] = val
    return out


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> dict[str, str]:
    """Read ``path`` (if any) and apply ``key=value`` overrides on top."""
    cfg: dict[str, str] = {}
    if path is not None:
        cfg.update(parse_config_text(Path(path).read_text(encoding="utf-8"), str(path)))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def get_float(cfg: dict, key: str, default: float | None = None) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"{key} = {cfg[key]!r} is not a number") from None


def get_int(cfg: dict, key: str, default: int | None = None) -> int:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(cfg[key])
    except ValueError:
        raise ConfigError(f"{key} = {cfg[key]!r} is not an integer") from None


def params_from_config(cfg: dict):
    overrides = {}
    for key in PARAM_KEYS + ("lambda",):
        if key in cfg:
            val = cfg[key]
            if key == "phi_deg" and val.strip().lower() == "opt":
                overrides[key] = "opt"
            else:
                overrides["lam" if key == "lambda" else key] = get_float(cfg, key)
    return preset(cfg.get("preset", "paper-s3"), **overrides)


def ic_from_config(cfg: dict) -> InitialCondition:
    s = State(get_float(cfg, "x0", 1.0), get_float(cfg, "xdot0", 0.0), get_float(cfg, "v0", 0.0))
    return InitialCondition(s, math.radians(get_float(cfg, "phase0_deg", 0.0)))


def fmt(x) -> str:
    """Shortest round-trip decimal, padded to at least 9 significant digits."""
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    s = repr(x)
    mant = s.split("e")[0].lstrip("-").replace(".", "").lstrip("0")
    if len(mant) >= 9:
        return s
    return format(x, "#.9g")


def fmt12(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".12g")
