"""Governing equations of the piezo-magneto-elastic bistable harvester.

All quantities are dimensionless. The sloping angle is stored in radians;
use :meth:`HarvesterParams.with_phi_deg` / :attr:`HarvesterParams.phi_deg`
at interfaces that speak degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi

# bounded dynamics stay well inside |x| <= 3
EQUILIBRIA_WINDOW = (-5.0, 5.0)


class AsymmetryTooStrongError(ValueError):
    """The gravity term cannot cancel the quadratic asymmetry (|sin phi| > 1)."""


class DegenerateEquilibriaError(ValueError):
    """Two equilibria coincide (saddle-node boundary)."""


@dataclass(frozen=True)
class HarvesterParams:
    xi: float = 0.01
    chi: float = 0.05
    lam: float = 0.05
    kappa: float = 0.5
    f: float = 0.083
    omega: float = 0.8
    delta: float = 0.0
    p: float = 0.59
    phi: float = 0.0  # radians
    # replaces the cubic restoring force by -x (analytic cross-checks only)
    frozen_linear: bool = False

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.xi < 0 or self.f < 0 or self.p < 0:
            raise ValueError("xi, f and p must be non-negative")

    @property
    def period(self) -> float:
        return TWO_PI / self.omega

    @property
    def phi_deg(self) -> float:
        return math.degrees(self.phi)

    @property
    def gravity(self) -> float:
        """Constant tilt load p*sin(phi)."""
        return self.p * math.sin(self.phi)

    def with_phi_deg(self, deg: float) -> "HarvesterParams":
        return replace(self, phi=math.radians(deg))

    def replace(self, **changes) -> "HarvesterParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        """Flat mapping with the angle in degrees (I/O form)."""
        out = {}
        for fld in fields(self):
            if fld.name == "phi":
                out["phi_deg"] = self.phi_deg
            elif fld.name != "frozen_linear":
                out[fld.name] = getattr(self, fld.name)
        return out

    def packed(self, phase0: float = 0.0) -> np.ndarray:
        """Coefficient vector consumed by the compiled integrator kernels."""
        return np.array(
            [self.xi, self.chi, self.lam, self.kappa, self.f, self.omega,
             self.delta, self.gravity, float(self.frozen_linear), phase0],
            dtype=np.float64,
        )


class State(NamedTuple):
    x: float
    xdot: float
    v: float


@dataclass(frozen=True)
class InitialCondition:
    state0: State = State(1.0, 0.0, 0.0)
    phase0: float = 0.0

    def __post_init__(self):
        s = State(*(float(c) for c in self.state0))
        if not all(math.isfinite(c) for c in s):
            raise ValueError(f"initial state must be finite, got {s}")
        object.__setattr__(self, "state0", s)
        ph = math.fmod(float(self.phase0), TWO_PI)
        if ph < 0:
            ph += TWO_PI
        if ph >= TWO_PI:
            ph = 0.0
        object.__setattr__(self, "phase0", ph)


# All presets share one parameter set and differ only in delta and phi.
PRESETS: dict[str, dict] = {
    "paper-s3": dict(xi=0.01, chi=0.05, lam=0.05, kappa=0.5, p=0.59,
                     delta=0.15, phi_deg=0.0, f=0.083, omega=0.8),
    "symmetric": dict(xi=0.01, chi=0.05, lam=0.05, kappa=0.5, p=0.59,
                      delta=0.0, phi_deg=0.0, f=0.083, omega=0.8),
    "a35": dict(xi=0.01, chi=0.05, lam=0.05, kappa=0.5, p=0.59,
                delta=0.15, phi_deg=35.0, f=0.083, omega=0.8),
    "a-opt": dict(xi=0.01, chi=0.05, lam=0.05, kappa=0.5, p=0.59,
                  delta=0.15, phi_deg="opt", f=0.083, omega=0.8),
}


def params_from_mapping(values: dict) -> HarvesterParams:
    """Build params from a flat mapping whose angle key is ``phi_deg``.

    ``phi_deg = "opt"`` resolves to the compensating angle for the given
    delta and p.
    """
    vals = dict(values)
    phi_deg = vals.pop("phi_deg", 0.0)
    if "lambda" in vals:
        vals["lam"] = vals.pop("lambda")
    kw = {k: float(v) for k, v in vals.items()}
    if isinstance(phi_deg, str) and phi_deg.strip().lower() == "opt":
        phi = optimal_angle(kw.get("delta", 0.0), kw.get("p", 0.59))
    else:
        phi = math.radians(float(phi_deg))
    return HarvesterParams(phi=phi, **kw)


def preset(name: str, **overrides) -> HarvesterParams:
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    base.update(overrides)
    return params_from_mapping(base)


def rhs(params: HarvesterParams, t: float, s, phase0: float = 0.0) -> np.ndarray:
    """Time derivative (xdot, xddot, vdot) of the state ``s`` at time ``t``."""
    x, xd, v = s
    if params.frozen_linear:
        spring = -x
    else:
        spring = 0.5 * x * (1.0 + 2.0 * params.delta * x - x * x)
    acc = (-2.0 * params.xi * xd + spring + params.chi * v
           + params.f * math.cos(params.omega * t + phase0) + params.gravity)
    return np.array([xd, acc, -params.lam * v - params.kappa * xd])


def restoring_force(params: HarvesterParams, x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * (1.0 + 2.0 * params.delta * x - x * x) - params.gravity


def potential_energy(params: HarvesterParams, x):
    """Antiderivative of the restoring force with U(0) = 0.

    The sign makes U'(x) = F_r(x), so the symmetric case is the usual
    double well with minima U(+-1) = -1/8.
    """
    x = np.asarray(x, dtype=float)
    x2 = x * x
    return x2 * x2 / 8.0 - params.delta * x2 * x / 3.0 - x2 / 4.0 - params.gravity * x


def force_extrema(params_or_delta) -> tuple[float, float]:
    """Stationary points (x1 > 0 > x2) of the restoring force."""
    d = getattr(params_or_delta, "delta", params_or_delta)
    root = math.sqrt(4.0 * d * d + 3.0)
    return (2.0 * d + root) / 3.0, (2.0 * d - root) / 3.0


def _bisect(fn, lo: float, hi: float, f_lo: float, ftol: float = 1e-12) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if abs(f_mid) < ftol or hi - lo < 1e-16:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def equilibria(params: HarvesterParams, window=EQUILIBRIA_WINDOW) -> list[float]:
    """Real roots of the restoring force inside ``window``, ascending.

    The cubic is monotone between its stationary points, so each monotone
    piece holds at most one root and plain bisection brackets it.
    """
    def fr(x):
        return float(restoring_force(params, x))

    x1, x2 = force_extrema(params)
    for xe in (x1, x2):
        if abs(fr(xe)) < 1e-14:
            raise DegenerateEquilibriaError(f"double root near x = {xe:.12g}")
    lo, hi = window
    knots = [lo] + sorted(k for k in (x2, x1) if lo < k < hi) + [hi]
    roots = []
    for a, b in zip(knots[:-1], knots[1:]):
        fa, fb = fr(a), fr(b)
        if fa == 0.0:
            if not roots or roots[-1] != a:
                roots.append(a)
            continue
        if (fa > 0) != (fb > 0) and fb != 0.0:
            roots.append(_bisect(fr, a, b, fa))
    if fr(hi) == 0.0:
        roots.append(hi)
    for r0, r1 in zip(roots[:-1], roots[1:]):
        if r1 - r0 < 1e-8:
            raise DegenerateEquilibriaError(f"roots {r0:.12g} and {r1:.12g} coincide")
    return roots


def optimal_angle(delta: float, p: float) -> float:
    """Sloping angle (radians) with F_r(x1) + F_r(x2) = 0 at the force extrema."""
    if p <= 0:
        if delta == 0:
            return 0.0
        raise AsymmetryTooStrongError("p must be > 0 to compensate a nonzero delta")
    arg = (8.0 * delta**3 + 9.0 * delta) / (27.0 * p)
    if abs(arg) > 1.0:
        raise AsymmetryTooStrongError(
            f"asymmetry too strong to compensate: |(8d^3+9d)/(27p)| = {abs(arg):.6g} > 1")
    return -math.asin(arg) + 0.0  # no negative zero
