"""Forward/backward parameter sweeps with state continuation.

Each parameter value is run for ``n_cycles`` forcing periods starting from the
state left by the previous value; the steady tail of the voltage Poincare
samples is kept. An integer number of periods always returns the forcing to
its starting phase, so carrying the phase offset unchanged keeps the forcing
continuous even when omega itself is swept.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .integrator import IntegratorConfig, IntegrationError, poincare, tail_length
from .model import HarvesterParams, InitialCondition, State

MAX_PERIOD = 16

_ALIASES = {
    "f": "f", "amplitude": "f",
    "omega": "omega", "frequency": "omega",
    "phi": "phi", "phi_deg": "phi", "angle": "phi",
}


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class SweepDivergenceError(IntegrationError):
    def __init__(self, parameter: str, value: float, cause: IntegrationError):
        super().__init__(f"integration failed at {parameter} = {value:.12g}: {cause}")
        self.parameter = parameter
        self.value = value
        self.cause = cause


@dataclass(frozen=True)
class SweepSpec:
    """Angle sweeps take their range in degrees."""

    parameter: str
    lo: float
    hi: float
    n_points: int = 1200
    direction: Direction = Direction.FORWARD
    n_cycles: int = 1000
    tail_fraction: float = 0.1

    def __post_init__(self):
        try:
            object.__setattr__(self, "parameter", _ALIASES[self.parameter])
        except KeyError:
            raise ValueError(f"cannot sweep {self.parameter!r}; use f, omega or phi") from None
        object.__setattr__(self, "direction", Direction(self.direction))
        if not self.lo < self.hi:
            raise ValueError("sweep range needs lo < hi")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if not 0 < self.tail_fraction <= 1:
            raise ValueError("tail_fraction must lie in (0, 1]")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    @property
    def ordered_values(self) -> np.ndarray:
        g = self.grid
        return g if self.direction is Direction.FORWARD else g[::-1].copy()

    @property
    def tail_size(self) -> int:
        return tail_length(self.n_cycles, self.tail_fraction)

    def apply(self, base: HarvesterParams, value: float) -> HarvesterParams:
        if self.parameter == "phi":
            return base.with_phi_deg(value)
        return base.replace(**{self.parameter: float(value)})


@dataclass
class BifurcationDiagram:
    parameter: str
    values: np.ndarray  # in sweep order
    voltages: np.ndarray  # (n_points, tail_size)
    direction: Direction
    base: HarvesterParams
    diverged: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.diverged is None:
            self.diverged = np.zeros(len(self.values), dtype=bool)

    def periods(self, tol: float = 1e-3, max_period: int = MAX_PERIOD) -> list[int | None]:
        return [None if d else cluster_periodicity(v, tol, max_period)
                for v, d in zip(self.voltages, self.diverged)]

    def in_grid_order(self) -> "BifurcationDiagram":
        """Same data with parameter values ascending."""
        if self.direction is Direction.FORWARD:
            return self
        return BifurcationDiagram(self.parameter, self.values[::-1].copy(),
                                  self.voltages[::-1].copy(), self.direction, self.base,
                                  self.diverged[::-1].copy())


def cluster_periodicity(samples, tol: float = 1e-3, max_period: int = MAX_PERIOD) -> int | None:
    """Greedy 1-D cluster count of ``samples`` with radius ``tol``.

    Returns None (not periodic) when more than ``max_period`` clusters appear.
    """
    return len(c) if (c := cluster_centers(samples, tol, max_period)) is not None else None


def cluster_centers(samples, tol: float = 1e-3, max_period: int = MAX_PERIOD) -> np.ndarray | None:
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("no samples")
    starts = [0]
    seed = s[0]
    for i in range(1, s.size):
        if s[i] - seed > tol:
            starts.append(i)
            seed = s[i]
            if len(starts) > max_period:
                return None
    bounds = starts + [s.size]
    return np.array([s[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])])


def sweep(base: HarvesterParams, spec: SweepSpec,
          ic0: InitialCondition = InitialCondition(),
          cfg: IntegratorConfig = IntegratorConfig(),
          on_divergence: str = "raise") -> BifurcationDiagram:
    """Run a continuation sweep.

    ``on_divergence="record"`` marks the failing value, fills its row with
    NaN and restarts the next value from ``ic0``.
    """
    if on_divergence not in ("raise", "record"):
        raise ValueError("on_divergence must be 'raise' or 'record'")
    values = spec.ordered_values
    n_tail = spec.tail_size
    volts = np.full((len(values), n_tail), np.nan)
    diverged = np.zeros(len(values), dtype=bool)
    state = ic0.state0
    keep_from = spec.n_cycles - n_tail + 1
    for i, val in enumerate(values):
        params = spec.apply(base, val)
        try:
            series = poincare(params, InitialCondition(state, ic0.phase0), spec.n_cycles,
                              cfg, keep_from=keep_from)
        except IntegrationError as exc:
            if on_divergence == "raise":
                raise SweepDivergenceError(spec.parameter, float(val), exc) from exc
            diverged[i] = True
            state = ic0.state0
            continue
        volts[i] = series.voltage
        state = State(*series.samples[-1])
    return BifurcationDiagram(spec.parameter, values, volts, spec.direction, base, diverged)


def diagrams_agree(a: BifurcationDiagram, b: BifurcationDiagram, tol: float = 1e-3) -> np.ndarray:
    """Per-value agreement of two diagrams over the same grid (any directions).

    Two sample sets agree when they cluster into the same number of points
    and the sorted cluster centers differ by at most ``tol``.
    """
    a = a.in_grid_order()
    b = b.in_grid_order()
    if a.values.shape != b.values.shape or not np.allclose(a.values, b.values, rtol=0, atol=1e-12):
        raise ValueError("diagrams are over different parameter grids")
    out = np.zeros(len(a.values), dtype=bool)
    for i, (va, vb) in enumerate(zip(a.voltages, b.voltages)):
        if a.diverged[i] or b.diverged[i]:
            continue
        ca = cluster_centers(va, tol)
        cb = cluster_centers(vb, tol)
        if ca is None or cb is None or len(ca) != len(cb):
            continue
        out[i] = bool(np.max(np.abs(ca - cb)) <= tol)
    return out


def default_window(parameter: str) -> tuple[float, float]:
    """Default sweep range per parameter (angle in degrees)."""
    return {"f": (0.01, 0.3), "omega": (0.1, 1.4), "phi": (-35.0, 35.0)}[_ALIASES[parameter]]
