"""Time integration of the harvester ODEs.

The workhorse is a Dormand-Prince 5(4) pair with the standard quartic
continuous extension, compiled with numba. Stroboscopic (Poincare) samples
are read off the dense output at t_k = k * 2*pi/omega, so step-size
adaptivity never has to be clamped to the forcing period.

A classical fixed-step RK4 mode is kept for convergence cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .model import HarvesterParams, InitialCondition, State

OK, DIVERGED, UNDERFLOW = 0, 1, 2

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between the 5th and embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# quartic dense-output weights, rows = stages, cols = theta**1..4
_P = np.array([
    [1.0, -2.8535800653862835, 3.0717434641059005, -1.1270175653862835],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 4.023133379230305, -6.249321565289, 2.675424484351598],
    [0.0, -3.7324019615885042, 10.068970589843675, -5.685526961588504],
    [0.0, 2.5548038301849423, -6.399112377351017, 3.5219323679207912],
    [0.0, -1.3744241142186024, 3.272657752246729, -1.7672812570757455],
    [0.0, 1.3824689317781436, -3.764937863556287, 2.382468931778144],
])


class IntegrationError(RuntimeError):
    pass


class DivergenceError(IntegrationError):
    def __init__(self, time: float, bound: float):
        super().__init__(f"trajectory left |state| <= {bound:g} at t = {time:.9g}")
        self.time = time


class StiffnessError(IntegrationError):
    def __init__(self, time: float):
        super().__init__(f"step size underflow at t = {time:.9g}")
        self.time = time


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-6
    atol: float = 1e-9
    max_step: float | None = None  # None -> forcing period / 20
    divergence_bound: float = 1e6
    method: str = "dopri5"  # or "rk4"
    steps_per_period: int = 512  # rk4 only

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.method not in ("dopri5", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.steps_per_period < 1:
            raise ValueError("steps_per_period must be >= 1")

    def step_cap(self, params: HarvesterParams) -> float:
        return self.max_step if self.max_step is not None else params.period / 20.0


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n, 3)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> State:
        return State(*self.states[-1])


@dataclass
class PoincareSeries:
    period: float
    samples: np.ndarray  # (cycles, 3): x, xdot, v at t = k * period
    first_cycle: int = 1
    # min/max of x over the tracked (late) part of the continuous trajectory
    x_range: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 3)
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def cycles(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.first_cycle, self.first_cycle + self.cycles) * self.period

    @property
    def displacement(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def velocity(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def voltage(self) -> np.ndarray:
        return self.samples[:, 2]

    @property
    def final(self) -> State:
        return State(*self.samples[-1])


# ---------------------------------------------------------------------------
# compiled kernels

@njit(cache=True)
def _deriv(t, x, xd, v, prm):
    if prm[8] != 0.0:
        spring = -x
    else:
        spring = 0.5 * x * (1.0 + 2.0 * prm[6] * x - x * x)
    acc = (-2.0 * prm[0] * xd + spring + prm[1] * v
           + prm[4] * math.cos(prm[5] * t + prm[9]) + prm[7])
    return xd, acc, -prm[2] * v - prm[3] * xd


@njit(cache=True)
def _initial_step(prm, y, k0, rtol, atol, max_step):
    # Hairer & Wanner heuristic, order 5
    d0 = 0.0
    d1 = 0.0
    for i in range(3):
        sc = atol + rtol * abs(y[i])
        d0 = max(d0, abs(y[i]) / sc)
        d1 = max(d1, abs(k0[i]) / sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    a, b, c = _deriv(h0, y[0] + h0 * k0[0], y[1] + h0 * k0[1], y[2] + h0 * k0[2], prm)
    d2 = 0.0
    yn = (a, b, c)
    for i in range(3):
        sc = atol + rtol * abs(y[i])
        d2 = max(d2, abs(yn[i] - k0[i]) / sc / h0)
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, max_step)


@njit(cache=True)
def _dopri5(prm, y0, t_end, t_eval, rtol, atol, max_step, bound, track_from,
            record, cap):
    """Integrate on [0, t_end].

    Returns (status, t_stop, y, ev, n_ev, st_t, st_y, n_st, xmin, xmax).
    ``ev`` holds dense-output states at ``t_eval``; accepted steps are
    recorded (up to ``cap``) when ``record`` is set.
    """
    E = _E
    P = _P
    K = np.empty((7, 3))
    y = y0.copy()
    yn = np.empty(3)
    n_eval = t_eval.shape[0]
    ev = np.empty((n_eval, 3))
    st_t = np.empty(cap if record else 1)
    st_y = np.empty((cap if record else 1, 3))
    n_st = 0
    ie = 0
    xmin = np.inf
    xmax = -np.inf
    t = 0.0
    if record:
        st_t[0] = 0.0
        st_y[0] = y
        n_st = 1
    if track_from <= 0.0:
        xmin = y[0]
        xmax = y[0]
    a, b, c = _deriv(t, y[0], y[1], y[2], prm)
    K[0, 0] = a
    K[0, 1] = b
    K[0, 2] = c
    h = _initial_step(prm, y, K[0], rtol, atol, max_step)
    while t < t_end:
        h = min(h, max_step)
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        if h < 1e-14 * max(1.0, abs(t)):
            return UNDERFLOW, t, y, ev, ie, st_t, st_y, n_st, xmin, xmax
        for i in range(3):
            yn[i] = y[i] + h * _A21 * K[0, i]
        a, b, c = _deriv(t + _C2 * h, yn[0], yn[1], yn[2], prm)
        K[1, 0] = a
        K[1, 1] = b
        K[1, 2] = c
        for i in range(3):
            yn[i] = y[i] + h * (_A31 * K[0, i] + _A32 * K[1, i])
        a, b, c = _deriv(t + _C3 * h, yn[0], yn[1], yn[2], prm)
        K[2, 0] = a
        K[2, 1] = b
        K[2, 2] = c
        for i in range(3):
            yn[i] = y[i] + h * (_A41 * K[0, i] + _A42 * K[1, i] + _A43 * K[2, i])
        a, b, c = _deriv(t + _C4 * h, yn[0], yn[1], yn[2], prm)
        K[3, 0] = a
        K[3, 1] = b
        K[3, 2] = c
        for i in range(3):
            yn[i] = y[i] + h * (_A51 * K[0, i] + _A52 * K[1, i] + _A53 * K[2, i]
                                + _A54 * K[3, i])
        a, b, c = _deriv(t + _C5 * h, yn[0], yn[1], yn[2], prm)
        K[4, 0] = a
        K[4, 1] = b
        K[4, 2] = c
        for i in range(3):
            yn[i] = y[i] + h * (_A61 * K[0, i] + _A62 * K[1, i] + _A63 * K[2, i]
                                + _A64 * K[3, i] + _A65 * K[4, i])
        a, b, c = _deriv(t + h, yn[0], yn[1], yn[2], prm)
        K[5, 0] = a
        K[5, 1] = b
        K[5, 2] = c
        for i in range(3):
            yn[i] = y[i] + h * (_B1 * K[0, i] + _B3 * K[2, i] + _B4 * K[3, i]
                                + _B5 * K[4, i] + _B6 * K[5, i])
        t_new = t_end if last else t + h
        a, b, c = _deriv(t_new, yn[0], yn[1], yn[2], prm)
        K[6, 0] = a
        K[6, 1] = b
        K[6, 2] = c
        err = 0.0
        finite = True
        for i in range(3):
            if not math.isfinite(yn[i]):
                finite = False
            e = 0.0
            for s in range(7):
                e += E[s] * K[s, i]
            sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
            err = max(err, abs(h * e) / sc)
        if not finite or not math.isfinite(err):
            h *= 0.2
            continue
        if err <= 1.0:
            while ie < n_eval and t_eval[ie] <= t_new:
                te = t_eval[ie]
                if te == t_new:
                    for i in range(3):
                        ev[ie, i] = yn[i]
                else:
                    th = (te - t) / h
                    th2 = th * th
                    th3 = th2 * th
                    th4 = th3 * th
                    for i in range(3):
                        acc = 0.0
                        for s in range(7):
                            acc += K[s, i] * (P[s, 0] * th + P[s, 1] * th2
                                              + P[s, 2] * th3 + P[s, 3] * th4)
                        ev[ie, i] = y[i] + h * acc
                ie += 1
            for i in range(3):
                y[i] = yn[i]
                K[0, i] = K[6, i]
            t = t_new
            if abs(y[0]) > bound or abs(y[1]) > bound or abs(y[2]) > bound:
                return DIVERGED, t, y, ev, ie, st_t, st_y, n_st, xmin, xmax
            if t >= track_from:
                xmin = min(xmin, y[0])
                xmax = max(xmax, y[0])
            if record and n_st < cap:
                st_t[n_st] = t
                st_y[n_st] = y
                n_st += 1
            fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h *= fac
    return OK, t, y, ev, ie, st_t, st_y, n_st, xmin, xmax


@njit(cache=True)
def _rk4(prm, y0, h, n_steps, every, bound, track_from_step):
    """Classical RK4 with fixed step ``h``; keeps every ``every``-th state."""
    n_out = n_steps // every
    out = np.empty((n_out, 3))
    x, xd, v = y0[0], y0[1], y0[2]
    xmin = np.inf
    xmax = -np.inf
    io = 0
    for n in range(n_steps):
        t = n * h
        a1, b1, c1 = _deriv(t, x, xd, v, prm)
        a2, b2, c2 = _deriv(t + 0.5 * h, x + 0.5 * h * a1, xd + 0.5 * h * b1, v + 0.5 * h * c1, prm)
        a3, b3, c3 = _deriv(t + 0.5 * h, x + 0.5 * h * a2, xd + 0.5 * h * b2, v + 0.5 * h * c2, prm)
        a4, b4, c4 = _deriv(t + h, x + h * a3, xd + h * b3, v + h * c3, prm)
        x = x + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        xd = xd + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        v = v + h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        if not (abs(x) <= bound and abs(xd) <= bound and abs(v) <= bound):
            return DIVERGED, (n + 1) * h, out, io, xmin, xmax
        if n + 1 >= track_from_step:
            xmin = min(xmin, x)
            xmax = max(xmax, x)
        if (n + 1) % every == 0:
            out[io, 0] = x
            out[io, 1] = xd
            out[io, 2] = v
            io += 1
    return OK, n_steps * h, out, io, xmin, xmax


@njit(cache=True, parallel=True)
def _strobe_batch(prm, y0s, period, n_cycles, keep_from, rtol, atol, max_step,
                  bound, track_from):
    """Poincare samples for many initial states; cycles >= keep_from kept."""
    n = y0s.shape[0]
    n_keep = n_cycles - keep_from + 1
    out = np.full((n, n_keep, 3), np.nan)
    status = np.zeros(n, dtype=np.int64)
    t_stop = np.zeros(n)
    xr = np.empty((n, 2))
    t_eval = np.arange(keep_from, n_cycles + 1) * period
    t_end = n_cycles * period
    for j in prange(n):
        st, ts, _, ev, n_ev, _, _, _, xmin, xmax = _dopri5(
            prm, y0s[j], t_end, t_eval, rtol, atol, max_step, bound,
            track_from, False, 1)
        status[j] = st
        t_stop[j] = ts
        out[j, :n_ev] = ev[:n_ev]
        xr[j, 0] = xmin
        xr[j, 1] = xmax
    return out, status, t_stop, xr


# ---------------------------------------------------------------------------
# public API

def _raise_for(status: int, t_stop: float, cfg: IntegratorConfig):
    if status == DIVERGED:
        raise DivergenceError(t_stop, cfg.divergence_bound)
    if status == UNDERFLOW:
        raise StiffnessError(t_stop)


def _y0(ic: InitialCondition) -> np.ndarray:
    return np.array(ic.state0, dtype=np.float64)


def integrate(params: HarvesterParams, ic: InitialCondition, t_end: float,
              cfg: IntegratorConfig = IntegratorConfig(),
              t_eval=None, max_records: int = 2_000_000) -> Trajectory:
    """Integrate from t = 0 to ``t_end``.

    Without ``t_eval`` the trajectory holds every accepted step (RK4: every
    step); the last sample is the solution at exactly ``t_end``.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    prm = params.packed(ic.phase0)
    y0 = _y0(ic)
    if cfg.method == "rk4":
        h_target = params.period / cfg.steps_per_period
        n_steps = max(1, math.ceil(t_end / h_target - 1e-9))
        h = t_end / n_steps
        st, ts, out, n_out, _, _ = _rk4(prm, y0, h, n_steps, 1, cfg.divergence_bound, n_steps + 1)
        _raise_for(st, ts, cfg)
        times = np.arange(0, n_steps + 1) * h
        times[-1] = t_end
        states = np.vstack([y0, out[:n_out]])
        if t_eval is not None:
            t_eval = np.asarray(t_eval, dtype=float)
            states = np.column_stack([np.interp(t_eval, times, states[:, i]) for i in range(3)])
            times = t_eval
        return Trajectory(times, states)

    if t_eval is None:
        ev_t = np.empty(0)
        record = True
    else:
        ev_t = np.asarray(t_eval, dtype=np.float64)
        if np.any(np.diff(ev_t) < 0) or (ev_t.size and (ev_t[0] < 0 or ev_t[-1] > t_end)):
            raise ValueError("t_eval must be ascending inside [0, t_end]")
        record = False
    st, ts, y, ev, n_ev, st_t, st_y, n_st, _, _ = _dopri5(
        prm, y0, float(t_end), ev_t, cfg.rtol, cfg.atol, cfg.step_cap(params),
        cfg.divergence_bound, np.inf, record, max_records)
    _raise_for(st, ts, cfg)
    if record:
        if n_st >= max_records and st_t[n_st - 1] != t_end:
            raise IntegrationError(f"more than {max_records} steps; pass t_eval instead")
        return Trajectory(st_t[:n_st].copy(), st_y[:n_st].copy())
    # t = 0 requested explicitly is the initial state
    ev = ev[:n_ev]
    zero = ev_t[:n_ev] == 0.0
    ev[zero] = y0
    return Trajectory(ev_t.copy(), ev.copy())


def poincare(params: HarvesterParams, ic: InitialCondition, n_cycles: int,
             cfg: IntegratorConfig = IntegratorConfig(),
             keep_from: int = 1, track_fraction: float = 0.1) -> PoincareSeries:
    """Stroboscopic samples at t_k = k * 2*pi/omega, k = keep_from..n_cycles.

    ``x_range`` covers the continuous trajectory over the last
    ``track_fraction`` of the run.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    if not 1 <= keep_from <= n_cycles:
        raise ValueError("keep_from must lie in [1, n_cycles]")
    period = params.period
    prm = params.packed(ic.phase0)
    y0 = _y0(ic)
    t_end = n_cycles * period
    if cfg.method == "rk4":
        spp = cfg.steps_per_period
        h = period / spp
        track_step = n_cycles * spp - math.ceil(track_fraction * n_cycles * spp - 1e-9)
        st, ts, out, n_out, xmin, xmax = _rk4(prm, y0, h, n_cycles * spp, spp,
                                              cfg.divergence_bound, track_step)
        _raise_for(st, ts, cfg)
        samples = out[keep_from - 1:n_out]
    else:
        t_eval = np.arange(keep_from, n_cycles + 1) * period
        track_from = t_end * (1.0 - track_fraction)
        st, ts, _, ev, n_ev, _, _, _, xmin, xmax = _dopri5(
            prm, y0, t_end, t_eval, cfg.rtol, cfg.atol, cfg.step_cap(params),
            cfg.divergence_bound, track_from, False, 1)
        _raise_for(st, ts, cfg)
        samples = ev[:n_ev]
    return PoincareSeries(period, samples.copy(), first_cycle=keep_from,
                          x_range=(float(xmin), float(xmax)))


def poincare_batch(params: HarvesterParams, states0: np.ndarray, n_cycles: int,
                   cfg: IntegratorConfig = IntegratorConfig(), keep_from: int = 1,
                   track_fraction: float = 0.1, phase0: float = 0.0):
    """Vectorised :func:`poincare` over an (n, 3) array of initial states.

    Returns ``(samples, status, t_stop, x_range)``; rows of diverged or
    stalled trajectories contain NaN past the failure. Each row is computed
    independently, so results do not depend on the thread count.
    """
    if cfg.method != "dopri5":
        raise ValueError("batched integration supports dopri5 only")
    if not 1 <= keep_from <= n_cycles:
        raise ValueError("keep_from must lie in [1, n_cycles]")
    y0s = np.ascontiguousarray(states0, dtype=np.float64).reshape(-1, 3)
    period = params.period
    track_from = n_cycles * period * (1.0 - track_fraction)
    return _strobe_batch(params.packed(phase0), y0s, period, n_cycles, keep_from,
                         cfg.rtol, cfg.atol, cfg.step_cap(params),
                         cfg.divergence_bound, track_from)


def steady_tail(series: PoincareSeries, fraction: float = 0.1) -> PoincareSeries:
    """Last ceil(fraction * cycles) samples of ``series``."""
    if series.cycles == 0:
        raise ValueError("empty series")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    n = tail_length(series.cycles, fraction)
    return PoincareSeries(series.period, series.samples[-n:],
                          first_cycle=series.first_cycle + series.cycles - n,
                          x_range=series.x_range)


def tail_length(cycles: int, fraction: float) -> int:
    # guard against 0.1 * 1000 landing a hair above an integer
    return max(1, min(cycles, math.ceil(fraction * cycles - 1e-9)))


def set_workers(n: int | None):
    """Bound the number of threads used by the batched kernels."""
    if n is None:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
