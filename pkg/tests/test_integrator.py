import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from bistable_harvester import (HarvesterParams, InitialCondition, IntegratorConfig, State,
                                equilibria, integrate, poincare, potential_energy, preset, rhs,
                                steady_tail)
from bistable_harvester.integrator import (DivergenceError, PoincareSeries, poincare_batch,
                                           tail_length)

state_st = st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1))
S3_CALM = preset("paper-s3", f=0.051, omega=0.8)


def linear_exact(p, y0, t):
    a = np.array([[0.0, 1.0, 0.0], [-1.0, -2 * p.xi, p.chi], [0.0, -p.kappa, -p.lam]])
    return expm(a * t) @ np.asarray(y0, dtype=float)


def test_equilibrium_stays_put():
    p = preset("paper-s3", f=0.0)
    xr = equilibria(p)[-1]
    tr = integrate(p, InitialCondition(State(xr, 0.0, 0.0)), 200.0)
    assert np.max(np.abs(tr.states[:, 0] - xr)) < 1e-9
    assert np.max(np.abs(tr.states[:, 1:])) < 1e-9


@given(st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=20)
def test_unforced_energy_non_increasing(x0, y0):
    # storage function: mechanical energy + (chi/kappa) * v^2 / 2
    p = HarvesterParams(f=0.0, delta=0.15, phi=0.0)
    t = np.linspace(0, 60, 601)
    tr = integrate(p, InitialCondition(State(x0, y0, 0.0)), 60.0,
                   IntegratorConfig(rtol=1e-10, atol=1e-12), t_eval=t)
    x, y, v = tr.states.T
    e = 0.5 * y**2 + potential_energy(p, x) + 0.5 * (p.chi / p.kappa) * v**2
    assert np.all(np.diff(e) <= 1e-9)


def test_self_convergence_factor():
    ic = InitialCondition()
    t = [100.0]
    coarse = integrate(S3_CALM, ic, 100.0, IntegratorConfig(rtol=1e-6, atol=1e-9), t_eval=t)
    fine = integrate(S3_CALM, ic, 100.0, IntegratorConfig(rtol=1e-8, atol=1e-11), t_eval=t)
    ref = integrate(S3_CALM, ic, 100.0, IntegratorConfig(rtol=1e-12, atol=1e-14), t_eval=t)
    e1 = np.max(np.abs(coarse.states[-1] - ref.states[-1]))
    e2 = np.max(np.abs(fine.states[-1] - ref.states[-1]))
    assert e1 / e2 >= 10


@pytest.mark.parametrize("name", ["paper-s3", "symmetric", "a35"])
def test_agrees_with_scipy_short_horizon(name):
    p = preset(name)
    ic = InitialCondition(State(0.3, -0.2, 0.1), 0.7)
    t = np.linspace(0, 3 * p.period, 31)
    ours = integrate(p, ic, t[-1], IntegratorConfig(rtol=1e-10, atol=1e-12), t_eval=t)
    ref = solve_ivp(lambda tt, s: rhs(p, tt, s, ic.phase0), (0, t[-1]), ic.state0,
                    method="DOP853", t_eval=t, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(ours.states, ref.y.T, rtol=0, atol=1e-8)


def test_poincare_hits_exact_times():
    p = preset("symmetric", f=0.115)
    ps = poincare(p, InitialCondition(), 12, IntegratorConfig(rtol=1e-10, atol=1e-12))
    tr = integrate(p, InitialCondition(), ps.times[-1], IntegratorConfig(rtol=1e-10, atol=1e-12),
                   t_eval=ps.times)
    np.testing.assert_allclose(ps.samples, tr.states, atol=1e-8)
    np.testing.assert_allclose(ps.times, np.arange(1, 13) * p.period, rtol=1e-15)


def test_deterministic_repeat():
    p = preset("symmetric", f=0.083)
    a = poincare(p, InitialCondition(), 200)
    b = poincare(p, InitialCondition(), 200)
    assert a.samples.tobytes() == b.samples.tobytes()


def test_batch_matches_single():
    p = preset("paper-s3")
    states = np.array([[1.0, 0.0, 0.0], [-0.5, 0.4, 0.0], [2.0, -1.0, 0.0]])
    samples, status, _, xr = poincare_batch(p, states, 40, keep_from=31)
    for i, s in enumerate(states):
        ps = poincare(p, InitialCondition(State(*s)), 40, keep_from=31)
        assert status[i] == 0
        assert samples[i].tobytes() == ps.samples.tobytes()
        assert tuple(xr[i]) == ps.x_range


@pytest.mark.parametrize("cycles,frac,expected", [(1000, 0.1, 100), (300, 0.1, 30), (999, 0.1, 100),
                                                  (5, 0.1, 1), (7, 1.0, 7), (3, 0.5, 2)])
def test_tail_length_ceiling(cycles, frac, expected):
    assert tail_length(cycles, frac) == expected


def test_steady_tail_on_period_two_series():
    pts = np.array([[1.0, 0.0, 0.1], [-1.0, 0.5, -0.1]] * 50)
    tail = steady_tail(PoincareSeries(2.0, pts), 0.1)
    assert tail.cycles == 10 and tail.first_cycle == 91
    assert set(map(tuple, tail.samples)) == {(1.0, 0.0, 0.1), (-1.0, 0.5, -0.1)}


@given(state_st)
@settings(max_examples=15)
def test_half_period_symmetry(s):
    # symmetric model: s(t) -> -s(t) when the forcing phase shifts by pi
    p = preset("symmetric", f=0.115)
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12)
    a = poincare(p, InitialCondition(State(*s), 0.0), 3, cfg)
    b = poincare(p, InitialCondition(State(*(-c for c in s)), math.pi), 3, cfg)
    np.testing.assert_allclose(a.samples, -b.samples, atol=1e-7)


def test_rk4_fourth_order():
    p = HarvesterParams(f=0.0, frozen_linear=True, omega=1.0)
    y0 = (1.0, 0.0, 0.0)
    exact = linear_exact(p, y0, 20.0)
    errs = []
    for spp in (32, 64, 128):
        tr = integrate(p, InitialCondition(State(*y0)), 20.0,
                       IntegratorConfig(method="rk4", steps_per_period=spp))
        errs.append(np.max(np.abs(tr.states[-1] - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 4.0) <= 0.2), orders


def test_rk4_poincare_matches_dopri():
    p = preset("paper-s3", f=0.051)
    a = poincare(p, InitialCondition(), 10, IntegratorConfig(method="rk4", steps_per_period=1024))
    b = poincare(p, InitialCondition(), 10, IntegratorConfig(rtol=1e-11, atol=1e-13))
    np.testing.assert_allclose(a.samples, b.samples, atol=1e-7)


@pytest.mark.parametrize("rtol", [1e-5, 1e-7, 1e-9])
def test_dopri_error_tracks_tolerance(rtol):
    p = HarvesterParams(f=0.0, frozen_linear=True, omega=1.0)
    y0 = (1.0, 0.0, 0.0)
    tr = integrate(p, InitialCondition(State(*y0)), 20.0, IntegratorConfig(rtol=rtol, atol=rtol * 1e-3),
                   t_eval=[20.0])
    err = np.max(np.abs(tr.states[-1] - linear_exact(p, y0, 20.0)))
    assert err < 50 * rtol


def test_dense_output_between_steps():
    p = HarvesterParams(f=0.0, frozen_linear=True, omega=1.0)
    t = np.linspace(0, 10, 257)
    tr = integrate(p, InitialCondition(), 10.0, IntegratorConfig(rtol=1e-9, atol=1e-12), t_eval=t)
    ref = np.array([linear_exact(p, (1, 0, 0), ti) for ti in t])
    np.testing.assert_allclose(tr.states, ref, atol=1e-7)


def test_divergence_raises_with_time():
    # negative damping -> unbounded growth
    p = HarvesterParams(xi=0.0, f=50.0, omega=0.05, delta=0.0)
    with pytest.raises(DivergenceError) as info:
        integrate(p, InitialCondition(), 2000.0, IntegratorConfig(divergence_bound=10.0))
    assert 0 < info.value.time < 2000.0


def test_batch_flags_divergence():
    p = HarvesterParams(xi=0.0, f=50.0, omega=0.05, delta=0.0)
    samples, status, t_stop, _ = poincare_batch(p, np.array([[1.0, 0.0, 0.0]]), 2,
                                                IntegratorConfig(divergence_bound=10.0))
    assert status[0] != 0 and t_stop[0] < 2 * p.period


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        poincare(preset("paper-s3"), InitialCondition(), 5, keep_from=6)
