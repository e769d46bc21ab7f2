import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bistable_harvester import (HarvesterParams, State, equilibria, force_extrema,
                                optimal_angle, potential_energy, preset, restoring_force, rhs)
from bistable_harvester.model import (AsymmetryTooStrongError, DegenerateEquilibriaError,
                                      InitialCondition, params_from_mapping)

S3 = preset("paper-s3")


def symmetric_duffing_rhs(t, s, xi, chi, lam, kappa, f, omega):
    # independently written textbook form of the symmetric harvester
    x, y, v = s
    return np.array([y, -2 * xi * y + 0.5 * x - 0.5 * x**3 + chi * v + f * np.cos(omega * t),
                     -lam * v - kappa * y])


def test_rhs_at_rest():
    p = HarvesterParams(f=0.0, delta=0.0)
    np.testing.assert_array_equal(rhs(p, 0.0, (0.0, 0.0, 0.0)), [0.0, 0.0, 0.0])


def test_rhs_hand_values():
    p = HarvesterParams(xi=0.01, chi=0.05, lam=0.05, kappa=0.5, f=0.1, omega=1.0,
                        delta=0.15, p=0.59, phi=0.0)
    d = rhs(p, 0.0, (1.0, 0.5, 0.2))
    # 0.5*1*(1+0.3-1) = 0.15; -0.01; +0.01; +0.1
    np.testing.assert_allclose(d, [0.5, 0.25, -0.26], rtol=0, atol=1e-15)


def test_frozen_linear_spring():
    p = HarvesterParams(f=0.0, frozen_linear=True)
    assert rhs(p, 0.0, (2.0, 0.0, 0.0))[1] == -2.0


def test_symmetric_potential_minima():
    p = preset("symmetric")
    np.testing.assert_allclose(potential_energy(p, [-1.0, 1.0]), [-0.125, -0.125], atol=1e-15)
    assert equilibria(p) == pytest.approx([-1.0, 0.0, 1.0], abs=1e-12)


def test_force_extrema_values():
    x1, x2 = force_extrema(0.15)
    assert x1 == pytest.approx(0.6859465277, abs=1e-9)
    assert x2 == pytest.approx(-0.4859465277, abs=1e-9)
    s1, s2 = force_extrema(0.0)
    assert s1 == pytest.approx(1 / math.sqrt(3)) and s2 == pytest.approx(-1 / math.sqrt(3))


def test_equilibria_asymmetric():
    eq = equilibria(S3)
    np.testing.assert_allclose(eq, [-0.8611874208, 0.0, 1.1611874208], atol=1e-9)


def test_equilibria_monostable_at_35_degrees():
    eq = equilibria(preset("a35"))
    assert len(eq) == 1
    assert eq[0] == pytest.approx(1.3800176, abs=1e-6)


def test_right_well_deeper_at_35_degrees():
    p = preset("a35")
    (xr,) = equilibria(p)
    xs = np.linspace(-3, 0, 3001)
    assert potential_energy(p, xr) < potential_energy(p, xs).min()


def test_degenerate_equilibria_rejected():
    # tilt that makes F_r vanish exactly at an extremum: gravity = -F_r(x1) without tilt
    x1, _ = force_extrema(0.0)
    g = -0.5 * x1 * (1 - x1 * x1)
    p = HarvesterParams(delta=0.0, p=1.0, phi=math.asin(-g))
    with pytest.raises(DegenerateEquilibriaError):
        equilibria(p)


def test_optimal_angle_value_and_speed():
    t0 = time.perf_counter()
    deg = math.degrees(optimal_angle(0.15, 0.59))
    elapsed = time.perf_counter() - t0
    assert deg == pytest.approx(-4.958874594, abs=1e-8)
    assert abs(deg - (-4.95)) <= 0.01
    assert elapsed < 1e-3
    assert math.degrees(optimal_angle(0.30, 0.59)) == pytest.approx(-10.5475, abs=1e-4)


def test_optimal_angle_gravity_value():
    phi = math.radians(4.95)
    assert 0.59 * math.sin(phi) == pytest.approx(0.0509089558, abs=1e-9)


def test_optimal_angle_zero_delta_is_positive_zero():
    a = optimal_angle(0.0, 0.59)
    assert a == 0.0 and math.copysign(1.0, a) == 1.0


def test_optimal_angle_rejects_strong_asymmetry():
    with pytest.raises(AsymmetryTooStrongError):
        optimal_angle(3.0, 0.59)


def _bisect_compensating_angle(delta, p):
    # oracle: solve F_r(x1) + F_r(x2) = 0 for phi numerically
    x1, x2 = force_extrema(delta)

    def g(phi):
        q = HarvesterParams(delta=delta, p=p, phi=phi)
        return float(restoring_force(q, x1) + restoring_force(q, x2))

    lo, hi = -math.pi / 2, math.pi / 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (g(mid) > 0) == (g(lo) > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("delta,p", [(0.15, 0.59), (0.05, 0.3), (-0.2, 0.9), (0.3, 0.59)])
def test_optimal_angle_matches_bisection(delta, p):
    assert optimal_angle(delta, p) == pytest.approx(_bisect_compensating_angle(delta, p), abs=1e-12)


valid_dp = st.tuples(st.floats(-0.5, 0.5), st.floats(0.2, 2.0)).filter(
    lambda t: abs((8 * t[0] ** 3 + 9 * t[0]) / (27 * t[1])) < 0.99)


@given(valid_dp)
def test_compensation_vanishes(dp):
    delta, p = dp
    q = HarvesterParams(delta=delta, p=p, phi=optimal_angle(delta, p))
    x1, x2 = force_extrema(q)
    assert abs(float(restoring_force(q, x1) + restoring_force(q, x2))) < 1e-12


def test_symmetry_on_thousand_points():
    p = preset("symmetric")
    xs = np.random.default_rng(0).uniform(-3, 3, 1000)
    np.testing.assert_array_equal(restoring_force(p, -xs), -restoring_force(p, xs))
    np.testing.assert_array_equal(potential_energy(p, -xs), potential_energy(p, xs))


@given(st.floats(-0.5, 0.5), st.floats(0.0, 1.5), st.floats(-0.6, 0.6))
def test_potential_derivative_is_force(delta, p, phi):
    q = HarvesterParams(delta=delta, p=p, phi=phi)
    xs = np.linspace(-2.5, 2.5, 101)
    h = 1e-5
    fd = (potential_energy(q, xs + h) - potential_energy(q, xs - h)) / (2 * h)
    np.testing.assert_allclose(fd, restoring_force(q, xs), rtol=0, atol=1e-8)


state_st = st.tuples(*(st.floats(-3, 3) for _ in range(3)))


@given(state_st, st.floats(0, 100), st.floats(0, 0.3), st.floats(0.1, 1.4))
def test_model_reduction_exact(s, t, f, omega):
    p = HarvesterParams(delta=0.0, phi=0.0, f=f, omega=omega)
    ours = rhs(p, t, s)
    ref = symmetric_duffing_rhs(t, s, p.xi, p.chi, p.lam, p.kappa, f, omega)
    np.testing.assert_allclose(ours, ref, rtol=1e-15, atol=1e-15)


@given(st.floats(-0.5, 0.5), st.floats(0.0, 1.5), st.floats(-1.5, 1.5))
def test_root_count_odd_and_sign_changes(delta, p, phi):
    q = HarvesterParams(delta=delta, p=p, phi=phi)
    try:
        eq = equilibria(q)
    except DegenerateEquilibriaError:
        return
    assert len(eq) in (1, 3)
    for r in eq:
        assert abs(float(restoring_force(q, r))) < 1e-10
        a, b = restoring_force(q, r - 1e-6), restoring_force(q, r + 1e-6)
        assert np.sign(a) != np.sign(b)


def test_params_validation_and_io():
    with pytest.raises(ValueError):
        HarvesterParams(omega=0.0)
    with pytest.raises(ValueError):
        HarvesterParams(f=-1.0)
    p = preset("a35")
    assert p.phi_deg == pytest.approx(35.0)
    assert params_from_mapping(p.as_dict()) == p
    assert preset("a-opt").phi_deg == pytest.approx(-4.958874594, abs=1e-8)
    with pytest.raises(KeyError):
        preset("nope")


def test_initial_condition_phase_wraps():
    ic = InitialCondition(State(0, 0, 0), -math.pi / 2)
    assert ic.phase0 == pytest.approx(1.5 * math.pi)
    with pytest.raises(ValueError):
        InitialCondition(State(math.nan, 0, 0))


TILTED = HarvesterParams(delta=0.15, p=0.59, phi=math.radians(-4.95), f=0.0, chi=0.0)


def test_symmetric_fixed_point_and_forced_origin():
    sym = HarvesterParams(delta=0.0, f=0.0, chi=0.0)
    np.testing.assert_array_equal(rhs(sym, 0.0, (1.0, 0.0, 0.0)), [0.0, 0.0, 0.0])
    np.testing.assert_array_equal(rhs(sym.replace(f=0.1), 0.0, (0.0, 0.0, 0.0)), [0.0, 0.1, 0.0])


def test_gravity_only_at_origin():
    d = rhs(TILTED, 0.0, (0.0, 0.0, 0.0))
    assert d[1] == pytest.approx(-0.0509089558, abs=1e-10)
    assert float(restoring_force(TILTED, 0.0)) == pytest.approx(0.0509089558, abs=1e-10)


def test_tilted_equilibria_against_polynomial_roots():
    ref = np.sort(np.roots([0.5, -TILTED.delta, -0.5, -TILTED.gravity]).real)
    np.testing.assert_allclose(equilibria(TILTED), ref, atol=1e-11)
    np.testing.assert_allclose(equilibria(TILTED), [-0.914800753, 0.0998232152, 1.11497754],
                               atol=1e-8)


def test_compensated_wells_nearly_equal_depth():
    from scipy.optimize import minimize_scalar

    def u(x):
        return float(potential_energy(TILTED, x))

    left = minimize_scalar(u, bounds=(-2, -0.3), method="bounded", options={"xatol": 1e-12})
    right = minimize_scalar(u, bounds=(0.3, 2), method="bounded", options={"xatol": 1e-12})
    assert abs(left.fun - right.fun) < 2e-4


@given(st.floats(-3, 3))
def test_force_extrema_vieta(delta):
    x1, x2 = force_extrema(delta)
    assert x1 > 0 > x2
    assert x1 * x2 == pytest.approx(-1 / 3, abs=1e-12)
