import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from shocklab.errors import InvalidParameterError, ModelInconsistencyError
from shocklab.gas import build_shock, make_custom, make_polytropic
from shocklab.profile import (
    ShockProfile,
    check_profile_invariants,
    decay_rates,
    eval_profile,
    profile_residual,
    solve_profile,
)


def h_fun(model, shock, v):
    return shock.speed ** 2 * (v - shock.v_left) + model.pressure(v) - model.pressure(shock.v_left)


def test_first_integral_endpoints(model, shock):
    assert abs(h_fun(model, shock, shock.v_left)) < 1e-12
    assert abs(h_fun(model, shock, shock.v_right)) < 1e-12


def test_slope_at_center(profile, shock):
    # -h(1.5) / (s sigma'(1.5)) from a 30-digit oracle
    v, u, g, gp = eval_profile(profile, 0.0)
    assert g == 0.5
    assert v == 1.5
    assert gp * shock.dv == pytest.approx(0.312731395811047289109, rel=1e-13)


def test_decay_rates(model, shock):
    lam, mu = decay_rates(model, shock)
    assert lam == pytest.approx(1.44337567297406441127, rel=1e-14)
    assert mu == pytest.approx(1.15470053837925152902, rel=1e-14)


def test_invariants_and_ends(profile, shock):
    assert check_profile_invariants(profile) == []
    assert abs(profile.v[0] - shock.v_left) < 1e-12
    assert abs(profile.v[-1] - shock.v_right) < 1e-12


def test_far_field_limits(profile, shock):
    v, u, g, gp = eval_profile(profile, -1e3)
    assert (v, u, g) == (shock.v_left, shock.u_left, 0.0)
    assert gp == 0.0
    v, u, g, gp = eval_profile(profile, 1e3)
    assert v == shock.v_right and g == 1.0 and gp == 0.0


def test_tail_continuity(profile):
    a, b = profile.xi[0], profile.xi[-1]
    for x in (a, b):
        inside = eval_profile(profile, x - 1e-9 * np.sign(x))
        outside = eval_profile(profile, x + 1e-9 * np.sign(x))
        assert inside[2] == pytest.approx(outside[2], abs=1e-15)
        assert inside[3] == pytest.approx(outside[3], rel=1e-6)


def test_offgrid_against_reintegration(model, shock, profile):
    s, dv = shock.speed, shock.dv

    def rhs(_, y):
        v = shock.v_left + dv * y[0]
        return [-h_fun(model, shock, v) / (s * model.sigma_d1(v) * dv)]

    for target in (-3.137, -0.4321, 0.00517, 1.9, 6.283):
        sol = solve_ivp(rhs, (0.0, target), [0.5], method="DOP853", rtol=1e-13, atol=1e-15)
        assert eval_profile(profile, target)[2] == pytest.approx(sol.y[0, -1], abs=1e-8)


def test_gprime_mass(profile):
    assert profile.gprime_mass() == pytest.approx(1.0, abs=1e-8)
    assert abs(profile.gprime_transform(0.0)[0] - 1.0) < 1e-8


def test_gprime_transform_matches_direct_quadrature(profile):
    x = np.linspace(-60, 60, 240001)
    _, _, _, gp = eval_profile(profile, x)
    for k in (0.7, 2.0, 4.0):
        direct = np.trapezoid(gp * np.exp(-1j * k * x), x)
        assert abs(profile.gprime_transform(k)[0] - direct) < 1e-8


def test_hermite_derivative_close_to_ode(profile):
    x = np.linspace(-10, 10, 2001) + 0.003
    _, _, _, gp = eval_profile(profile, x)
    assert np.max(np.abs(profile.hermite_gprime(x) - gp)) < 1e-8


def test_residual_and_order(model, shock):
    r1 = profile_residual(solve_profile(model, shock, h_prof=0.01), model, shock)
    r2 = profile_residual(solve_profile(model, shock, h_prof=0.005), model, shock)
    assert r1 < 1e-6
    assert 8.0 <= r1 / r2 <= 24.0


def test_constant_state_caught_by_invariants(profile, model, shock):
    flat = ShockProfile(xi=profile.xi, v=np.full_like(profile.v, shock.v_left),
                        u=np.full_like(profile.u, shock.u_left), g=np.zeros_like(profile.g),
                        q=np.ones_like(profile.q), gp=np.zeros_like(profile.gp),
                        decay_rate_left=1.0, decay_rate_right=1.0, shock=shock, model=model)
    assert profile_residual(flat, model, shock) == 0.0
    assert "v_s is not strictly increasing" in check_profile_invariants(flat)


def test_shift_covariance(model, shock, profile):
    delta = 0.37
    moved = solve_profile(model, shock, center=delta)
    x = np.linspace(-8, 8, 301)
    np.testing.assert_allclose(eval_profile(moved, x)[2], eval_profile(profile, x - delta)[2],
                               atol=1e-12)


def test_inverse_viscosity_profile():
    m = make_polytropic(2.0, viscosity="inverse")
    sh = build_shock(m, 1.0, 2.0, 0.0)
    p = solve_profile(m, sh)
    assert check_profile_invariants(p) == []
    assert profile_residual(p, m, sh) < 1e-6


def test_nonconvex_model_rejected():
    # decreasing but wavy pressure: the chord crosses the graph inside (1, 2)
    p = lambda v: 1.0 / v + 0.04 * np.sin(8.0 * v)
    p1 = lambda v: -1.0 / v ** 2 + 0.32 * np.cos(8.0 * v)
    p2 = lambda v: 2.0 / v ** 3 - 2.56 * np.sin(8.0 * v)
    m = make_custom(p, p1, p2, lambda v: np.ones_like(np.asarray(v, dtype=float)))
    sh = build_shock(m, 1.0, 2.0, 0.0)
    with pytest.raises(ModelInconsistencyError):
        solve_profile(m, sh)


@pytest.mark.parametrize("kw", [{"tail_tol": 0.0}, {"tail_tol": 1e-5}, {"h_prof": -0.1}])
def test_bad_arguments(model, shock, kw):
    with pytest.raises(InvalidParameterError):
        solve_profile(model, shock, **kw)


@settings(max_examples=15, deadline=None)
@given(gamma=st.floats(1.2, 3.0), vl=st.floats(0.5, 2.0), amp=st.floats(0.3, 5.0))
def test_monotone_profiles_property(gamma, vl, amp):
    m = make_polytropic(gamma)
    sh = build_shock(m, vl, vl + amp, 0.0)
    p = solve_profile(m, sh)
    assert check_profile_invariants(p) == []
    assert p.gprime_mass() == pytest.approx(1.0, abs=1e-8)
