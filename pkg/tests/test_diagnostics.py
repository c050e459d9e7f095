import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import cumulative_simpson

from shocklab.cauchy import (
    assemble_initial_data,
    discrete_ansatz,
    evolve_cauchy,
    make_grid,
    profile_for_grid,
)
from shocklab.diagnostics import (
    build_frame,
    convergence_metric,
    cumulative_trapezoid,
    diagnostics_row,
    energy_ledger,
    periodic_size,
)
from shocklab.periodic import Mode, PeriodicPerturbation
from shocklab.shifts import InitialDataSpec

PI = math.pi
ZERO = PeriodicPerturbation(PI)


@pytest.fixture(scope="module")
def short_run(model, shock):
    left = PeriodicPerturbation(PI, (Mode(1, 0.02, 0.01, 0.3, 1.1),))
    right = PeriodicPerturbation(PI, (Mode(1, 0.02, 0.01, 2.0, -0.4),))
    grid = make_grid(left, right, 32, 24.0)
    prof = profile_for_grid(model, shock, grid.dx)
    s0 = assemble_initial_data(InitialDataSpec(left, right, a=0.01, b=0.004), prof, grid)
    run = evolve_cauchy(s0, model, prof, 1.0, sample_dt=0.25)
    return run, prof, left, right


def test_frame_of_ansatz_is_zero(model, short_run):
    run, prof, *_ = short_run
    st0 = run.state(2)
    vt, ut = discrete_ansatz(st0, prof)
    exact = type(st0)(**{**st0.__dict__, "v": vt, "u": ut})
    fr = build_frame(exact, model, prof)
    for name in ("phi", "psi", "Phi", "Psi", "w", "W_sum", "W_def"):
        assert np.all(getattr(fr, name) == 0.0)


def test_effective_velocity_routes_agree(model, short_run):
    run, prof, *_ = short_run
    for i in range(len(run)):
        fr = build_frame(run.state(i), model, prof)
        assert fr.w_identity_residual < 1e-10


def test_antiderivative_tails_vanish(model, short_run):
    run, prof, *_ = short_run
    for i in range(len(run)):
        fr = build_frame(run.state(i), model, prof)
        assert max(abs(t) for t in fr.tails) < 1e-8


def test_metric_is_zero_on_exact_profile(model, shock):
    grid = make_grid(ZERO, ZERO, 32, 20.0)
    prof = profile_for_grid(model, shock, grid.dx)
    s = assemble_initial_data(InitialDataSpec(ZERO, ZERO), prof, grid)
    assert convergence_metric(s, prof, 0.0) == 0.0
    assert convergence_metric(s, prof, 0.1) > 0.01


def test_initial_antiderivative_matches_fine_quadrature(model, short_run):
    run, prof, *_ = short_run
    fr = build_frame(run.state(0), model, prof)
    # independent quadrature rule on the same samples; the rules differ by O(dx^2)
    Phi = cumulative_simpson(fr.phi, dx=fr.dx, initial=0.0)
    Psi = cumulative_simpson(fr.psi, dx=fr.dx, initial=0.0)
    scale = np.max(np.abs(fr.Phi)) + np.max(np.abs(fr.Psi))
    assert np.max(np.abs(Phi - fr.Phi)) < 1e-2 * scale
    assert np.max(np.abs(Psi - fr.Psi)) < 1e-2 * scale


def test_ledger_of_unperturbed_run_vanishes_under_refinement(model, shock):
    # the sampled profile relaxes to the discrete travelling wave by O(dx^2)
    lhs = []
    for n in (32, 64):
        grid = make_grid(ZERO, ZERO, n, 20.0)
        prof = profile_for_grid(model, shock, grid.dx)
        s0 = assemble_initial_data(InitialDataSpec(ZERO, ZERO), prof, grid)
        run = evolve_cauchy(s0, model, prof, 0.3, sample_dt=0.1)
        led = energy_ledger([build_frame(run.state(i), model, prof) for i in range(len(run))], 0.0)
        assert led.initial_h2 < 1e-20
        lhs.append(led.lhs[-1])
    assert lhs[0] < 1e-6
    assert lhs[1] < lhs[0] / 8


def test_ledger_is_monotone_and_truncates(model, short_run):
    run, prof, left, right = short_run
    frames = [build_frame(run.state(i), model, prof) for i in range(len(run))]
    led = energy_ledger(frames, periodic_size(left, right))
    assert np.all(np.diff(led.lhs) >= 0.0)
    assert led.c0 > 0.0
    half = led.upto(0.5)
    assert 0.4 < half.times[-1] <= 0.5
    assert half.lhs[-1] <= led.lhs[-1]


def test_diagnostics_row_is_consistent(model, short_run):
    run, prof, *_ = short_run
    st = run.state(-1)
    row = diagnostics_row(st, model, prof, x_inf=st.X)
    assert abs(row.mass_v) < 1e-12 and abs(row.mass_u) < 1e-12
    assert row.w_residual < 1e-10
    assert row.metric > row.linf_phi_psi * 0.1


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), n=st.integers(2, 50))
def test_cumulative_trapezoid_exact_for_lines(a, b, n):
    x = np.linspace(0.0, 1.0, n + 1)
    out = cumulative_trapezoid(a + b * x, x[1])
    np.testing.assert_allclose(out, a * x + 0.5 * b * x * x, atol=1e-12)
