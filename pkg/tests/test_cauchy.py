import math

import numpy as np
import pytest

from shocklab.cauchy import (
    CauchyState,
    assemble_initial_data,
    cauchy_dt,
    default_half_width,
    discrete_ansatz,
    evolve_cauchy,
    make_grid,
    profile_for_grid,
    step_cauchy,
)
from shocklab.errors import BlowUpError, InvalidParameterError
from shocklab.periodic import Mode, PeriodicPerturbation, evolve_periodic, init_periodic
from shocklab.profile import eval_profile
from shocklab.shifts import InitialDataSpec, bump

PI = math.pi
ZERO = PeriodicPerturbation(PI)


def perturbation(eps, phase=0.3):
    return PeriodicPerturbation(PI, (Mode(1, eps, 0.5 * eps, phase, 1.1), Mode(2, 0.3 * eps, 0.0, 0.7)))


@pytest.fixture(scope="module")
def coarse(model, shock):
    left, right = perturbation(0.02), perturbation(0.02, 2.0)
    grid = make_grid(left, right, 32, 20.0)
    prof = profile_for_grid(model, shock, grid.dx)
    data = InitialDataSpec(left, right, a=0.01, b=-0.004)
    return grid, prof, data


def test_unperturbed_profile_is_discrete_near_fixed_point(model, shock):
    grid = make_grid(ZERO, ZERO, 256, 1.0)
    prof = profile_for_grid(model, shock, grid.dx)
    grid = make_grid(ZERO, ZERO, 256, default_half_width(prof, (PI, PI)))
    s0 = assemble_initial_data(InitialDataSpec(ZERO, ZERO), prof, grid)
    dt = cauchy_dt(s0, model, shock.speed)
    run = evolve_cauchy(s0, model, prof, 1000 * dt, dt=dt, sample_dt=1000 * dt)
    end = run.state(-1)
    assert len(run) == 2
    drift = max(np.max(np.abs(end.v - s0.v)), np.max(np.abs(end.u - s0.u)))
    assert drift < 1e-6


def test_zero_perturbation_samples_profile(model, shock, coarse):
    grid, prof, _ = coarse
    s = assemble_initial_data(InitialDataSpec(ZERO, ZERO), prof, grid)
    vs, us, _, _ = eval_profile(prof, grid.xi)
    assert np.array_equal(s.v, vs) and np.array_equal(s.u, us)
    assert abs(s.X) < 1e-12 and abs(s.Y) < 1e-12


def test_bump_only_data_is_constant_beyond_support(model, shock, coarse):
    grid, prof, _ = coarse
    data = InitialDataSpec(ZERO, ZERO, a=0.05, b=0.02, radius=1.5)
    s = assemble_initial_data(data, prof, grid)
    vs, us, _, _ = eval_profile(prof, grid.xi)
    far = np.abs(grid.xi) >= 1.5
    assert np.array_equal(s.v[far], vs[far])
    np.testing.assert_allclose(s.v[~far] - vs[~far], 0.05 * bump(grid.xi[~far], 1.5), atol=1e-15)


def test_kernel_matches_numpy(model, coarse):
    grid, prof, data = coarse
    a = b = assemble_initial_data(data, prof, grid)
    for _ in range(5):
        a = step_cauchy(a, model, prof, 1e-3)
        b = step_cauchy(b, model, prof, 1e-3, use_kernel=False)
    assert np.max(np.abs(a.pack() - b.pack())) < 1e-13


def test_kernel_matches_numpy_without_aligned_table(model, shock, coarse):
    # table step not dividing dx exercises the generic interpolation branch
    from shocklab.profile import solve_profile

    grid, _, data = coarse
    prof = solve_profile(model, shock, h_prof=0.0097)
    a = b = assemble_initial_data(data, prof, grid)
    for _ in range(3):
        a = step_cauchy(a, model, prof, 1e-3)
        b = step_cauchy(b, model, prof, 1e-3, use_kernel=False)
    assert np.max(np.abs(a.pack() - b.pack())) < 1e-13


def test_discrete_masses_stay_balanced(model, coarse):
    grid, prof, data = coarse
    s0 = assemble_initial_data(data, prof, grid)
    run = evolve_cauchy(s0, model, prof, 1.0, sample_dt=0.25)
    for i in range(len(run)):
        st = run.state(i)
        vt, ut = discrete_ansatz(st, prof)
        assert abs(np.sum(st.v - vt) * grid.dx) < 1e-12
        assert abs(np.sum(st.u - ut) * grid.dx) < 1e-12
        # ends see the profile tail truncated at the half width
        tail = math.exp(-prof.decay_rate_right * grid.half_width)
        assert st.boundary_mismatch() < 10 * tail
    assert np.all(run.snapshots[:, :grid.m] > 0)


def test_single_donor_matches_periodic_solver(model, shock):
    """Same periodic solution on both ends and inside: the two solvers coincide."""
    pert = perturbation(0.03)
    n = 32
    grid = make_grid(pert, pert, n, 8.0)
    prof = profile_for_grid(model, shock, grid.dx)
    donor = init_periodic((1.2, 0.1), pert, n)
    il = grid.left_index()
    s0 = CauchyState(grid=grid, v=donor.v[il], u=donor.u[il], left_v=donor.v.copy(),
                     left_u=donor.u.copy(), right_v=donor.v.copy(), right_u=donor.u.copy(),
                     X=0.0, Y=0.0)
    dt = 2e-3
    run = evolve_cauchy(s0, model, prof, 0.5, dt=dt, sample_dt=0.5)
    ref = evolve_periodic(donor, model, 0.5, dt=dt, sample_dt=0.5, frame_speed=shock.speed)
    end = run.state(-1)
    assert abs(run.t_end - ref.t_end) < 1e-12
    assert np.max(np.abs(end.v - ref.snap_v[-1][il])) < 1e-10
    assert np.max(np.abs(end.u - ref.snap_u[-1][il])) < 1e-10


def test_second_order_self_convergence(model, shock):
    left, right = perturbation(0.02), perturbation(0.02, 2.0)
    data = InitialDataSpec(left, right, a=0.02, b=0.01)
    sols = {}
    for n in (32, 64, 128):
        grid = make_grid(left, right, n, 12.0)
        prof = profile_for_grid(model, shock, grid.dx)
        s0 = assemble_initial_data(data, prof, grid)
        dt = 0.25 * (PI / 128) ** 2  # one step size for all levels isolates the space error
        run = evolve_cauchy(s0, model, prof, 0.4, dt=dt, sample_dt=0.4)
        end = run.state(-1)
        # index nodes by their position on the coarsest grid
        key = np.rint(grid.xi / (PI / 32)).astype(int)
        on = np.isclose(grid.xi, key * (PI / 32), atol=1e-9) & (np.abs(grid.xi) < 10.0)
        sols[n] = dict(zip(key[on], end.v[on]))
    keys = sorted(set(sols[32]) & set(sols[64]) & set(sols[128]))
    c, m, f = (np.array([sols[n][k] for k in keys]) for n in (32, 64, 128))
    e1 = np.max(np.abs(c - m))
    e2 = np.max(np.abs(m - f))
    rate = math.log2(e1 / e2)
    assert 1.8 < rate < 2.3


def test_blow_up_detected(model, coarse):
    grid, prof, data = coarse
    s0 = assemble_initial_data(data, prof, grid)
    with pytest.raises(BlowUpError):
        evolve_cauchy(s0, model, prof, 2.0, dt=0.05, sample_dt=0.05)


def test_incommensurate_periods_rejected():
    with pytest.raises(InvalidParameterError):
        make_grid(PeriodicPerturbation(PI), PeriodicPerturbation(2.0), 32, 10.0)


def test_nonpositive_data_rejected(model, coarse):
    grid, prof, _ = coarse
    with pytest.raises(InvalidParameterError):
        assemble_initial_data(InitialDataSpec(ZERO, ZERO, a=-5.0), prof, grid)


def test_initial_antiderivative_norm_scales_with_data(model, coarse):
    from shocklab.diagnostics import build_frame

    grid, prof, _ = coarse
    norms = []
    for f in (1.0, 2.0):
        data = InitialDataSpec(perturbation(0.01 * f), perturbation(0.01 * f, 2.0), a=0.01 * f,
                               b=0.005 * f)
        fr = build_frame(assemble_initial_data(data, prof, grid), model, prof)
        norms.append(math.hypot(fr.norm("Phi", "H2"), fr.norm("Psi", "H2")))
    assert np.isfinite(norms[0]) and norms[0] > 0
    assert abs(norms[1] / norms[0] - 2.0) < 0.1
