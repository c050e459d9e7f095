"""Acceptance criteria 1-9 with pinned tolerances.

Each test prints one ``CRITERION n: PASS|FAIL`` line (collected in the
terminal summary) and then asserts.  Expensive runs are module fixtures shared
between criteria.
"""
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from shocklab.ansatz import AnsatzField, compute_sources, error_norms
from shocklab.cauchy import (
    assemble_initial_data,
    cauchy_dt,
    default_half_width,
    evolve_cauchy,
    make_grid,
    profile_for_grid,
)
from shocklab.config import load_config
from shocklab.experiment import (
    RunSummary,
    error_term_table,
    prepare,
    run_donors,
    run_experiment,
    shift_pipeline,
)
from shocklab.gas import build_shock, make_polytropic
from shocklab.periodic import (
    Mode,
    PeriodicPerturbation,
    evolve_periodic,
    fit_exponential,
    init_periodic,
    measure_decay,
)
from shocklab.profile import check_profile_invariants, profile_residual, solve_profile
from shocklab.shifts import (
    InitialDataSpec,
    PressureIntegrals,
    asymptotic_shifts,
    close_zero_mass,
    solve_initial_shifts,
    zero_mass_residual,
)

PI = math.pi
CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SHIFT_EPS = (0.01, 0.02, 0.04)


@pytest.fixture(scope="module")
def reference():
    return load_config(CONFIGS / "reference.yaml")


@pytest.fixture(scope="module")
def shift_runs(reference):
    """Closed shift pipelines at default resolution for the amplitude sweep."""
    out = {}
    for eps in (0.0,) + SHIFT_EPS:
        cfg = reference.with_value("perturbation.epsilon", eps)
        t0 = time.perf_counter()
        st = prepare(cfg)
        lrun, rrun = run_donors(st)
        summary = RunSummary(cfg.run_id)
        data, traj = shift_pipeline(st, lrun, rrun, summary)
        out[eps] = dict(setup=st, left=lrun, right=rrun, summary=summary, data=data, traj=traj,
                        seconds=time.perf_counter() - t0)
    return out


def random_shocks(n=200, seed=20240611):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        gamma = rng.uniform(1.2, 3.0)
        vl = rng.uniform(0.5, 3.0)
        amp = rng.uniform(0.0, 5.0)
        while amp == 0.0:
            amp = rng.uniform(0.0, 5.0)
        out.append((gamma, vl, vl + amp, rng.uniform(-2.0, 2.0)))
    return out


def test_criterion_1_shock_algebra(acceptance_report):
    t0 = time.perf_counter()
    worst, lax = 0.0, True
    for gamma, vl, vr, ul in random_shocks():
        m = make_polytropic(gamma)
        sh = build_shock(m, vl, vr, ul)
        worst = max(worst, *map(abs, sh.rh_residuals(m)))
        lax &= sh.lax_ok()
    dt = time.perf_counter() - t0
    ok = worst < 1e-12 and lax and dt < 1.0
    acceptance_report(1, ok, f"200 shocks: max R-H residual {worst:.2e} (< 1e-12), Lax {lax}, "
                             f"{dt:.2f} s (< 1 s)")
    assert ok


def test_criterion_2_profile(acceptance_report, model, shock):
    t0 = time.perf_counter()
    r1 = profile_residual(solve_profile(model, shock, h_prof=0.01), model, shock)
    t_one = time.perf_counter() - t0
    r2 = profile_residual(solve_profile(model, shock, h_prof=0.005), model, shock)
    ratio = r1 / r2
    # monotonicity over sweep shocks; very weak shocks are skipped since their
    # profile width grows like 1/amplitude
    sweep = [c for c in random_shocks() if c[2] - c[1] >= 0.1][::10]
    sweep.append((3.0, 0.5, 5.5, 0.0))
    bad, slowest = [], 0.0
    for gamma, vl, vr, ul in sweep:
        m = make_polytropic(gamma)
        t0 = time.perf_counter()
        p = solve_profile(m, build_shock(m, vl, vr, ul), h_prof=0.01)
        slowest = max(slowest, time.perf_counter() - t0, t_one)
        if check_profile_invariants(p):
            bad.append((gamma, vl, vr))
    ok = r1 < 1e-6 and 8.0 <= ratio <= 24.0 and not bad and slowest < 10.0
    acceptance_report(2, ok, f"residual {r1:.2e} at h=0.01 (< 1e-6), halving ratio {ratio:.1f} "
                             f"(16 +-50%), {len(sweep)} sweep profiles monotone: {not bad}, "
                             f"slowest {slowest:.2f} s (< 10 s)")
    assert ok


def test_criterion_3_periodic_decay(acceptance_report, model):
    details, ok = [], True
    for eps in (0.01, 0.05):
        pert = PeriodicPerturbation(PI, (Mode(1, eps, 0.5 * eps, 0.3, 1.1),))
        t0 = time.perf_counter()
        run = evolve_periodic(init_periodic((1.0, 0.0), pert, 256), model, 16.0)
        secs = time.perf_counter() - t0
        fit = measure_decay(run, "L2", model=model)
        nsteps = run.energy.size - 1
        drift = max(np.max(np.abs(run.snap_v.mean(axis=1) - 1.0)),
                    np.max(np.abs(run.snap_u.mean(axis=1))))
        drift_per_1e4 = drift * max(1.0, 1e4 / nsteps)
        rise = float(np.max(np.diff(run.energy)))
        good = fit.r2 > 0.99 and fit.alpha > 0 and drift_per_1e4 < 1e-12 and rise <= 1e-10 and secs < 30
        ok &= good
        details.append(f"eps={eps}: r2 {fit.r2:.5f} (> 0.99), alpha {fit.alpha:.3f}, "
                       f"mean drift {drift:.1e} over {nsteps} steps (< 1e-12 per 1e4), "
                       f"max energy rise {rise:.1e} (<= 1e-10), {secs:.1f} s (< 30 s)")
    acceptance_report(3, ok, "; ".join(details))
    assert ok


def test_criterion_4_shift_consistency(acceptance_report, shift_runs, model, profile, shock):
    from shocklab.shifts import shift_ode_rhs

    zero_l = init_periodic((shock.v_left, shock.u_left), PeriodicPerturbation(PI), 64)
    zero_r = init_periodic((shock.v_right, shock.u_right), PeriodicPerturbation(PI), 64)
    xr, yr = shift_ode_rhs(0.0, 0.0, 0.0, zero_l, zero_r, profile, model)
    tr0 = shift_runs[0.0]["traj"]
    tiny = 4 * np.finfo(float).eps
    zero_ok = (abs(xr) < tiny and abs(yr) < tiny and np.max(np.abs(tr0.x_rate)) < tiny
               and np.max(np.abs(tr0.y_rate)) < tiny)
    gaps, sups, secs = [], {}, []
    for eps in SHIFT_EPS:
        tr = shift_runs[eps]["traj"]
        gaps.append((eps, abs(tr.x_inf_ode - tr.x_inf_formula), abs(tr.y_inf_ode - tr.y_inf_formula)))
        sups[eps] = (np.max(np.abs(tr.x_vals - tr.x_inf_formula)),
                     np.max(np.abs(tr.y_vals - tr.y_inf_formula)))
        secs.append(shift_runs[eps]["seconds"])
    gap_ok = all(gx <= max(1e-6, 1e-3 * e) and gy <= max(1e-6, 1e-3 * e) for e, gx, gy in gaps)
    ratios = [sups[b][k] / sups[a][k] for a, b in ((0.01, 0.02), (0.02, 0.04)) for k in (0, 1)]
    lin_ok = all(abs(r / 2.0 - 1.0) <= 0.2 for r in ratios)
    ok = zero_ok and gap_ok and lin_ok and max(secs) < 120
    acceptance_report(4, ok, f"eps=0 rates {abs(xr):.1e}, {abs(yr):.1e} (machine zero: {zero_ok}); "
                             f"max |X_inf ode - formula| "
                             f"{max(max(g[1], g[2]) for g in gaps):.2e} (<= max(1e-6, 1e-3 eps)); "
                             f"sup|X - X_inf| doubling ratios {', '.join(f'{r:.3f}' for r in ratios)} "
                             f"(2 +-20%); slowest {max(secs):.1f} s (< 120 s)")
    assert ok


def test_criterion_5_zero_mass_closure(acceptance_report, shift_runs, model, profile, shock):
    rng = np.random.default_rng(7)
    worst_res, worst_gap, worst_corr = 0.0, 0.0, 0.0
    cases = []
    for eps in SHIFT_EPS:
        r = shift_runs[eps]
        cases.append((r["data"], r["summary"].pressure_integral_left, r["summary"].pressure_integral_right))
    base = shift_runs[0.02]["data"]
    for _ in range(40):
        f = rng.uniform(0.0, 2.0)
        cases.append((replace(base.scaled(f), a=rng.uniform(-0.1, 0.1), b=rng.uniform(-0.1, 0.1)),
                      rng.uniform(0, 1e-3), rng.uniform(0, 1e-3)))
    for data, pl, pr in cases:
        pi = PressureIntegrals(pl, pr)
        x0, y0 = solve_initial_shifts(data, profile)
        xi, yi = asymptotic_shifts(data, x0, y0, pi, model, profile)
        res = zero_mass_residual(data, pi, model, profile)
        worst_corr = max(worst_corr, abs(res - shock.du * (xi - yi)))
        closed = close_zero_mass(data, pi, model, profile)
        worst_res = max(worst_res, abs(zero_mass_residual(closed, pi, model, profile)))
        x0, y0 = solve_initial_shifts(closed, profile)
        xi, yi = asymptotic_shifts(closed, x0, y0, pi, model, profile)
        worst_gap = max(worst_gap, abs(xi - yi) / (1 + abs(xi)))
    ok = worst_res < 1e-12 and worst_gap < 1e-8 and worst_corr < 1e-8
    acceptance_report(5, ok, f"{len(cases)} configs: closed residual {worst_res:.1e} (< 1e-12), "
                             f"|X_inf - Y_inf|/(1+|X_inf|) {worst_gap:.1e} (< 1e-8), "
                             f"|residual - du (X_inf - Y_inf)| {worst_corr:.1e} (< 1e-8)")
    assert ok


def test_criterion_6_error_terms(acceptance_report, shift_runs, model, shock):
    tables = {}
    for eps in SHIFT_EPS[:2]:
        r = shift_runs[eps]
        tables[eps] = error_term_table(r["setup"], r["left"], r["right"], r["traj"], r["summary"])
    st = shift_runs[0.02]["setup"]
    t = tables[0.02]["t"]
    horizon = float(t[-1])
    t_cross = st.left.period / math.sqrt(-float(model.pressure_d1(shock.v_left)))
    sel = (t >= t_cross) & (t <= horizon - 3.0)
    r2s, ratios = [], []
    for eps, tab in tables.items():
        for col in ("H1_H2norm", "H2_H1norm"):
            fit = fit_exponential(t[sel], tab[col][sel], floor=0.0)
            r2s.append(fit.r2)
    for col in ("H1_H2norm", "H2_H1norm"):
        q = tables[0.02][col][sel] / tables[0.01][col][sel]
        ratios.extend([q.min(), q.max()])
    # unperturbed ansatz with X = Y
    r0 = shift_runs[0.0]
    f0 = AnsatzField(r0["setup"].profile, model, r0["left"], r0["right"], r0["traj"])
    zero = max(max(error_norms(compute_sources(f0, tt, st.grid.xi))) for tt in (0.0, 3.0, 7.5))
    same = np.max(np.abs(r0["traj"].x_vals - r0["traj"].y_vals))
    ok = min(r2s) > 0.98 and all(abs(q / 2 - 1) <= 0.2 for q in ratios) and zero < 1e-12 and same < 1e-14
    acceptance_report(6, ok, f"window [{t_cross:.2f}, {horizon - 3.0:.1f}]: min r2 {min(r2s):.4f} (> 0.98), "
                             f"doubling ratio range [{min(ratios):.3f}, {max(ratios):.3f}] (2 +-20%), "
                             f"eps=0 norms {zero:.1e} (< 1e-12) with |X - Y| {same:.0e}")
    assert ok


@pytest.fixture(scope="module")
def headline(reference):
    t0 = time.perf_counter()
    art = run_experiment(reference)
    return art, time.perf_counter() - t0


def test_criterion_7_headline(acceptance_report, headline):
    art, secs = headline
    s = art.summary
    ok = (s.status == "ok" and s.metric_final < 0.1 * s.metric_initial
          and s.max_abs_mass_v < 1e-8 and secs < 600)
    acceptance_report(7, ok, f"metric {s.metric_initial:.4f} -> {s.metric_final:.2e} "
                             f"(ratio {s.metric_ratio:.4f} < 0.1), max |int(v - v~)| "
                             f"{s.max_abs_mass_v:.1e} (< 1e-8), boundary mismatch "
                             f"{s.max_boundary_mismatch:.1e}, {secs:.0f} s (< 600 s)")
    assert ok


def test_criterion_8_energy_ledger(acceptance_report, reference):
    c0 = {}
    for eps in (0.02, 0.01):
        cfg = reference.with_value("perturbation.epsilon", eps)
        cfg = cfg.with_value("numerics.cells_per_period", 128)
        s = run_experiment(cfg).summary
        c0[eps] = (s.c0, s.c0_half_horizon, s.E0)
    finite = all(math.isfinite(v) and v > 0 for v in (c0[0.02][0], c0[0.01][0]))
    variation = max(c0[0.02][0], c0[0.01][0]) / min(c0[0.02][0], c0[0.01][0])
    growth = max(c0[e][0] / c0[e][1] for e in c0)
    ok = finite and variation < 2.0 and growth <= 1.05
    acceptance_report(8, ok, f"C0 = {c0[0.02][0]:.4e} (eps 0.02, E0 {c0[0.02][2]:.3f}), "
                             f"{c0[0.01][0]:.4e} (eps 0.01, E0 {c0[0.01][2]:.3f}); "
                             f"variation {variation:.3f}x (< 2x); C0(T)/C0(T/2) {growth:.4f} (<= 1.05)")
    assert ok


def test_criterion_9_travelling_wave_fidelity(acceptance_report, model, shock):
    zero = PeriodicPerturbation(PI)
    grid = make_grid(zero, zero, 256, 1.0)
    prof = profile_for_grid(model, shock, grid.dx)
    grid = make_grid(zero, zero, 256, default_half_width(prof, (PI, PI)))
    s0 = assemble_initial_data(InitialDataSpec(zero, zero), prof, grid)
    dt = cauchy_dt(s0, model, shock.speed)
    end = evolve_cauchy(s0, model, prof, 1000 * dt, dt=dt, sample_dt=1000 * dt).state(-1)
    drift = max(np.max(np.abs(end.v - s0.v)), np.max(np.abs(end.u - s0.u)))

    # periodic solver against a fine reference at a shared step
    pert = PeriodicPerturbation(PI, (Mode(1, 0.05, 0.02, 0.3, 1.0),))
    ref = evolve_periodic(init_periodic((1.0, 0.0), pert, 512), model, 0.25, dt=2e-5).state()
    errs = []
    for n in (32, 64, 128):
        s = evolve_periodic(init_periodic((1.0, 0.0), pert, n), model, 0.25, dt=2e-5).state()
        k = 512 // n
        errs.append(np.max(np.abs(s.v - ref.v[::k])) + np.max(np.abs(s.u - ref.u[::k])))
    p_rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]

    # full-line solver, self-convergence on shared nodes
    left = PeriodicPerturbation(PI, (Mode(1, 0.02, 0.01, 0.3, 1.1), Mode(2, 0.006, 0.0, 0.7)))
    right = PeriodicPerturbation(PI, (Mode(1, 0.02, 0.01, 2.0, -0.4),))
    data = InitialDataSpec(left, right, a=0.02, b=0.01)
    sols = {}
    for n in (32, 64, 128):
        g = make_grid(left, right, n, 12.0)
        p = profile_for_grid(model, shock, g.dx)
        st = evolve_cauchy(assemble_initial_data(data, p, g), model, p, 0.4,
                           dt=0.25 * (PI / 128) ** 2, sample_dt=0.4).state(-1)
        key = np.rint(g.xi / (PI / 32)).astype(int)
        on = np.isclose(g.xi, key * (PI / 32), atol=1e-9) & (np.abs(g.xi) < 10.0)
        sols[n] = dict(zip(key[on], st.v[on]))
    keys = sorted(set(sols[32]) & set(sols[64]) & set(sols[128]))
    c, m, f = (np.array([sols[n][k] for k in keys]) for n in (32, 64, 128))
    c_rate = math.log2(np.max(np.abs(c - m)) / np.max(np.abs(m - f)))
    ok = drift < 1e-6 and all(1.8 < r < 2.3 for r in p_rates) and 1.8 < c_rate < 2.3
    acceptance_report(9, ok, f"profile drift {drift:.1e} over 1000 steps (< 1e-6); "
                             f"periodic orders {p_rates[0]:.2f}, {p_rates[1]:.2f}; "
                             f"full-line order {c_rate:.2f} (1.8 to 2.3)")
    assert ok
