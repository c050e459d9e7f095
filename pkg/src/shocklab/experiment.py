"""End-to-end experiment: donors, shifts, error terms, full-line solve, diagnostics.

:func:`run_experiment` walks the stages in order and stops after ``until``
(``profile``, ``periodic``, ``shifts`` or ``run``).  Every failure is re-raised
as :class:`ExperimentError` carrying the stage it happened in.  Results are
plain arrays and scalars so they pickle across processes.
"""
from __future__ import annotations

import contextlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .ansatz import AnsatzField, compute_sources, error_norms
from .cauchy import (
    assemble_initial_data,
    default_half_width,
    discrete_ansatz,
    evolve_cauchy,
    make_grid,
    profile_for_grid,
)
from .config import AUTO, ExperimentConfig
from .diagnostics import build_frame, diagnostics_row, energy_ledger, periodic_size
from .errors import ShockLabError
from .gas import build_shock, make_polytropic
from .periodic import (
    deviation_norms,
    evolve_periodic,
    fit_exponential,
    init_periodic,
    measure_decay,
    time_averaged_pressure_integral,
)
from .shifts import (
    InitialDataSpec,
    PressureIntegrals,
    asymptotic_shifts,
    close_zero_mass,
    integrate_shifts,
    solve_initial_shifts,
    zero_mass_residual,
)

NA = "n/a"
STAGES = ("profile", "periodic", "shifts", "run")


class ExperimentError(ShockLabError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:  # every failure is reported with its stage
        raise ExperimentError(name, exc) from exc


@dataclass
class RunSummary:
    """Scalar outcome of one run; unset fields print as ``n/a``."""

    run_id: str
    status: str = "ok"
    failed_stage: object = NA
    error: object = NA
    b: object = NA
    zero_mass_residual: object = NA
    pressure_integral_left: object = NA
    pressure_integral_right: object = NA
    X0: object = NA
    Y0: object = NA
    X0_discrete: object = NA
    Y0_discrete: object = NA
    x_inf_ode: object = NA
    x_inf_formula: object = NA
    y_inf_ode: object = NA
    y_inf_formula: object = NA
    alpha_periodic_left: object = NA
    alpha_periodic_right: object = NA
    alpha_shift_x: object = NA
    alpha_shift_y: object = NA
    alpha_H1: object = NA
    alpha_H2: object = NA
    r2_H1: object = NA
    r2_H2: object = NA
    alpha_phipsi: object = NA
    eps_periodic: object = NA
    E0: object = NA
    c0: object = NA
    c0_half_horizon: object = NA
    metric_initial: object = NA
    metric_final: object = NA
    metric_ratio: object = NA
    max_abs_mass_v: object = NA
    max_abs_mass_u: object = NA
    max_boundary_mismatch: object = NA
    max_w_residual: object = NA
    max_tail: object = NA
    wall_time_s: object = NA

    def record(self, timing: bool = False) -> dict:
        """Flat ``key -> text``; wall time only when ``timing`` (it breaks byte identity)."""
        out = {}
        for f in fields(self):
            if f.name == "wall_time_s" and not timing:
                continue
            val = getattr(self, f.name)
            out[f.name] = repr(float(val)) if isinstance(val, (float, np.floating)) else str(val)
        return out

    def text(self, timing: bool = False) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.record(timing).items())


@dataclass
class RunArtifacts:
    config: ExperimentConfig
    summary: RunSummary
    tables: dict = field(default_factory=dict)  # name -> {column: array}


# ---------------------------------------------------------------------------
# stages


@dataclass(frozen=True, eq=False)
class Setup:
    config: ExperimentConfig
    model: object
    shock: object
    profile: object
    grid: object
    left: object
    right: object
    data: InitialDataSpec


def prepare(cfg: ExperimentConfig) -> Setup:
    with _stage("model"):
        g = cfg.gas
        model = make_polytropic(g.gamma, g.viscosity, g.mu0)
        sh = cfg.shock
        shock = build_shock(model, sh.v_left, sh.v_right, sh.u_left)
        left, right = cfg.sides()
    n = cfg.numerics
    with _stage("profile"):
        dx = left.period / n.cells_per_period
        profile = profile_for_grid(model, shock, dx, tail_tol=n.profile_tail_tol)
    with _stage("grid"):
        hw = (default_half_width(profile, (left.period, right.period))
              if n.half_width == AUTO else float(n.half_width))
        grid = make_grid(left, right, n.cells_per_period, hw)
    b = 0.0 if cfg.bump.b_deferred else float(cfg.bump.b)
    data = InitialDataSpec(left, right, a=cfg.bump.a, b=b, radius=cfg.bump.radius)
    return Setup(cfg, model, shock, profile, grid, left, right, data)


def _left_crossing(st: Setup) -> float:
    """One acoustic crossing of the left period; start of the decay-fit windows."""
    c = math.sqrt(-float(st.model.pressure_d1(st.shock.v_left)))
    return st.left.period / c


def _fit(t, y, start, stop=None, floor=1e-13):
    t = np.asarray(t)
    y = np.asarray(y)
    sel = t >= start
    if stop is not None:
        sel &= t <= stop
    if sel.sum() < 5:
        return None
    env = np.maximum.accumulate(np.abs(y[sel])[::-1])[::-1]
    fit = fit_exponential(t[sel], env, floor=floor)
    return None if not math.isfinite(fit.alpha) else fit


def run_donors(st: Setup) -> tuple:
    n = st.config.numerics
    sh = st.shock
    with _stage("periodic"):
        horizon = n.donor_horizon()
        lrun = evolve_periodic(init_periodic((sh.v_left, sh.u_left), st.left, st.grid.n_left),
                               st.model, horizon, sample_dt=n.donor_sample_dt, cfl=n.cfl)
        rrun = evolve_periodic(init_periodic((sh.v_right, sh.u_right), st.right, st.grid.n_right),
                               st.model, horizon, sample_dt=n.donor_sample_dt, cfl=n.cfl)
    return lrun, rrun


def _periodic_table(run, model) -> dict:
    idx = np.arange(run.snap_v.shape[0]) * run.sample_every
    return {"t": run.times, "l2_deviation": deviation_norms(run, "L2"),
            "energy": run.energy[idx], "pressure_excess": run.pressure_excess[idx]}


def _periodic_fits(summary: RunSummary, st: Setup, lrun, rrun) -> None:
    with _stage("fits"):
        for side, run in (("left", lrun), ("right", rrun)):
            fit = measure_decay(run, "L2", model=st.model)
            if not fit.converged and math.isfinite(fit.alpha):
                setattr(summary, f"alpha_periodic_{side}", fit.alpha)


def pressure_integrals(st: Setup, lrun, rrun) -> PressureIntegrals:
    tol = st.config.numerics.pressure_tol
    with _stage("pressure_integrals"):
        return PressureIntegrals(time_averaged_pressure_integral(lrun, st.model, tol=tol),
                                 time_averaged_pressure_integral(rrun, st.model, tol=tol))


def shift_pipeline(st: Setup, lrun, rrun, summary: RunSummary):
    pi = pressure_integrals(st, lrun, rrun)
    summary.pressure_integral_left, summary.pressure_integral_right = pi.left, pi.right
    data = st.data
    with _stage("closure"):
        if st.config.bump.b_deferred:
            data = close_zero_mass(data, pi, st.model, st.profile)
        summary.b = data.b
        summary.zero_mass_residual = zero_mass_residual(data, pi, st.model, st.profile)
    with _stage("initial_shifts"):
        x0, y0 = solve_initial_shifts(data, st.profile)
        summary.X0, summary.Y0 = x0, y0
    with _stage("shift_ode"):
        traj = integrate_shifts(x0, y0, lrun, rrun, st.profile, st.model)
        summary.x_inf_ode, summary.y_inf_ode = traj.x_inf_ode, traj.y_inf_ode
    with _stage("formula"):
        traj = traj.with_formula(*asymptotic_shifts(data, x0, y0, pi, st.model, st.profile))
        summary.x_inf_formula, summary.y_inf_formula = traj.x_inf_formula, traj.y_inf_formula
    with _stage("fits"):
        t0 = _left_crossing(st)
        for name, rate in (("x", traj.x_rate), ("y", traj.y_rate)):
            fit = _fit(traj.times, rate, t0)
            if fit is not None:
                setattr(summary, f"alpha_shift_{name}", fit.alpha)
    return data, traj


def error_term_table(st: Setup, lrun, rrun, traj, summary: RunSummary) -> dict:
    n = st.config.numerics
    with _stage("error_terms"):
        field_ = AnsatzField(st.profile, st.model, lrun, rrun, traj)
        horizon = float(traj.times[-1])
        times = np.arange(0.0, horizon + 1e-9, n.sample_dt)
        rows = []
        for t in times:
            src = compute_sources(field_, float(t), st.grid.xi)
            rows.append((*error_norms(src), src.mass_f2, src.mass_f4))
        arr = np.array(rows)
    with _stage("fits"):
        for j, name in ((0, "H1"), (1, "H2")):
            fit = _fit(times, arr[:, j], _left_crossing(st), horizon - 3.0)
            if fit is not None:
                setattr(summary, f"alpha_{name}", fit.alpha)
                setattr(summary, f"r2_{name}", fit.r2)
    return {"t": times, "H1_H2norm": arr[:, 0], "H2_H1norm": arr[:, 1],
            "mass_f2": arr[:, 2], "mass_f4": arr[:, 3]}


def full_line(st: Setup, data: InitialDataSpec, traj, summary: RunSummary) -> dict:
    n = st.config.numerics
    with _stage("cauchy"):
        s0 = assemble_initial_data(data, st.profile, st.grid)
        summary.X0_discrete, summary.Y0_discrete = s0.X, s0.Y
        run = evolve_cauchy(s0, st.model, st.profile, n.t_end, sample_dt=n.sample_dt, cfl=n.cfl)
    with _stage("diagnostics"):
        x_inf = traj.x_inf_formula if traj is not None else 0.0
        frames, rows = [], []
        for i in range(len(run)):
            state = run.state(i)
            fr = build_frame(state, st.model, st.profile)
            frames.append(fr)
            rows.append(diagnostics_row(state, st.model, st.profile, x_inf, frame=fr))
        f0 = frames[0]
        eps_per = periodic_size(st.left, st.right)
        e0 = eps_per + f0.norm("Phi", "H2") + f0.norm("Psi", "H2")
        ledger = energy_ledger(frames, e0)
        summary.eps_periodic, summary.E0 = eps_per, e0
        summary.c0 = ledger.c0
        summary.c0_half_horizon = ledger.upto(0.5 * run.t_end).c0
        metric = np.array([r.metric for r in rows])
        summary.metric_initial, summary.metric_final = metric[0], metric[-1]
        summary.metric_ratio = metric[-1] / metric[0] if metric[0] > 0 else NA
        summary.max_abs_mass_v = max(abs(r.mass_v) for r in rows)
        summary.max_abs_mass_u = max(abs(r.mass_u) for r in rows)
        summary.max_boundary_mismatch = max(r.boundary_mismatch for r in rows)
        summary.max_w_residual = max(r.w_residual for r in rows)
        summary.max_tail = max(max(abs(r.phi_tail), abs(r.psi_tail)) for r in rows)
    with _stage("fits"):
        fit = _fit(run.times, [r.linf_phi_psi for r in rows], _left_crossing(st))
        if fit is not None:
            summary.alpha_phipsi = fit.alpha
    diag = {name: np.array([getattr(r, name) for r in rows])
            for name in ("t", "linf_phi_psi", "h2_Phi_Psi", "metric", "phi_tail", "psi_tail",
                         "w_residual", "mass_v", "mass_u", "boundary_mismatch", "X", "Y")}
    diag["ledger_sup_h2"] = ledger.sup_h2
    diag["ledger_dissipation"] = ledger.dissipation
    diag["ledger_c0"] = ledger.ratio
    keep = [i for i in range(len(run)) if i % st.config.output.snapshot_every == 0 or i == len(run) - 1]
    cols = {k: [] for k in ("t", "xi", "v", "u", "v_ansatz", "u_ansatz")}
    for i in keep:
        state = run.state(i)
        vt, ut = discrete_ansatz(state, st.profile)
        cols["t"].append(np.full(state.v.size, state.time))
        cols["xi"].append(state.xi)
        cols["v"].append(state.v)
        cols["u"].append(state.u)
        cols["v_ansatz"].append(vt)
        cols["u_ansatz"].append(ut)
    snaps = {k: np.concatenate(v) for k, v in cols.items()}
    return {"diagnostics": diag, "snapshots": snaps}


def run_experiment(cfg: ExperimentConfig, until: str = "run") -> RunArtifacts:
    """Run the pipeline up to and including stage ``until``."""
    if until not in STAGES:
        raise ValueError(f"until must be one of {STAGES}")
    start = time.perf_counter()
    summary = RunSummary(run_id=cfg.run_id)
    art = RunArtifacts(cfg, summary)
    st = prepare(cfg)
    p = st.profile
    art.tables["profile"] = {"xi": p.xi, "v": p.v, "u": p.u, "g": p.g, "gprime": p.gp}
    if until != "profile":
        lrun, rrun = run_donors(st)
        art.tables["periodic_left"] = _periodic_table(lrun, st.model)
        art.tables["periodic_right"] = _periodic_table(rrun, st.model)
        _periodic_fits(summary, st, lrun, rrun)
        if until != "periodic":
            data, traj = shift_pipeline(st, lrun, rrun, summary)
            art.tables["shifts"] = {"t": traj.times, "X": traj.x_vals, "Y": traj.y_vals,
                                    "Xprime": traj.x_rate, "Yprime": traj.y_rate}
            if until == "run":
                art.tables["error_terms"] = error_term_table(st, lrun, rrun, traj, summary)
                art.tables.update(full_line(st, data, traj, summary))
    summary.wall_time_s = time.perf_counter() - start
    return art


# ---------------------------------------------------------------------------
# output


def write_table(path: Path, columns: dict) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")


def write_artifacts(art: RunArtifacts, out: Path) -> list:
    """Write ``<run-id>.<table>.csv``, the summary and the effective config; returns the paths."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rid = art.config.run_id
    paths = []
    for name, cols in art.tables.items():
        path = out / f"{rid}.{name}.csv"
        write_table(path, cols)
        paths.append(path)
    for suffix, text in ((".summary.txt", art.summary.text()),
                         (".config.yaml", art.config.dump()),
                         (".timing.txt", f"wall_time_s = {art.summary.wall_time_s!r}\n")):
        path = out / f"{rid}{suffix}"
        path.write_text(text)
        paths.append(path)
    return paths


def failed_summary(cfg: ExperimentConfig, exc: BaseException) -> RunSummary:
    stage = getattr(exc, "stage", "unknown")
    return RunSummary(run_id=cfg.run_id, status="failed", failed_stage=stage,
                      error=str(exc).replace("\n", " "))


def _sweep_worker(args):
    cfg, until = args
    try:
        return run_experiment(cfg, until)
    except ShockLabError as exc:
        return RunArtifacts(cfg, failed_summary(cfg, exc))


def sweep_configs(cfg: ExperimentConfig) -> list:
    sw = cfg.sweep
    out = []
    for i, value in enumerate(sw.values):
        c = cfg.with_value(sw.parameter, value)
        out.append(replace(c, run_id=f"{cfg.run_id}-{i:02d}"))
    return out


def run_sweep(cfg: ExperimentConfig, until: str = "run", jobs: Optional[int] = None) -> list:
    """One artifact per sweep value; failures are isolated and marked in the summaries."""
    configs = sweep_configs(cfg)
    jobs = cfg.sweep.jobs if jobs is None else jobs
    tasks = [(c, until) for c in configs]
    if jobs <= 1 or len(tasks) <= 1:
        return [_sweep_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_worker, tasks))


def sweep_table(cfg: ExperimentConfig, results: list) -> str:
    """Deterministic text table, one line per run, sweep value first."""
    keys = [f.name for f in fields(RunSummary) if f.name not in ("run_id", "wall_time_s")]
    lines = ["run_id," + cfg.sweep.parameter + "," + ",".join(keys)]
    for value, art in zip(cfg.sweep.values, results):
        rec = art.summary.record()
        lines.append(",".join([art.summary.run_id, repr(value)]
                              + [rec[k].replace(",", ";") for k in keys]))
    return "\n".join(lines) + "\n"
