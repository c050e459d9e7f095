"""Space-periodic solutions of the viscous system and their decay.

Each far field of the shock problem is a periodic solution started from a
zero-mean trigonometric perturbation of a constant state.  This module builds
those data, evolves them with a conservative method-of-lines scheme, and
measures how fast they relax back to the constant state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import BlowUpError, InvalidParameterError, NoConvergenceError
from .gas import GasModel

CFL = 0.4
CONVERGED_FLOOR = 1e-14
NOISE_FLOOR_REL = 1e-9


@dataclass(frozen=True)
class Mode:
    """One term ``amp * sin(2 pi k x / period + phase)``."""

    k: int
    amp_v: float = 0.0
    amp_u: float = 0.0
    phase_v: float = 0.0
    phase_u: float = 0.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidParameterError(f"mode wavenumber must be a positive integer, got {self.k}")


@dataclass(frozen=True)
class PeriodicPerturbation:
    """Zero-mean trigonometric perturbation ``(phi0, psi0)`` of one far field."""

    period: float
    modes: tuple = ()

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise InvalidParameterError(f"period must be positive, got {self.period}")
        object.__setattr__(self, "modes", tuple(self.modes))

    @property
    def kmax(self) -> int:
        return max((m.k for m in self.modes), default=0)

    def wavenumber(self, k) -> np.ndarray:
        return 2.0 * np.pi * np.asarray(k, dtype=float) / self.period

    def scaled(self, factor: float) -> "PeriodicPerturbation":
        return replace(self, modes=tuple(replace(m, amp_v=m.amp_v * factor, amp_u=m.amp_u * factor)
                                         for m in self.modes))

    def coefficients(self, which: str) -> dict:
        """Complex ``c_k`` with ``f = sum_k Im(c_k exp(i kappa_k x))``."""
        out: dict = {}
        for m in self.modes:
            a, th = (m.amp_v, m.phase_v) if which == "v" else (m.amp_u, m.phase_u)
            out[m.k] = out.get(m.k, 0.0) + a * np.exp(1j * th)
        return out

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        phi = np.zeros_like(x)
        psi = np.zeros_like(x)
        for m in self.modes:
            arg = self.wavenumber(m.k) * x
            if m.amp_v:
                phi = phi + m.amp_v * np.sin(arg + m.phase_v)
            if m.amp_u:
                psi = psi + m.amp_u * np.sin(arg + m.phase_u)
        return phi, psi

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        dphi = np.zeros_like(x)
        dpsi = np.zeros_like(x)
        for m in self.modes:
            kap = self.wavenumber(m.k)
            shift = 0.5 * np.pi * order
            dphi = dphi + m.amp_v * kap ** order * np.sin(kap * x + m.phase_v + shift)
            dpsi = dpsi + m.amp_u * kap ** order * np.sin(kap * x + m.phase_u + shift)
        return dphi, dpsi

    def sup_norm_v(self) -> float:
        """Bound ``sum |amp_v|`` (exact for a single mode)."""
        return float(sum(abs(c) for c in self.coefficients("v").values()))

    def sobolev_norm(self, m: int) -> float:
        """Closed-form ``||(phi0, psi0)||_{H^m(0, period)}``."""
        total = 0.0
        for which in ("v", "u"):
            for k, c in self.coefficients(which).items():
                kap = float(self.wavenumber(k))
                total += abs(c) ** 2 * 0.5 * self.period * sum(kap ** (2 * j) for j in range(m + 1))
        return math.sqrt(total)

    def double_integral(self, which: str) -> float:
        """``(1/period) int_0^period int_0^x f(y) dy dx`` in closed form."""
        return float(sum((c.real / float(self.wavenumber(k)))
                         for k, c in self.coefficients(which).items()))


@dataclass(frozen=True, eq=False)
class PeriodicState:
    """One period sampled at ``n`` uniform nodes ``x_j = j * period / n``."""

    v: np.ndarray
    u: np.ndarray
    period: float
    time: float = 0.0
    mean_v: float = field(default=float("nan"))
    mean_u: float = field(default=float("nan"))

    @property
    def n(self) -> int:
        return self.v.size

    @property
    def dx(self) -> float:
        return self.period / self.v.size

    @property
    def grid(self) -> np.ndarray:
        return self.dx * np.arange(self.v.size)

    @property
    def averages(self) -> tuple:
        return float(np.mean(self.v)), float(np.mean(self.u))


def init_periodic(mean: tuple, pert: PeriodicPerturbation, n_cells: int) -> PeriodicState:
    vbar, ubar = float(mean[0]), float(mean[1])
    if n_cells < max(4 * pert.kmax, 4):
        raise InvalidParameterError(
            f"n_cells={n_cells} under-resolves wavenumber {pert.kmax} (need >= {4 * pert.kmax})")
    x = pert.period / n_cells * np.arange(n_cells)
    phi, psi = pert.evaluate(x)
    v = vbar + phi
    if not np.all(v > 0):
        raise InvalidParameterError(f"perturbed volume not positive (min {v.min():.3g})")
    return PeriodicState(v=v, u=ubar + psi, period=pert.period, mean_v=vbar, mean_u=ubar)


def periodic_rhs(v, u, dx: float, model: GasModel, frame_speed: float = 0.0):
    """Numpy reference right-hand side of the conservative scheme."""
    vp, vp2 = np.roll(v, -1), np.roll(v, -2)
    up, up2 = np.roll(u, -1), np.roll(u, -2)
    p = model.pressure(v)
    c = frame_speed
    fv = 0.5 * c * (3.0 * vp - vp2) + 0.5 * (u + up)
    fu = (0.5 * c * (3.0 * up - up2) - 0.5 * (p + np.roll(p, -1))
          + model.sigma_d1(0.5 * (v + vp)) * (up - u) / dx)
    return (fv - np.roll(fv, 1)) / dx, (fu - np.roll(fu, 1)) / dx


def stable_dt(model: GasModel, v, dx: float, frame_speed: float = 0.0, cfl: float = CFL) -> float:
    """``cfl * min(dx / (c_max + |frame|), dx^2 / (2 max sigma'))``."""
    c_max = float(np.max(np.sqrt(-model.pressure_d1(v))))
    d_max = float(np.max(model.sigma_d1(v)))
    return cfl * min(dx / (c_max + abs(frame_speed)), dx * dx / (2.0 * d_max))


def _rk4(v, u, dx, dt, model, frame_speed):
    k1 = periodic_rhs(v, u, dx, model, frame_speed)
    k2 = periodic_rhs(v + 0.5 * dt * k1[0], u + 0.5 * dt * k1[1], dx, model, frame_speed)
    k3 = periodic_rhs(v + 0.5 * dt * k2[0], u + 0.5 * dt * k2[1], dx, model, frame_speed)
    k4 = periodic_rhs(v + dt * k3[0], u + dt * k3[1], dx, model, frame_speed)
    vn = v + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    un = u + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return vn, un


def step_periodic(state: PeriodicState, model: GasModel, dt: float,
                  frame_speed: float = 0.0) -> PeriodicState:
    """One RK4 step of the central conservative scheme (numpy path)."""
    vn, un = _rk4(state.v, state.u, state.dx, dt, model, frame_speed)
    if not (np.all(np.isfinite(vn)) and np.all(np.isfinite(un)) and np.all(vn > 0)):
        raise BlowUpError(f"periodic solution blew up at t={state.time + dt:.6g}")
    return replace(state, v=vn, u=un, time=state.time + dt)


def energy_functional(model: GasModel, v, u, vbar: float, ubar: float, dx: float) -> float:
    """Discrete ``sum [psi^2/2 - int_vbar^v p + p(vbar) (v - vbar)] dx``."""
    pot = -(model.pressure_integral(v) - model.pressure_integral(vbar)) + model.pressure(vbar) * (v - vbar)
    return float(np.sum(0.5 * (u - ubar) ** 2 + pot) * dx)


@dataclass(frozen=True, eq=False)
class PeriodicRun:
    """Evolution record: snapshots every ``sample_every`` steps plus per-step scalars."""

    period: float
    mean_v: float
    mean_u: float
    dt: float
    sample_every: int
    frame_speed: float
    snap_v: np.ndarray
    snap_u: np.ndarray
    energy: np.ndarray
    pressure_excess: np.ndarray

    @property
    def n(self) -> int:
        return self.snap_v.shape[1]

    @property
    def dx(self) -> float:
        return self.period / self.n

    @property
    def times(self) -> np.ndarray:
        return self.dt * self.sample_every * np.arange(self.snap_v.shape[0])

    @property
    def step_times(self) -> np.ndarray:
        return self.dt * np.arange(self.energy.size)

    @property
    def t_end(self) -> float:
        return self.dt * (self.energy.size - 1)

    def state(self, index: int = -1) -> PeriodicState:
        return PeriodicState(v=self.snap_v[index].copy(), u=self.snap_u[index].copy(),
                             period=self.period, time=float(self.times[index]),
                             mean_v=self.mean_v, mean_u=self.mean_u)

    def history(self) -> list:
        return [self.state(i) for i in range(self.snap_v.shape[0])]

    def fourier(self):
        """``(kappa, vhat, uhat)`` with ``f(x) = sum_k Re(fhat_k exp(i kappa_k x))``.

        Nodes sit at ``x_j = j dx`` in the frame the run was evolved in.
        """
        n = self.n
        vh = np.fft.rfft(self.snap_v, axis=1) * (2.0 / n)
        uh = np.fft.rfft(self.snap_u, axis=1) * (2.0 / n)
        vh[:, 0] *= 0.5
        uh[:, 0] *= 0.5
        if n % 2 == 0:
            vh[:, -1] *= 0.5
            uh[:, -1] *= 0.5
        kappa = 2.0 * np.pi * np.arange(vh.shape[1]) / self.period
        return kappa, vh, uh


def evolve_periodic(state: PeriodicState, model: GasModel, t_end: float, dt: Optional[float] = None,
                    sample_dt: float = 0.01, frame_speed: float = 0.0, cfl: float = CFL,
                    use_kernel: bool = True) -> PeriodicRun:
    """Evolve to ``t_end`` with a fixed step; see :class:`PeriodicRun` for what is kept.

    ``dt`` defaults to :func:`stable_dt` of the initial data, shrunk so an
    integer number of steps lands on ``t_end`` and on every sample time.
    """
    if dt is None:
        dt = stable_dt(model, state.v, state.dx, frame_speed, cfl)
    sample_every = max(1, int(round(sample_dt / dt)))
    dt = min(dt, sample_dt / sample_every)
    nsteps = int(math.ceil(t_end / (dt * sample_every) - 1e-9)) * sample_every
    if nsteps == 0:
        nsteps = sample_every
    dt = t_end / nsteps if t_end > 0 else dt
    vbar, ubar = state.mean_v, state.mean_u
    if not math.isfinite(vbar):
        vbar, ubar = state.averages
    v = state.v.astype(float).copy()
    u = state.u.astype(float).copy()
    if use_kernel and model.power_law is not None:
        gamma, mu0, beta = model.power_law
        done, sv, su, energy, pdev = kernels.periodic_evolve(
            v, u, state.dx, dt, nsteps, gamma, mu0, beta, frame_speed, vbar, ubar, sample_every)
        if done != nsteps:
            raise BlowUpError(f"periodic solution blew up at t={done * dt:.6g}")
    else:
        nsnap = nsteps // sample_every + 1
        sv = np.empty((nsnap, v.size))
        su = np.empty((nsnap, v.size))
        energy = np.empty(nsteps + 1)
        pdev = np.empty(nsteps + 1)
        pbar = float(model.pressure(vbar))
        sv[0], su[0] = v, u
        for step in range(nsteps + 1):
            if step > 0:
                v, u = _rk4(v, u, state.dx, dt, model, frame_speed)
                if not (np.all(np.isfinite(v)) and np.all(np.isfinite(u)) and np.all(v > 0)):
                    raise BlowUpError(f"periodic solution blew up at t={step * dt:.6g}")
                if step % sample_every == 0:
                    sv[step // sample_every], su[step // sample_every] = v, u
            energy[step] = energy_functional(model, v, u, vbar, ubar, state.dx)
            pdev[step] = float(np.mean(model.pressure(v))) - pbar
    return PeriodicRun(period=state.period, mean_v=vbar, mean_u=ubar, dt=dt,
                       sample_every=sample_every, frame_speed=frame_speed, snap_v=sv,
                       snap_u=su, energy=energy, pressure_excess=pdev)


def _periodic_d1(f, dx):
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2.0 * dx)


def deviation_norms(run: PeriodicRun, norm: str = "L2") -> np.ndarray:
    """Norm of ``(v - vbar, u - ubar)`` over one period at every snapshot."""
    phi = run.snap_v - run.mean_v
    psi = run.snap_u - run.mean_u
    dx = run.dx
    norm = norm.upper()
    if norm == "LINF":
        return np.maximum(np.max(np.abs(phi), axis=1), np.max(np.abs(psi), axis=1))
    order = {"L2": 0, "H1": 1, "H2": 2}.get(norm)
    if order is None:
        raise InvalidParameterError(f"unknown norm {norm!r}")
    total = np.zeros(phi.shape[0])
    fp, fs = phi, psi
    for j in range(order + 1):
        if j:
            fp, fs = _periodic_d1(fp, dx), _periodic_d1(fs, dx)
        total += np.sum(fp ** 2 + fs ** 2, axis=1) * dx
    return np.sqrt(total)


@dataclass(frozen=True)
class DecayFit:
    alpha: float
    prefactor: float
    r2: float
    converged: bool = False
    n_points: int = 0


def fit_exponential(t, y, floor: float = 1e-14) -> DecayFit:
    """Least-squares fit ``log y = log C - alpha t`` over points with ``y > floor``."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if y.size == 0 or np.max(y) < floor:
        return DecayFit(float("nan"), 0.0, float("nan"), converged=True)
    mask = y > floor
    if mask.sum() < 3:
        return DecayFit(float("nan"), float(np.max(y)), float("nan"), converged=True,
                        n_points=int(mask.sum()))
    tt, ly = t[mask], np.log(y[mask])
    slope, icpt = np.polyfit(tt, ly, 1)
    resid = ly - (slope * tt + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(alpha=float(-slope), prefactor=float(np.exp(icpt)), r2=r2, n_points=int(tt.size))


def transient_time(period: float, c_max: float) -> float:
    return 2.0 * period / c_max


def measure_decay(history, norm: str = "L2", window: Optional[Sequence[float]] = None,
                  model: Optional[GasModel] = None) -> DecayFit:
    """Fit exponential decay of the deviation norm over ``window``.

    ``history`` is a :class:`PeriodicRun` or a list of :class:`PeriodicState`.
    Without a window the fit starts after two acoustic crossings of a period.
    """
    if isinstance(history, PeriodicRun):
        run = history
    else:
        states = list(history)
        if len(states) < 2:
            raise InvalidParameterError("need at least two states")
        s0 = states[0]
        dt_s = states[1].time - states[0].time
        run = PeriodicRun(period=s0.period, mean_v=s0.mean_v, mean_u=s0.mean_u, dt=dt_s,
                          sample_every=1, frame_speed=0.0,
                          snap_v=np.array([s.v for s in states]),
                          snap_u=np.array([s.u for s in states]),
                          energy=np.zeros(len(states)), pressure_excess=np.zeros(len(states)))
    t = run.times
    y = deviation_norms(run, norm)
    if window is None:
        c_max = math.sqrt(-float(model.pressure_d1(run.mean_v))) if model is not None else 1.0
        window = (transient_time(run.period, c_max), t[-1])
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 10:
        raise InvalidParameterError(f"window {tuple(window)} holds {int(sel.sum())} samples (< 10)")
    if np.max(y[sel]) < CONVERGED_FLOOR:
        return DecayFit(float("nan"), 0.0, float("nan"), converged=True)
    # stop at the rounding floor set by the drift of the discrete means
    floor = max(CONVERGED_FLOOR, NOISE_FLOOR_REL * float(np.max(y)))
    return fit_exponential(t[sel], y[sel], floor=floor)


def time_averaged_pressure_integral(run: PeriodicRun, model: Optional[GasModel] = None,
                                    tol: float = 1e-12, t_max: Optional[float] = None) -> float:
    """``int_0^inf <p(v) - p(vbar)> dt`` with ``<.>`` the period average.

    Trapezoid on the per-step record up to the first time the integrand drops
    below ``tol/e``, then an exponential tail ``f(t_c)/alpha`` with ``alpha``
    fitted on the last decade before ``t_c``.  The integrand is nonnegative
    (Jensen), so the fit is well posed.
    """
    f = run.pressure_excess
    t = run.step_times
    if t_max is not None:
        keep = t <= t_max + 0.5 * run.dt
        f, t = f[keep], t[keep]
    if np.max(np.abs(f)) == 0.0:
        return 0.0
    below = np.nonzero(np.abs(f) < tol / math.e)[0]
    below = below[t[below] > 0] if below.size else below
    if below.size == 0:
        raise NoConvergenceError(
            f"pressure excess still {abs(f[-1]):.3e} at t={t[-1]:.3g} (> {tol / math.e:.3e})")
    ic = int(below[0])
    body = float(np.trapezoid(f[: ic + 1], t[: ic + 1]))
    fc = f[ic]
    lo = np.nonzero(np.abs(f[:ic]) > 10.0 * abs(fc))[0]
    start = int(lo[-1]) if lo.size else 0
    if ic - start < 3 or fc <= 0:
        return body
    fit = fit_exponential(t[start:ic + 1], f[start:ic + 1], floor=0.0)
    if not (fit.alpha > 0):
        raise NoConvergenceError("pressure excess is not decaying near the cut-off")
    return body + float(fc) / fit.alpha


def donor_average(model_fn, mean: float, pert: PeriodicPerturbation, which: str = "v",
                  n: int = 4096) -> float:
    """Period average of ``model_fn(mean + f0(x))`` for the initial perturbation."""
    x = pert.period / n * np.arange(n)
    phi, psi = pert.evaluate(x)
    return float(np.mean(model_fn(mean + (phi if which == "v" else psi))))
