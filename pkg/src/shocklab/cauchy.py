"""Full-line problem on a truncated domain in the frame of the shock.

The unknowns live on ``xi_i = i dx`` for ``i = i0 .. i0 + m - 1`` with
``xi = x - s t``.  Both periodic donors are evolved in lockstep on the same
spacing (their node ``k`` sits at ``k dx``), so ghost values outside the
domain are read straight from the donor arrays at every Runge-Kutta stage.

The ansatz shifts are co-evolved as part of the state: their rates come from
the discrete mass balance, which keeps ``sum (v - v~) dx`` and
``sum (u - u~) dx`` at their initial values up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import BlowUpError, InvalidParameterError, ShiftSolveError
from .gas import GasModel
from .periodic import CFL, PeriodicPerturbation, periodic_rhs
from .profile import ShockProfile
from .shifts import InitialDataSpec

TAIL_TOL = 1e-12


@dataclass(frozen=True)
class CauchyGrid:
    """Nodes ``(i0 + i) dx``, ``i < m``; ``dx`` divides both donor periods."""

    dx: float
    i0: int
    m: int
    n_left: int
    n_right: int

    @property
    def xi(self) -> np.ndarray:
        return (self.i0 + np.arange(self.m)) * self.dx

    @property
    def half_width(self) -> float:
        return -self.i0 * self.dx

    def left_index(self) -> np.ndarray:
        return (self.i0 + np.arange(self.m)) % self.n_left

    def right_index(self) -> np.ndarray:
        return (self.i0 + np.arange(self.m)) % self.n_right


def default_half_width(profile: ShockProfile, periods: tuple, n_periods: int = 10,
                       tail_tol: float = TAIL_TOL) -> float:
    """Distance where both profile tails fall below ``tail_tol``, plus ``n_periods`` periods."""
    lam, mu = profile.decay_rate_left, profile.decay_rate_right
    tail = max(math.log(1.0 / tail_tol) / lam, math.log(1.0 / tail_tol) / mu)
    return tail + n_periods * max(periods)


def make_grid(left: PeriodicPerturbation, right: PeriodicPerturbation, cells_per_period: int,
              half_width: float) -> CauchyGrid:
    """Symmetric grid whose spacing is ``left.period / cells_per_period``.

    Raises :class:`InvalidParameterError` if the right period is not an
    integer multiple of that spacing.
    """
    if cells_per_period < 4:
        raise InvalidParameterError("cells_per_period must be at least 4")
    if not half_width > 0:
        raise InvalidParameterError("half_width must be positive")
    dx = left.period / cells_per_period
    n_right = right.period / dx
    if abs(n_right - round(n_right)) > 1e-9 * n_right:
        raise InvalidParameterError(
            f"right period {right.period} is not a multiple of the spacing {dx:.6g}")
    half = int(math.ceil(half_width / dx))
    return CauchyGrid(dx=dx, i0=-half, m=2 * half + 1, n_left=cells_per_period,
                      n_right=int(round(n_right)))


@dataclass(frozen=True, eq=False)
class CauchyState:
    """Solution, lockstep donors and discrete shifts at one time."""

    grid: CauchyGrid
    v: np.ndarray
    u: np.ndarray
    left_v: np.ndarray
    left_u: np.ndarray
    right_v: np.ndarray
    right_u: np.ndarray
    X: float
    Y: float
    time: float = 0.0

    @property
    def xi(self) -> np.ndarray:
        return self.grid.xi

    def pack(self) -> np.ndarray:
        return np.concatenate([self.v, self.u, self.left_v, self.left_u, self.right_v,
                               self.right_u, [self.X, self.Y]])

    @classmethod
    def unpack(cls, grid: CauchyGrid, y: np.ndarray, time: float) -> "CauchyState":
        m, nl, nr = grid.m, grid.n_left, grid.n_right
        o = 2 * m
        o2 = o + 2 * nl
        return cls(grid=grid, v=y[:m].copy(), u=y[m:o].copy(), left_v=y[o:o + nl].copy(),
                   left_u=y[o + nl:o2].copy(), right_v=y[o2:o2 + nr].copy(),
                   right_u=y[o2 + nr:o2 + 2 * nr].copy(), X=float(y[-2]), Y=float(y[-1]),
                   time=time)

    def donors_on_grid(self) -> tuple:
        """``(v_l, u_l, v_r, u_r)`` at the interior nodes."""
        il, ir = self.grid.left_index(), self.grid.right_index()
        return self.left_v[il], self.left_u[il], self.right_v[ir], self.right_u[ir]

    def boundary_mismatch(self) -> float:
        """Largest difference between the end nodes and the donors there."""
        vl, ul, vr, ur = self.donors_on_grid()
        return float(max(abs(self.v[0] - vl[0]), abs(self.u[0] - ul[0]),
                         abs(self.v[-1] - vr[-1]), abs(self.u[-1] - ur[-1])))


def discrete_ansatz(state: CauchyState, profile: ShockProfile, X: Optional[float] = None,
                    Y: Optional[float] = None) -> tuple:
    """``(v~, u~)`` on the grid built from the lockstep donors and the state's shifts."""
    X = state.X if X is None else X
    Y = state.Y if Y is None else Y
    vl, ul, vr, ur = state.donors_on_grid()
    gx, qx, _ = profile.g_and_q(state.xi - X)
    gy, qy, _ = profile.g_and_q(state.xi - Y)
    return vl * qx + vr * gx, ul * qy + ur * gy


def _mass_shift(target: float, lo_vals, hi_vals, xi, dx, profile, guess: float, label: str) -> float:
    """Solve ``sum(lo q(xi - Z) + hi g(xi - Z)) dx = target`` for ``Z`` by Newton."""
    jump = hi_vals - lo_vals
    z = guess
    for _ in range(60):
        g, q, _ = profile.g_and_q(xi - z)
        terms = lo_vals * q + hi_vals * g
        r = float(np.sum(terms) * dx) - target
        # residual at the rounding level of the sum: further steps only cycle
        if abs(r) <= 8.0 * np.finfo(float).eps * float(np.sum(np.abs(terms)) * dx):
            return z
        d = -float(np.sum(jump * profile.hermite_gprime(xi - z)) * dx)
        if d == 0.0:
            raise ShiftSolveError(f"{label}: vanishing mass derivative")
        step = r / d
        z -= step
        if abs(step) < 1e-14 * (1.0 + abs(z)):
            return z
    raise ShiftSolveError(f"{label}: Newton did not converge")


def assemble_initial_data(data: InitialDataSpec, profile: ShockProfile, grid: CauchyGrid,
                          shifts: Optional[tuple] = None) -> CauchyState:
    """Sample the initial data and the donors; pick shifts that zero the discrete masses.

    With ``shifts`` given the masses are not balanced and those values are used.
    """
    sh = profile.shock
    xi = grid.xi
    v0, u0 = data.assemble(profile, xi)
    if not np.all(v0 > 0):
        raise InvalidParameterError(f"initial volume not positive (min {v0.min():.3g})")
    dx = grid.dx
    xl = dx * np.arange(grid.n_left)
    xr = dx * np.arange(grid.n_right)
    phil, psil = data.left.evaluate(xl)
    phir, psir = data.right.evaluate(xr)
    state = CauchyState(grid=grid, v=v0, u=u0, left_v=sh.v_left + phil, left_u=sh.u_left + psil,
                        right_v=sh.v_right + phir, right_u=sh.u_right + psir, X=0.0, Y=0.0)
    if shifts is not None:
        return replace(state, X=float(shifts[0]), Y=float(shifts[1]))
    vl, ul, vr, ur = state.donors_on_grid()
    X = _mass_shift(float(np.sum(v0) * dx), vl, vr, xi, dx, profile, 0.0, "X0")
    Y = _mass_shift(float(np.sum(u0) * dx), ul, ur, xi, dx, profile, 0.0, "Y0")
    return replace(state, X=X, Y=Y)


def cauchy_dt(state: CauchyState, model: GasModel, frame_speed: float, cfl: float = CFL) -> float:
    """Shared step for the solution and both donors."""
    v = np.concatenate([state.v, state.left_v, state.right_v])
    c_max = float(np.max(np.sqrt(-model.pressure_d1(v))))
    d_max = float(np.max(model.sigma_d1(v)))
    dx = state.grid.dx
    return cfl * min(dx / (c_max + abs(frame_speed)), dx * dx / (2.0 * d_max))


# ---------------------------------------------------------------------------
# numpy reference path
def cauchy_rhs(y: np.ndarray, grid: CauchyGrid, model: GasModel, profile: ShockProfile,
               frame_speed: float) -> np.ndarray:
    """Right-hand side of the packed state (any model)."""
    m, nl, nr, dx = grid.m, grid.n_left, grid.n_right, grid.dx
    st = CauchyState.unpack(grid, y, 0.0)
    c = frame_speed
    dlv, dlu = periodic_rhs(st.left_v, st.left_u, dx, model, c)
    drv, dru = periodic_rhs(st.right_v, st.right_u, dx, model, c)
    gl = (grid.i0 + np.array([-2, -1])) % nl
    gr = (grid.i0 + m + np.array([0, 1])) % nr
    ve = np.concatenate([st.left_v[gl], st.v, st.right_v[gr]])
    ue = np.concatenate([st.left_u[gl], st.u, st.right_u[gr]])
    pe = model.pressure(ve)
    a = np.arange(1, m + 2)
    fv = 0.5 * c * (3.0 * ve[a + 1] - ve[a + 2]) + 0.5 * (ue[a] + ue[a + 1])
    fu = (0.5 * c * (3.0 * ue[a + 1] - ue[a + 2]) - 0.5 * (pe[a] + pe[a + 1])
          + model.sigma_d1(0.5 * (ve[a] + ve[a + 1])) * (ue[a + 1] - ue[a]) / dx)
    dv = np.diff(fv) / dx
    du = np.diff(fu) / dx

    il, ir = grid.left_index(), grid.right_index()
    xi = grid.xi
    rates = []
    for z, lo, hi, dlo, dhi, flux in ((st.X, st.left_v, st.right_v, dlv, drv, fv),
                                      (st.Y, st.left_u, st.right_u, dlu, dru, fu)):
        g, q, _ = profile.g_and_q(xi - z)
        dg = profile.hermite_gprime(xi - z)
        num = float(np.sum(q * dlo[il] + g * dhi[ir])) * dx - (flux[-1] - flux[0])
        den = float(np.sum((hi[ir] - lo[il]) * dg)) * dx
        rates.append(num / den if den != 0.0 else 0.0)
    return np.concatenate([dv, du, dlv, dlu, drv, dru, rates])


def aligned_ratio(profile: ShockProfile, dx: float) -> int:
    """``dx / h`` when it is an integer (fast path in the kernel), else 0."""
    k = dx / profile.h
    return int(round(k)) if abs(k - round(k)) < 1e-9 * k else 0


def profile_for_grid(model: GasModel, shock, dx: float, h_max: float = 0.01, **kw) -> ShockProfile:
    """Profile whose table step divides ``dx`` and does not exceed ``h_max``."""
    from .profile import solve_profile

    k = max(1, int(math.ceil(dx / h_max - 1e-12)))
    return solve_profile(model, shock, h_prof=dx / k, **kw)


def _profile_tables(profile: ShockProfile, dx: float) -> tuple:
    return (np.ascontiguousarray(profile.g), np.ascontiguousarray(profile.q),
            np.ascontiguousarray(profile.gp), profile.h, float(profile.n_left),
            profile.reach_left, profile.reach_right, profile.decay_rate_left,
            profile.decay_rate_right, profile.center, aligned_ratio(profile, dx))


def _kernel_ok(model: GasModel) -> bool:
    return model.power_law is not None


def _check(y: np.ndarray, grid: CauchyGrid, t: float) -> None:
    if not np.all(np.isfinite(y)) or not np.all(y[:grid.m] > 0):
        raise BlowUpError(f"full-line solution blew up at t={t:.6g}")


def step_cauchy(state: CauchyState, model: GasModel, profile: ShockProfile, dt: float,
                use_kernel: bool = True) -> CauchyState:
    """One RK4 step of solution, donors and shifts in the frame moving with the shock."""
    grid = state.grid
    c = profile.shock.speed
    y = state.pack()
    if use_kernel and _kernel_ok(model):
        from . import kernels

        gamma, mu0, beta = model.power_law
        done, snaps = kernels.cauchy_evolve(y, 1, dt, 1, grid.m, grid.n_left, grid.n_right,
                                            grid.i0, grid.dx, gamma, mu0, beta, c,
                                            *_profile_tables(profile, grid.dx))
        if done != 1:
            raise BlowUpError(f"full-line solution blew up at t={state.time + dt:.6g}")
        return CauchyState.unpack(grid, y, state.time + dt)

    def f(z):
        return cauchy_rhs(z, grid, model, profile, c)

    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    yn = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    _check(yn, grid, state.time + dt)
    return CauchyState.unpack(grid, yn, state.time + dt)


@dataclass(frozen=True, eq=False)
class CauchyRun:
    """Snapshots of the packed state every ``sample_every`` steps."""

    grid: CauchyGrid
    dt: float
    sample_every: int
    snapshots: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.dt * self.sample_every * np.arange(self.snapshots.shape[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return self.snapshots.shape[0]

    def state(self, index: int = -1) -> CauchyState:
        return CauchyState.unpack(self.grid, self.snapshots[index], float(self.times[index]))

    @property
    def shifts(self) -> tuple:
        """``(X(t), Y(t))`` of the discrete ansatz at the snapshot times."""
        return self.snapshots[:, -2].copy(), self.snapshots[:, -1].copy()


def evolve_cauchy(state: CauchyState, model: GasModel, profile: ShockProfile, t_end: float,
                  dt: Optional[float] = None, sample_dt: float = 0.05, cfl: float = CFL,
                  use_kernel: bool = True) -> CauchyRun:
    """Fixed-step RK4 to ``t_end``; the step is rounded so samples fall on it exactly."""
    if not t_end > 0:
        raise InvalidParameterError("t_end must be positive")
    c = profile.shock.speed
    if dt is None:
        dt = cauchy_dt(state, model, c, cfl)
    sample_every = max(1, int(round(sample_dt / dt)))
    dt = min(dt, sample_dt / sample_every)
    nsteps = int(math.ceil(t_end / (dt * sample_every) - 1e-9)) * sample_every
    grid = state.grid
    y = state.pack()
    if use_kernel and _kernel_ok(model):
        from . import kernels

        gamma, mu0, beta = model.power_law
        done, snaps = kernels.cauchy_evolve(y, nsteps, dt, sample_every, grid.m, grid.n_left,
                                            grid.n_right, grid.i0, grid.dx, gamma, mu0, beta, c,
                                            *_profile_tables(profile, grid.dx))
        if done != nsteps:
            raise BlowUpError(f"full-line solution blew up at t={done * dt:.6g}")
    else:
        snaps = [y.copy()]
        st = state
        for step in range(1, nsteps + 1):
            st = step_cauchy(st, model, profile, dt, use_kernel=False)
            if step % sample_every == 0:
                snaps.append(st.pack())
        snaps = np.array(snaps)
    return CauchyRun(grid=grid, dt=dt, sample_every=sample_every, snapshots=snaps)
