"""Initial shifts, the shift ODEs, their limits and the zero-mass condition.

Conventions
-----------
* ``g_c(x) = g(x - c)`` with ``c = s t + X`` for the volume shift and
  ``c = s t + Y`` for the velocity shift.
* Periodic data are handled through Fourier coefficients.  For a smooth
  periodic ``f = sum_k Re(fhat_k exp(i kappa_k x))``

      int f(x) g'(x - c) dx = sum_k Re(fhat_k exp(i kappa_k c) conj(G(kappa_k))),

  where ``G`` is the transform returned by
  :meth:`ShockProfile.gprime_transform`.
* Initial data: ``v0 = v^S + phi_l (1 - g) + phi_r g + a eta`` and likewise
  for ``u0`` with ``psi`` and ``b``; ``eta`` is a unit-mass polynomial bump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import (
    AmplitudeTooLargeError,
    DegenerateDenominatorError,
    InvalidParameterError,
    ShiftSolveError,
)
from .gas import GasModel
from .periodic import PeriodicPerturbation, PeriodicRun, PeriodicState, donor_average, fit_exponential
from .profile import ShockProfile, eval_profile

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
NEWTON_TOL = 1e-10
NEWTON_MAXIT = 50
DEGENERATE_FRACTION = 0.1
MODE_CUTOFF = 1e-17
RATE_NOISE = 1e-14


def bump(x, radius: float = 1.0):
    """``315/(256 r) (1 - x^2/r^2)^4`` on ``|x| < r``; unit mass, C^3."""
    y = np.asarray(x, dtype=float) / radius
    return np.where(np.abs(y) < 1.0, 315.0 / (256.0 * radius) * (1.0 - y * y) ** 4, 0.0)


@dataclass(frozen=True)
class InitialDataSpec:
    """Periodic far fields plus localized masses ``a`` (volume) and ``b`` (velocity)."""

    left: PeriodicPerturbation
    right: PeriodicPerturbation
    a: float = 0.0
    b: float = 0.0
    radius: float = 1.0

    def assemble(self, profile: ShockProfile, x):
        """``(v0, u0)`` at the points ``x``."""
        v_s, u_s, g, _ = eval_profile(profile, x)
        phil, psil = self.left.evaluate(x)
        phir, psir = self.right.evaluate(x)
        eta = bump(x, self.radius)
        v0 = v_s + phil * (1.0 - g) + phir * g + self.a * eta
        u0 = u_s + psil * (1.0 - g) + psir * g + self.b * eta
        return v0, u0

    def scaled(self, factor: float) -> "InitialDataSpec":
        return replace(self, left=self.left.scaled(factor), right=self.right.scaled(factor))


def _im_coeffs(pert: PeriodicPerturbation, which: str):
    """Arrays ``(kappa, c)`` with ``f = sum Im(c exp(i kappa x))``."""
    co = pert.coefficients(which)
    ks = sorted(co)
    return pert.wavenumber(ks), np.array([co[k] for k in ks], dtype=complex)


def _panel_rule(a: float, b: float, knots_origin: float, h: float):
    """Gauss-Legendre nodes on ``[a, b]`` split at the knots ``knots_origin + j h``."""
    if b <= a:
        return np.empty(0), np.empty(0)
    j0 = math.floor((a - knots_origin) / h) + 1
    j1 = math.ceil((b - knots_origin) / h) - 1
    inner = knots_origin + h * np.arange(j0, j1 + 1)
    inner = inner[(inner > a) & (inner < b)]
    br = np.concatenate([[a], inner, [b]])
    lo, hi = br[:-1], br[1:]
    half = 0.5 * (hi - lo)
    nodes = (lo[:, None] + half[:, None] * (1.0 + _GL_NODES[None, :])).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def half_line_integrals(profile: ShockProfile, pert: PeriodicPerturbation, which: str, shift: float):
    """``(int_{-inf}^0 f g(x - shift) dx, int_0^inf f (1 - g(x - shift)) dx)``.

    Panels follow the table knots; the exponential tails beyond the table are
    integrated in closed form mode by mode.
    """
    kappa, c = _im_coeffs(pert, which)
    if c.size == 0:
        return 0.0, 0.0
    h = profile.h
    a = shift + profile.xi[0]
    b = shift + profile.xi[-1]
    lam, mu = profile.decay_rate_left, profile.decay_rate_right
    gL, qR = profile.g[0], profile.q[-1]

    def f_at(x):
        return (np.sin(np.outer(x, kappa)) * c.real + np.cos(np.outer(x, kappa)) * c.imag).sum(axis=1)

    nodes, w = _panel_rule(min(a, 0.0), 0.0, a, h)
    left = float(w @ (f_at(nodes) * profile.g_and_q(nodes - shift)[0])) if nodes.size else 0.0
    bl = min(a, 0.0)
    left += float(gL * math.exp(lam * (bl - a)) * np.imag(c * np.exp(1j * kappa * bl) / (lam + 1j * kappa)).sum())

    nodes, w = _panel_rule(0.0, max(b, 0.0), a, h)
    right = float(w @ (f_at(nodes) * profile.g_and_q(nodes - shift)[1])) if nodes.size else 0.0
    br = max(b, 0.0)
    right += float(qR * math.exp(-mu * (br - b)) * np.imag(c * np.exp(1j * kappa * br) / (mu - 1j * kappa)).sum())
    return left, right


def shifted_gprime_moment(profile: ShockProfile, pert: PeriodicPerturbation, which: str,
                          shift: float) -> float:
    """``int f(x) g'(x - shift) dx`` through the transform of ``g'``."""
    kappa, c = _im_coeffs(pert, which)
    if c.size == 0:
        return 0.0
    G = np.conj(profile.gprime_transform(kappa))
    return float(np.imag(c * np.exp(1j * kappa * shift) * G).sum())


def _jumps(profile: ShockProfile):
    sh = profile.shock
    return sh.dv, sh.du


def localized_mass(data: InitialDataSpec, profile: ShockProfile, which: str) -> float:
    """``int_{-inf}^0 (w0 - w^S - f_l) + int_0^inf (w0 - w^S - f_r)`` for ``w = v`` or ``u``."""
    ll, lr = half_line_integrals(profile, data.left, which, 0.0)
    rl, rr = half_line_integrals(profile, data.right, which, 0.0)
    mass = data.a if which == "v" else data.b
    # on x<0: (f_r - f_l) g ; on x>0: (f_l - f_r)(1 - g)
    return mass + (rl - ll) + (lr - rr)


def shift_functional(data: InitialDataSpec, profile: ShockProfile, which: str, shift: float) -> float:
    """``A_1(X)`` (``which='v'``) or ``A_2(Y)`` (``which='u'``)."""
    dv, du = _jumps(profile)
    jump = dv if which == "v" else du
    ll, lr = half_line_integrals(profile, data.left, which, shift)
    rl, rr = half_line_integrals(profile, data.right, which, shift)
    return shift + ((ll - rl) - (lr - rr)) / jump


def shift_functional_derivative(data: InitialDataSpec, profile: ShockProfile, which: str,
                                shift: float) -> float:
    """``1 - (1/jump) int (f_l - f_r) g'(x - shift) dx``."""
    dv, du = _jumps(profile)
    jump = dv if which == "v" else du
    m = (shifted_gprime_moment(profile, data.left, which, shift)
         - shifted_gprime_moment(profile, data.right, which, shift))
    return 1.0 - m / jump


def _newton(fun, dfun, x0: float, label: str) -> float:
    x = x0
    for _ in range(NEWTON_MAXIT):
        r = fun(x)
        if abs(r) < NEWTON_TOL:
            return x
        x = x - r / dfun(x)
        if not math.isfinite(x):
            break
    raise ShiftSolveError(f"Newton for {label} did not converge in {NEWTON_MAXIT} iterations")


def check_amplitudes(data: InitialDataSpec, profile: ShockProfile) -> None:
    dv, du = _jumps(profile)
    rv = max(data.left.sup_norm_v(), data.right.sup_norm_v()) / abs(dv)
    ru = max(_sup_u(data.left), _sup_u(data.right)) / abs(du)
    if rv >= 0.5 or ru >= 0.5:
        raise AmplitudeTooLargeError(
            f"periodic amplitudes too large for the shift equations (ratios {rv:.3g}, {ru:.3g} >= 1/2)")


def _sup_u(pert: PeriodicPerturbation) -> float:
    return float(sum(abs(c) for c in pert.coefficients("u").values()))


def solve_initial_shifts(data: InitialDataSpec, profile: ShockProfile) -> tuple:
    """Solve the two decoupled mass equations for ``(X0, Y0)`` by Newton."""
    check_amplitudes(data, profile)
    dv, du = _jumps(profile)
    out = []
    for which, jump in (("v", dv), ("u", du)):
        rhs = localized_mass(data, profile, which) / jump
        x = _newton(lambda z: shift_functional(data, profile, which, z) + rhs,
                    lambda z: shift_functional_derivative(data, profile, which, z),
                    -rhs, f"{'X0' if which == 'v' else 'Y0'}")
        out.append(x)
    return tuple(out)


@dataclass(frozen=True)
class PressureIntegrals:
    """``int_0^inf <p(v_donor) - p(vbar)> dt`` for the left and right donors."""

    left: float = 0.0
    right: float = 0.0


def formula_constants(data: InitialDataSpec, profile: ShockProfile, model: GasModel,
                      pressure_integrals: PressureIntegrals) -> tuple:
    """``(C1, C2)`` of the asymptotic shift formulas."""
    sh = profile.shock
    dv, du = _jumps(profile)
    c1 = (data.left.double_integral("v") - data.right.double_integral("v")) / dv
    s_l = donor_average(model.sigma, sh.v_left, data.left, "v")
    s_r = donor_average(model.sigma, sh.v_right, data.right, "v")
    c2 = (data.left.double_integral("u") - pressure_integrals.left
          - data.right.double_integral("u") + pressure_integrals.right
          + float(model.sigma(sh.v_left)) - float(model.sigma(sh.v_right)) - s_l + s_r) / du
    return c1, c2


def asymptotic_shifts(data: InitialDataSpec, X0: float, Y0: float,
                      pressure_integrals: PressureIntegrals, model: GasModel,
                      profile: ShockProfile) -> tuple:
    """``(A_1(X0) + C1, A_2(Y0) + C2)``."""
    c1, c2 = formula_constants(data, profile, model, pressure_integrals)
    return (shift_functional(data, profile, "v", X0) + c1,
            shift_functional(data, profile, "u", Y0) + c2)


def zero_mass_residual(data: InitialDataSpec, pressure_integrals: PressureIntegrals,
                       model: GasModel, profile: ShockProfile) -> float:
    """Left side minus right side of the zero-mass type condition.

    Equals ``(u_r - u_l) (X_inf - Y_inf)``.
    """
    sh = profile.shock
    s = sh.speed
    iv = localized_mass(data, profile, "v")
    iu = localized_mass(data, profile, "u")
    lhs = s * (iv - data.left.double_integral("v") + data.right.double_integral("v"))
    s_l = donor_average(model.sigma, sh.v_left, data.left, "v")
    s_r = donor_average(model.sigma, sh.v_right, data.right, "v")
    rhs = (-iu + data.left.double_integral("u") - pressure_integrals.left
           - data.right.double_integral("u") + pressure_integrals.right
           + float(model.sigma(sh.v_left)) - float(model.sigma(sh.v_right)) - s_l + s_r)
    return lhs - rhs


def close_zero_mass(data: InitialDataSpec, pressure_integrals: PressureIntegrals, model: GasModel,
                    profile: ShockProfile, free: str = "b") -> InitialDataSpec:
    """Choose the velocity bump mass ``b`` so the zero-mass residual vanishes.

    The residual is affine in ``b`` with unit slope, so one correction is exact
    up to rounding; a second pass mops that up.
    """
    if free != "b":
        raise InvalidParameterError("only the velocity bump mass b can be freed")
    if abs(profile.shock.du) < 1e-14:
        raise InvalidParameterError("degenerate velocity jump")
    out = data
    for _ in range(3):
        r = zero_mass_residual(out, pressure_integrals, model, profile)
        if abs(r) < 1e-13:
            break
        out = replace(out, b=out.b - r)
    return out


# ---------------------------------------------------------------------------
# shift ODE


@dataclass(frozen=True, eq=False)
class DonorSpectra:
    """Time-interpolated Fourier coefficients of the fields a shift ODE needs.

    ``fields`` maps a name (``v``, ``u``, ``p``, ``visc`` for ``sigma'(v) u_x``)
    to complex coefficients of shape ``(n_times, n_modes)``.
    """

    times: np.ndarray
    kappa: np.ndarray
    fields: dict
    frame_speed: float
    splines: dict = field(default_factory=dict)

    def at(self, t: float) -> dict:
        if self.times.size == 1:
            return {k: v[0] for k, v in self.fields.items()}
        m = self.kappa.size
        out = {}
        for k, sp in self.splines.items():
            val = sp(t)
            out[k] = val[:m] + 1j * val[m:]
        return out


def _spectra_from_arrays(times, v, u, period: float, model: GasModel, frame_speed: float,
                         profile: ShockProfile) -> DonorSpectra:
    n = v.shape[1]
    kappa_all = 2.0 * np.pi * np.arange(n // 2 + 1) / period
    G = profile.gprime_transform(kappa_all)
    keep = np.abs(G) > MODE_CUTOFF
    keep[0] = True
    if n % 2 == 0:
        keep[-1] = False

    def coeffs(f):
        c = np.fft.rfft(f, axis=1) * (2.0 / n)
        c[:, 0] *= 0.5
        return c[:, keep]

    uh_full = np.fft.rfft(u, axis=1)
    ux = np.fft.irfft(1j * kappa_all * uh_full, n=n, axis=1)
    fields = {
        "v": coeffs(v),
        "u": coeffs(u),
        "p": coeffs(model.pressure(v)),
        "visc": coeffs(model.sigma_d1(v) * ux),
    }
    spectra = DonorSpectra(times=np.asarray(times, dtype=float), kappa=kappa_all[keep],
                           fields=fields, frame_speed=frame_speed)
    if spectra.times.size > 1:
        for k, arr in fields.items():
            spectra.splines[k] = CubicSpline(spectra.times, np.concatenate([arr.real, arr.imag], axis=1))
    return spectra


def donor_spectra(run: PeriodicRun, model: GasModel, profile: ShockProfile) -> DonorSpectra:
    return _spectra_from_arrays(run.times, run.snap_v, run.snap_u, run.period, model,
                                run.frame_speed, profile)


def _moment(coef, kappa, Gc, shift):
    return float(np.real(coef * np.exp(1j * kappa * shift) * Gc).sum())


def _rates(t, X, Y, cl, cr, spl: DonorSpectra, spr: DonorSpectra, Gl, Gr, shock):
    s = shock.speed
    cxl = (s - spl.frame_speed) * t + X
    cxr = (s - spr.frame_speed) * t + X
    cyl = (s - spl.frame_speed) * t + Y
    cyr = (s - spr.frame_speed) * t + Y
    den_x = _moment(cr["v"], spr.kappa, Gr, cxr) - _moment(cl["v"], spl.kappa, Gl, cxl)
    num_x = _moment(cr["u"], spr.kappa, Gr, cxr) - _moment(cl["u"], spl.kappa, Gl, cxl)
    den_y = _moment(cr["u"], spr.kappa, Gr, cyr) - _moment(cl["u"], spl.kappa, Gl, cyl)
    num_y = (_moment(cr["p"] - cr["visc"], spr.kappa, Gr, cyr)
             - _moment(cl["p"] - cl["visc"], spl.kappa, Gl, cyl))
    if abs(den_x) < DEGENERATE_FRACTION * abs(shock.dv) or abs(den_y) < DEGENERATE_FRACTION * abs(shock.du):
        raise DegenerateDenominatorError(
            f"shift ODE denominator collapsed at t={t:.4g} ({den_x:.3g}, {den_y:.3g})")
    return -s - num_x / den_x, -s + num_y / den_y


def shift_ode_rhs(t: float, X: float, Y: float, left: PeriodicState, right: PeriodicState,
                  profile: ShockProfile, model: GasModel, frame_speed: float = 0.0) -> tuple:
    """``(X', Y')`` from donor snapshots at time ``t`` (nodes at ``j dx`` in the donor frame)."""
    spl = _spectra_from_arrays([t], left.v[None, :], left.u[None, :], left.period, model,
                               frame_speed, profile)
    spr = _spectra_from_arrays([t], right.v[None, :], right.u[None, :], right.period, model,
                               frame_speed, profile)
    Gl = np.conj(profile.gprime_transform(spl.kappa))
    Gr = np.conj(profile.gprime_transform(spr.kappa))
    return _rates(t, X, Y, spl.at(t), spr.at(t), spl, spr, Gl, Gr, profile.shock)


@dataclass(frozen=True, eq=False)
class ShiftTrajectory:
    times: np.ndarray
    x_vals: np.ndarray
    y_vals: np.ndarray
    x_rate: np.ndarray
    y_rate: np.ndarray
    x_inf_ode: float
    y_inf_ode: float
    x_inf_formula: float = float("nan")
    y_inf_formula: float = float("nan")

    def with_formula(self, x_inf: float, y_inf: float) -> "ShiftTrajectory":
        return replace(self, x_inf_formula=float(x_inf), y_inf_formula=float(y_inf))

    def _hermite(self, vals, rates):
        if self.times.size < 2:
            return lambda t: np.full_like(np.asarray(t, dtype=float), vals[0])
        return CubicHermiteSpline(self.times, vals, rates, extrapolate=False)

    @cached_property
    def _x_spline(self):
        return self._hermite(self.x_vals, self.x_rate)

    @cached_property
    def _y_spline(self):
        return self._hermite(self.y_vals, self.y_rate)

    def x_at(self, t):
        """Hermite interpolation using the stored rates, so ``d/dt x_at`` tracks ``X'``."""
        return self._x_spline(t)

    def y_at(self, t):
        return self._y_spline(t)


def _tail_correction(t, rate) -> float:
    """``int_{t_end}^inf`` of a rate that decays exponentially, from the envelope fit."""
    n = t.size
    sel = slice(int(0.7 * n), n)
    # rates at rounding level carry no tail
    if n < 20 or np.max(np.abs(rate[sel])) < RATE_NOISE:
        return 0.0
    env = np.maximum.accumulate(np.abs(rate[sel])[::-1])[::-1]
    fit = fit_exponential(t[sel], env, floor=1e-300)
    if not (fit.alpha > 0 and fit.r2 > 0.9):
        return 0.0
    return float(rate[-1] / fit.alpha)


def integrate_shifts(X0: float, Y0: float, left_run: PeriodicRun, right_run: PeriodicRun,
                     profile: ShockProfile, model: GasModel, t_end: Optional[float] = None,
                     rtol: float = 1e-11, atol: float = 1e-14) -> ShiftTrajectory:
    """Integrate the shift ODEs with DOP853; donors are spline-interpolated in time."""
    t_stop = min(left_run.t_end, right_run.t_end) if t_end is None else t_end
    if t_stop <= 0:
        raise InvalidParameterError("t_end must be positive")
    if t_stop > min(left_run.t_end, right_run.t_end) + 1e-12:
        raise InvalidParameterError("periodic runs do not cover the requested horizon")
    spl = donor_spectra(left_run, model, profile)
    spr = donor_spectra(right_run, model, profile)
    Gl = np.conj(profile.gprime_transform(spl.kappa))
    Gr = np.conj(profile.gprime_transform(spr.kappa))
    shock = profile.shock

    def rhs(t, y):
        return list(_rates(t, y[0], y[1], spl.at(t), spr.at(t), spl, spr, Gl, Gr, shock))

    grid = left_run.times if left_run.times.size >= right_run.times.size else right_run.times
    grid = grid[grid <= t_stop + 1e-12]
    if grid[-1] < t_stop:
        grid = np.append(grid, t_stop)
    sol = solve_ivp(rhs, (0.0, float(grid[-1])), [X0, Y0], method="DOP853", t_eval=grid,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise ShiftSolveError(f"shift ODE integration failed: {sol.message}")
    rates = np.array([rhs(t, y) for t, y in zip(sol.t, sol.y.T)])
    xr, yr = rates[:, 0], rates[:, 1]
    return ShiftTrajectory(times=sol.t, x_vals=sol.y[0], y_vals=sol.y[1], x_rate=xr, y_rate=yr,
                           x_inf_ode=float(sol.y[0, -1] + _tail_correction(sol.t, xr)),
                           y_inf_ode=float(sol.y[1, -1] + _tail_correction(sol.t, yr)))
