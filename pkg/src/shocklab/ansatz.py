"""Two-shift ansatz built from the periodic donors and the shock profile.

In the moving coordinate ``xi = x - s t``

    v~ = v_l (1 - g(xi - X)) + v_r g(xi - X),
    u~ = u_l (1 - g(xi - Y)) + u_r g(xi - Y),

and substituting into the equations leaves the conservative errors ``F1, F3``
and the mass sources ``f2, f4``.  ``H1 = F1 + F2`` and ``H2 = F3 + F4`` with
``F2, F4`` anti-derivatives of the sources.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .gas import GasModel
from .periodic import PeriodicRun
from .profile import ShockProfile
from .shifts import ShiftTrajectory, _rates, donor_spectra


class DonorField:
    """Evaluate a periodic run anywhere in ``(x, t)`` by Fourier series, spline in time."""

    def __init__(self, run: PeriodicRun):
        self.run = run
        self.kappa, vh, uh = run.fourier()
        self._m = self.kappa.size
        self._vs = CubicSpline(run.times, np.concatenate([vh.real, vh.imag], axis=1))
        self._us = CubicSpline(run.times, np.concatenate([uh.real, uh.imag], axis=1))

    def _coeffs(self, spline, t):
        c = spline(t)
        return c[: self._m] + 1j * c[self._m:]

    def __call__(self, x, t: float, derivs: int = 1):
        """``(v, u, u_x[, u_xx])`` at lab-frame points ``x`` and time ``t``."""
        x = np.asarray(x, dtype=float) - self.run.frame_speed * t
        ph = np.exp(1j * np.outer(x, self.kappa))
        vc = self._coeffs(self._vs, t)
        uc = self._coeffs(self._us, t)
        out = [np.real(ph @ vc), np.real(ph @ uc)]
        ik = 1j * self.kappa
        for d in range(1, derivs + 1):
            out.append(np.real(ph @ (uc * ik ** d)))
        return tuple(out)


@dataclass(frozen=True, eq=False)
class AnsatzField:
    profile: ShockProfile
    model: GasModel
    left: PeriodicRun
    right: PeriodicRun
    shifts: ShiftTrajectory

    @cached_property
    def left_field(self) -> DonorField:
        return DonorField(self.left)

    @cached_property
    def right_field(self) -> DonorField:
        return DonorField(self.right)

    @cached_property
    def _spectra(self):
        spl = donor_spectra(self.left, self.model, self.profile)
        spr = donor_spectra(self.right, self.model, self.profile)
        Gl = np.conj(self.profile.gprime_transform(spl.kappa))
        Gr = np.conj(self.profile.gprime_transform(spr.kappa))
        return spl, spr, Gl, Gr

    def shift_state(self, t: float) -> tuple:
        """``(X, Y, X', Y')`` with the rates evaluated from the ODE quotients at ``t``."""
        X = float(self.shifts.x_at(t))
        Y = float(self.shifts.y_at(t))
        spl, spr, Gl, Gr = self._spectra
        xr, yr = _rates(t, X, Y, spl.at(t), spr.at(t), spl, spr, Gl, Gr, self.profile.shock)
        return X, Y, xr, yr

    def donors(self, xi, t: float):
        x = np.asarray(xi, dtype=float) + self.profile.shock.speed * t
        return self.left_field(x, t), self.right_field(x, t)

    def evaluate(self, xi, t: float):
        """``(v~, u~, g_X, g_Y, g'_X, g'_Y)`` on the moving grid ``xi``."""
        X, Y = float(self.shifts.x_at(t)), float(self.shifts.y_at(t))
        (vl, ul, *_), (vr, ur, *_) = self.donors(xi, t)
        gx, _, gpx = self.profile.g_and_q(np.asarray(xi) - X)
        gy, _, gpy = self.profile.g_and_q(np.asarray(xi) - Y)
        return vl * (1 - gx) + vr * gx, ul * (1 - gy) + ur * gy, gx, gy, gpx, gpy


def eval_ansatz(field: AnsatzField, x, t: float):
    """``(v~, u~)`` at lab-frame points ``x``."""
    xi = np.asarray(x, dtype=float) - field.profile.shock.speed * t
    vt, ut, *_ = field.evaluate(xi, t)
    return vt, ut


@dataclass(frozen=True, eq=False)
class SourceTerms:
    xi: np.ndarray
    t: float
    F1: np.ndarray
    f2: np.ndarray
    F3: np.ndarray
    f4: np.ndarray
    F2: np.ndarray
    F4: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    w_forcing: np.ndarray  # H2 - sigma'(v~) dH1/dxi, the forcing of the W equation
    mass_f2: float
    mass_f4: float


def split_antiderivative(f: np.ndarray, dx: float) -> tuple:
    """Trapezoid anti-derivative from the left for ``xi < 0``, minus from the right for ``xi > 0``.

    Assumes the grid is symmetric about a node at ``xi = 0`` or at least
    contains it; the two halves agree there when ``int f = 0``.
    """
    left = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * dx)])
    right = np.concatenate([np.cumsum((0.5 * (f[1:] + f[:-1]) * dx)[::-1])[::-1], [0.0]])
    return left, -right


def compute_sources(field: AnsatzField, t: float, grid) -> SourceTerms:
    """Source and error terms on the uniform moving grid ``grid`` at time ``t``."""
    xi = np.asarray(grid, dtype=float)
    dx = float(xi[1] - xi[0])
    model = field.model
    s = field.profile.shock.speed
    X, Y, xr, yr = field.shift_state(t)
    (vl, ul, ulx), (vr, ur, urx) = field.donors(xi, t)
    gx, _, gpx = field.profile.g_and_q(xi - X)
    gy, _, gpy = field.profile.g_and_q(xi - Y)
    vt = vl * (1 - gx) + vr * gx
    du = ur - ul
    dvv = vr - vl
    F1 = du * (gy - gx)
    f2 = du * gpx + dvv * gpx * (s + xr)
    pt = model.pressure(vt)
    plv, prv = model.pressure(vl), model.pressure(vr)
    st = model.sigma_d1(vt)
    sl, sr = model.sigma_d1(vl), model.sigma_d1(vr)
    F3 = (-(pt - plv) * (1 - gy) - (pt - prv) * gy + st * du * gpy
          + (st - sl) * ulx * (1 - gy) + (st - sr) * urx * gy)
    f4 = du * gpy * (s + yr) + (sr * urx - sl * ulx) * gpy - (prv - plv) * gpy
    mask_left = xi < 0
    l2, r2 = split_antiderivative(f2, dx)
    l4, r4 = split_antiderivative(f4, dx)
    F2 = np.where(mask_left, l2, r2)
    F4 = np.where(mask_left, l4, r4)
    H1 = F1 + F2
    H2 = F3 + F4
    w_forcing = H2 - st * np.gradient(H1, dx)
    return SourceTerms(xi=xi, t=t, F1=F1, f2=f2, F3=F3, f4=f4, F2=F2, F4=F4, H1=H1, H2=H2,
                       w_forcing=w_forcing, mass_f2=float(l2[-1]), mass_f4=float(l4[-1]))


def sobolev_norm(f: np.ndarray, dx: float, order: int) -> float:
    """Discrete ``H^order`` norm with centred differences (one-sided at the ends)."""
    total = float(np.sum(f * f) * dx)
    d = f
    for _ in range(order):
        d = np.gradient(d, dx)
        total += float(np.sum(d * d) * dx)
    return float(np.sqrt(total))


def error_norms(sources: SourceTerms) -> tuple:
    """``(||H1||_{H^2}, ||H2||_{H^1})``."""
    dx = float(sources.xi[1] - sources.xi[0])
    return sobolev_norm(sources.H1, dx, 2), sobolev_norm(sources.H2, dx, 1)
