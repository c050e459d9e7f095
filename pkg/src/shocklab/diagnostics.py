"""Perturbation fields, their anti-derivatives, norms and the energy ledger.

All quantities live on the uniform grid of a :class:`~shocklab.cauchy.CauchyState`.
Anti-derivatives are cumulative trapezoid sums from the left end.

The effective-velocity perturbation ``w = psi - d/dxi (sigma(v) - sigma(v~))``
is sampled on cell faces, where the centred difference is second order and
its running sum telescopes.  ``W`` is then formed two ways: by summing ``w``
and from ``Psi - (sigma(v) - sigma(v~))``; the two agree to rounding plus the
left-end value of ``sigma(v) - sigma(v~)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ansatz import sobolev_norm
from .cauchy import CauchyState, discrete_ansatz
from .gas import GasModel
from .profile import ShockProfile, eval_profile


def cumulative_trapezoid(f: np.ndarray, dx: float) -> np.ndarray:
    """Running trapezoid integral from the first node (value 0 there)."""
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1])) * dx
    return out


@dataclass(frozen=True, eq=False)
class PerturbationFrame:
    time: float
    xi: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    Phi: np.ndarray
    Psi: np.ndarray
    w: np.ndarray  # on faces xi_{i+1/2}
    W_sum: np.ndarray  # running sum of w, at nodes 1..
    W_def: np.ndarray  # Psi - (sigma(v) - sigma(v~)), at nodes 1..

    @property
    def dx(self) -> float:
        return float(self.xi[1] - self.xi[0])

    def norm(self, name: str, kind: str = "L2") -> float:
        """``kind`` is one of ``L2``, ``H1``, ``H2``, ``LINF``."""
        f = getattr(self, name)
        if kind == "LINF":
            return float(np.max(np.abs(f)))
        order = {"L2": 0, "H1": 1, "H2": 2}[kind]
        return sobolev_norm(f, self.dx, order)

    @property
    def w_identity_residual(self) -> float:
        return float(np.max(np.abs(self.W_sum - self.W_def)))

    @property
    def tails(self) -> tuple:
        """``(Phi, Psi)`` at the right end; zero when the masses balance."""
        return float(self.Phi[-1]), float(self.Psi[-1])


def build_frame(state: CauchyState, model: GasModel, profile: ShockProfile,
                field=None) -> PerturbationFrame:
    """Perturbation frame against the lockstep ansatz of ``state``.

    Passing an :class:`~shocklab.ansatz.AnsatzField` as ``field`` compares
    against the continuous ansatz instead (donors interpolated, shifts from
    the shift ODE).
    """
    xi = state.xi
    dx = state.grid.dx
    if field is None:
        vt, ut = discrete_ansatz(state, profile)
    else:
        vt, ut, *_ = field.evaluate(xi, state.time)
    phi = state.v - vt
    psi = state.u - ut
    Phi = cumulative_trapezoid(phi, dx)
    Psi = cumulative_trapezoid(psi, dx)
    dsig = model.sigma(state.v) - model.sigma(vt)
    w = 0.5 * (psi[1:] + psi[:-1]) - np.diff(dsig) / dx
    W_sum = np.cumsum(w) * dx
    W_def = Psi[1:] - dsig[1:]
    return PerturbationFrame(time=state.time, xi=xi, phi=phi, psi=psi, Phi=Phi, Psi=Psi, w=w,
                             W_sum=W_sum, W_def=W_def)


def convergence_metric(state: CauchyState, profile: ShockProfile, x_inf: float) -> float:
    """``max |v - v^S(xi - x_inf)| + |u - u^S(xi - x_inf)|`` over the grid."""
    vs, us, _, _ = eval_profile(profile, state.xi - x_inf)
    return float(np.max(np.abs(state.v - vs) + np.abs(state.u - us)))


@dataclass(frozen=True)
class EnergyLedger:
    """Running pieces of the a priori bound and the implied constant."""

    times: np.ndarray
    sup_h2: np.ndarray  # running sup of ||Phi||_{H2}^2 + ||Psi||_{H2}^2
    dissipation: np.ndarray  # int ||dPhi||_{H1}^2 + ||dPsi||_{H2}^2 dt
    initial_h2: float
    eps: float

    @property
    def lhs(self) -> np.ndarray:
        return self.sup_h2 + self.dissipation

    @property
    def ratio(self) -> np.ndarray:
        """Empirical ``C0(t)``: left side over ``||Phi0, Psi0||_{H2}^2 + eps``."""
        den = self.initial_h2 + self.eps
        if den == 0.0:
            return np.zeros_like(self.lhs)
        return self.lhs / den

    @property
    def c0(self) -> float:
        return float(self.ratio[-1])

    def upto(self, t: float) -> "EnergyLedger":
        k = self.times <= t + 1e-12
        return EnergyLedger(self.times[k], self.sup_h2[k], self.dissipation[k], self.initial_h2,
                            self.eps)


def energy_ledger(frames: Sequence[PerturbationFrame], eps: float) -> EnergyLedger:
    """Accumulate the a priori quantities over frames on a uniform time grid.

    ``eps`` is the periodic part of the initial size, for instance the sum of
    the two ``H^3`` norms over one period.
    """
    if len(frames) == 0:
        raise ValueError("no frames")
    t = np.array([f.time for f in frames])
    h2 = np.array([f.norm("Phi", "H2") ** 2 + f.norm("Psi", "H2") ** 2 for f in frames])
    # d/dxi Phi = phi and d/dxi Psi = psi on the grid
    diss = np.array([f.norm("phi", "H1") ** 2 + f.norm("psi", "H2") ** 2 for f in frames])
    acc = np.zeros_like(t)
    if t.size > 1:
        acc[1:] = np.cumsum(0.5 * (diss[1:] + diss[:-1]) * np.diff(t))
    return EnergyLedger(times=t, sup_h2=np.maximum.accumulate(h2), dissipation=acc,
                        initial_h2=float(h2[0]), eps=float(eps))


def periodic_size(left, right, order: int = 3) -> float:
    """``||phi0_l, psi0_l||_{H^order} + ||phi0_r, psi0_r||_{H^order}`` over one period each."""
    return left.sobolev_norm(order) + right.sobolev_norm(order)


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    linf_phi_psi: float
    h2_Phi_Psi: float
    metric: float
    phi_tail: float
    psi_tail: float
    w_residual: float
    mass_v: float
    mass_u: float
    boundary_mismatch: float
    X: float
    Y: float


def diagnostics_row(state: CauchyState, model: GasModel, profile: ShockProfile,
                    x_inf: float, frame: Optional[PerturbationFrame] = None) -> DiagnosticsRow:
    fr = frame if frame is not None else build_frame(state, model, profile)
    dx = state.grid.dx
    return DiagnosticsRow(
        t=state.time,
        linf_phi_psi=max(fr.norm("phi", "LINF"), fr.norm("psi", "LINF")),
        h2_Phi_Psi=float(np.hypot(fr.norm("Phi", "H2"), fr.norm("Psi", "H2"))),
        metric=convergence_metric(state, profile, x_inf),
        phi_tail=fr.tails[0],
        psi_tail=fr.tails[1],
        w_residual=fr.w_identity_residual,
        mass_v=float(np.sum(fr.phi) * dx),
        mass_u=float(np.sum(fr.psi) * dx),
        boundary_mismatch=state.boundary_mismatch(),
        X=state.X,
        Y=state.Y,
    )
