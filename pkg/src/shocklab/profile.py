"""Viscous shock profile and the transition function ``g``.

Integrating the travelling-wave system once gives ``u = u_l - s (v - v_l)`` and
the scalar equation

    s sigma'(v) v' = -h(v),    h(v) = s^2 (v - v_l) + p(v) - p(v_l),

whose zeros are exactly the two end states.  We work with
``g = (v - v_l) / (v_r - v_l)`` on the left half and ``q = 1 - g`` on the right
half so that both tails keep full relative precision.

The equation is marched with fixed-step RK4 from ``g(center) = 1/2``.  A fixed
step keeps the tabulation error a smooth function of ``xi``; finite
differences of the table then see only the truncation error of the stencil.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import IntegrationError, InvalidParameterError, ModelInconsistencyError
from .gas import GasModel, ShockConfig

RK_SUBSTEP = 0.0025
MAX_NODES_PER_SIDE = 4_000_000
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


class _ReducedODE:
    """``g' = F(g)`` in the two cancellation-free forms."""

    def __init__(self, model: GasModel, shock: ShockConfig):
        self.model = model
        self.s = shock.speed
        self.vl = shock.v_left
        self.vr = shock.v_right
        self.dv = shock.dv

    def h_left(self, g):
        """``h`` at ``v = v_l + dv*g`` written relative to ``v_l``."""
        d = self.dv * np.asarray(g, dtype=float)
        return self.s ** 2 * d + self.model.pressure_increment(self.vl, d)

    def h_right(self, q):
        """``h`` at ``v = v_r - dv*q`` written relative to ``v_r``."""
        d = -self.dv * np.asarray(q, dtype=float)
        return self.s ** 2 * d + self.model.pressure_increment(self.vr, d)

    def gp_from_g(self, g):
        g = np.asarray(g, dtype=float)
        v = self.vl + self.dv * g
        return -self.h_left(g) / (self.s * self.model.sigma_d1(v) * self.dv)

    def gp_from_q(self, q):
        q = np.asarray(q, dtype=float)
        v = self.vr - self.dv * q
        return -self.h_right(q) / (self.s * self.model.sigma_d1(v) * self.dv)

    def scalar_rhs(self):
        """Fast float-only ``(F_left(g), F_right(q))`` for the RK march."""
        s, vl, vr, dv = self.s, self.vl, self.vr, self.dv
        if self.model.power_law is not None:
            gamma, mu0, beta = self.model.power_law
            pl = vl ** -gamma
            pr = vr ** -gamma

            def fl(g):
                v = vl + dv * g
                h = s * s * dv * g + pl * math.expm1(-gamma * math.log1p(dv * g / vl))
                return -h * v ** (beta + 1.0) / (s * mu0 * dv)

            def fr(q):
                v = vr - dv * q
                h = -s * s * dv * q + pr * math.expm1(-gamma * math.log1p(-dv * q / vr))
                return -h * v ** (beta + 1.0) / (s * mu0 * dv)

            return fl, fr
        return (lambda g: float(self.gp_from_g(g)), lambda q: float(self.gp_from_q(q)))


def decay_rates(model: GasModel, shock: ShockConfig) -> tuple:
    """Positive exponential rates ``(lam_l, mu_r)`` of ``g`` and ``1-g`` in the tails."""
    s = shock.speed
    lam = -(s * s + float(model.pressure_d1(shock.v_left))) / (s * float(model.sigma_d1(shock.v_left)))
    mu = (s * s + float(model.pressure_d1(shock.v_right))) / (s * float(model.sigma_d1(shock.v_right)))
    return lam, mu


def _rk4_march(f, y0: float, step: float, sub: int, tol: float, n_min: int, max_nodes: int):
    """March ``y' = f(y)`` with ``step/sub`` substeps; ``y`` must decay to ``tol``."""
    out = [y0]
    y = y0
    dt = step / sub
    while len(out) <= n_min or out[-1] >= tol:
        for _ in range(sub):
            k1 = f(y)
            k2 = f(y + 0.5 * dt * k1)
            k3 = f(y + 0.5 * dt * k2)
            k4 = f(y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(y) or y <= 0.0:
            raise IntegrationError(f"profile march left the physical range (value {y!r})")
        out.append(y)
        if len(out) > max_nodes:
            raise IntegrationError(
                f"profile tail did not reach tolerance {tol:g} within {max_nodes} nodes")
    return out


@dataclass(frozen=True, eq=False)
class ShockProfile:
    """Tabulated profile on ``center + [-reach_left, reach_right]``, exponential tails outside.

    ``q`` holds ``1 - g`` computed without cancellation on the right half.
    """

    xi: np.ndarray
    v: np.ndarray
    u: np.ndarray
    g: np.ndarray
    q: np.ndarray
    gp: np.ndarray
    decay_rate_left: float
    decay_rate_right: float
    shock: ShockConfig
    model: GasModel
    center: float = 0.0

    @property
    def h(self) -> float:
        return float(self.xi[1] - self.xi[0])

    @property
    def n_left(self) -> int:
        """Number of table intervals left of the centre."""
        return int(round((self.center - self.xi[0]) / self.h))

    @property
    def reach_left(self) -> float:
        return self.n_left * self.h

    @property
    def reach_right(self) -> float:
        return (self.xi.size - 1 - self.n_left) * self.h

    @cached_property
    def _ode(self):
        return _ReducedODE(self.model, self.shock)

    def g_and_q(self, xi):
        """Return ``(g, 1-g, g')`` at arbitrary points, both ``g`` forms precise."""
        t = np.asarray(xi, dtype=float) - self.center
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        La, Lb = self.reach_left, self.reach_right
        h = self.h
        n = self.xi.size
        nl = self.n_left
        g = np.empty_like(t)
        q = np.empty_like(t)
        gp = np.empty_like(t)

        left = t < -La
        right = t > Lb
        inside = ~(left | right)

        if left.any():
            g[left] = self.g[0] * np.exp(self.decay_rate_left * (t[left] + La))
            q[left] = 1.0 - g[left]
            gp[left] = self.decay_rate_left * g[left]
        if right.any():
            q[right] = self.q[-1] * np.exp(-self.decay_rate_right * (t[right] - Lb))
            g[right] = 1.0 - q[right]
            gp[right] = self.decay_rate_right * q[right]
        if inside.any():
            ti = t[inside]
            j = np.clip(np.floor(ti / h + nl).astype(np.int64), 0, n - 2)
            th = (ti - (j - nl) * h) / h
            h00 = (1.0 + 2.0 * th) * (1.0 - th) ** 2
            h10 = th * (1.0 - th) ** 2
            h01 = th * th * (3.0 - 2.0 * th)
            h11 = th * th * (th - 1.0)
            m0 = h * self.gp[j]
            m1 = h * self.gp[j + 1]
            is_left = ti <= 0.0
            gi = np.where(is_left, h00 * self.g[j] + h10 * m0 + h01 * self.g[j + 1] + h11 * m1,
                          1.0 - (h00 * self.q[j] - h10 * m0 + h01 * self.q[j + 1] - h11 * m1))
            qi = np.where(is_left, 1.0 - gi,
                          h00 * self.q[j] - h10 * m0 + h01 * self.q[j + 1] - h11 * m1)
            gpi = np.where(is_left, self._ode.gp_from_g(np.clip(gi, 0.0, 0.5)),
                           self._ode.gp_from_q(np.clip(qi, 0.0, 0.5)))
            g[inside] = gi
            q[inside] = qi
            gp[inside] = gpi
        if scalar:
            return float(g[0]), float(q[0]), float(gp[0])
        return g, q, gp

    def hermite_gprime(self, xi):
        """Exact derivative of the piecewise cubic used for ``g`` (tails analytic)."""
        t = np.atleast_1d(np.asarray(xi, dtype=float) - self.center)
        La, Lb = self.reach_left, self.reach_right
        h = self.h
        n = self.xi.size
        nl = self.n_left
        out = np.empty_like(t)
        left = t < -La
        right = t > Lb
        inside = ~(left | right)
        out[left] = self.decay_rate_left * self.g[0] * np.exp(self.decay_rate_left * (t[left] + La))
        out[right] = self.decay_rate_right * self.q[-1] * np.exp(-self.decay_rate_right * (t[right] - Lb))
        ti = t[inside]
        j = np.clip(np.floor(ti / h + nl).astype(np.int64), 0, n - 2)
        th = (ti - (j - nl) * h) / h
        d00 = 6.0 * th * (th - 1.0)
        d10 = (1.0 - th) * (1.0 - 3.0 * th)
        d11 = th * (3.0 * th - 2.0)
        out[inside] = (d00 * (self.g[j] - self.g[j + 1])) / h + d10 * self.gp[j] + d11 * self.gp[j + 1]
        return out

    @cached_property
    def _quadrature(self):
        """Gauss-Legendre nodes on every table panel with ``g'`` values there."""
        a = self.xi[:-1]
        half = 0.5 * self.h
        nodes = (a[:, None] + half * (1.0 + _GL_NODES[None, :])).ravel()
        weights = np.tile(half * _GL_WEIGHTS, a.size)
        _, _, gp = self.g_and_q(nodes)
        return nodes, weights, gp

    def gprime_transform(self, kappa):
        """``G(k) = int g'(xi) exp(-i k xi) dxi`` including analytic tail pieces."""
        kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
        nodes, weights, gp = self._quadrature
        wg = weights * gp
        out = np.exp(-1j * np.outer(kappa, nodes)) @ wg
        a, b = self.xi[0], self.xi[-1]
        lam, mu = self.decay_rate_left, self.decay_rate_right
        out += lam * self.g[0] * np.exp(-1j * kappa * a) / (lam - 1j * kappa)
        out += mu * self.q[-1] * np.exp(-1j * kappa * b) / (mu + 1j * kappa)
        return out

    def gprime_mass(self) -> float:
        """``int g'`` by panel quadrature plus tail masses; equals 1 analytically."""
        _, weights, gp = self._quadrature
        return float(weights @ gp + self.g[0] + self.q[-1])


def default_h_prof(min_period: float | None = None) -> float:
    if min_period is None:
        return 0.01
    return min(min_period / 64.0, 0.01)


def solve_profile(model: GasModel, shock: ShockConfig, tail_tol: float = 1e-12,
                  h_prof: float = 0.01, center: float = 0.0,
                  substep: float = RK_SUBSTEP) -> ShockProfile:
    """Tabulate the profile on a uniform grid until both tails are within ``tail_tol``.

    Parameters
    ----------
    tail_tol
        Stop once ``|v - v_{l,r}| < tail_tol`` at both ends.
    h_prof
        Output spacing.  RK4 substeps are at most ``substep`` long.
    center
        Location where ``g = 1/2``.

    Raises
    ------
    ModelInconsistencyError
        If ``h(v) >= 0`` somewhere strictly between the end states.
    IntegrationError
        If a tail fails to reach ``tail_tol``.
    """
    if not (0.0 < tail_tol <= 1e-6):
        raise InvalidParameterError(f"tail_tol must lie in (0, 1e-6], got {tail_tol}")
    if not (h_prof > 0.0 and math.isfinite(h_prof)):
        raise InvalidParameterError(f"h_prof must be positive, got {h_prof}")
    if not shock.lax_ok():
        raise InvalidParameterError("profile requested for a shock violating the Lax ordering")

    ode = _ReducedODE(model, shock)
    probe = np.linspace(0.0, 0.5, 201)[1:]
    bad = np.concatenate([probe[ode.h_left(probe) >= 0.0], 1.0 - probe[ode.h_right(probe) >= 0.0]])
    if bad.size:
        v_bad = shock.v_left + shock.dv * float(np.min(bad))
        raise ModelInconsistencyError(
            f"h(v) >= 0 at v={v_bad:.6g} inside (v_l, v_r); pressure is not convex there")
    lam, mu = decay_rates(model, shock)
    if not (lam > 0.0 and mu > 0.0):
        raise ModelInconsistencyError(f"end states are not hyperbolic (rates {lam:.3g}, {mu:.3g})")

    sub = max(1, math.ceil(h_prof / substep - 1e-9))
    fl, fr = ode.scalar_rhs()
    # half the tolerance leaves room for rounding in v = v_r - dv*q
    tol = 0.5 * tail_tol / shock.dv
    # g decays going left, q going right; both marched with a positive step
    left = _rk4_march(lambda g: -fl(g), 0.5, h_prof, sub, tol, 0, MAX_NODES_PER_SIDE)
    right = _rk4_march(lambda q: -fr(q), 0.5, h_prof, sub, tol, 0, MAX_NODES_PER_SIDE)
    gl = np.array(left[::-1])
    qr = np.array(right)
    g = np.concatenate([gl, 1.0 - qr[1:]])
    q = np.concatenate([1.0 - gl, qr[1:]])
    xi = center + h_prof * np.arange(-(gl.size - 1), qr.size)
    gp = np.concatenate([ode.gp_from_g(gl), ode.gp_from_q(qr[1:])])
    v = np.concatenate([shock.v_left + shock.dv * gl, shock.v_right - shock.dv * qr[1:]])
    u = shock.u_left - shock.speed * (v - shock.v_left)
    return ShockProfile(xi=xi, v=v, u=u, g=g, q=q, gp=gp, decay_rate_left=lam,
                        decay_rate_right=mu, shock=shock, model=model, center=float(center))


def eval_profile(profile: ShockProfile, xi):
    """``(v, u, g, g')`` at ``xi``; outside the table the linearised tails apply."""
    g, q, gp = profile.g_and_q(xi)
    sh = profile.shock
    v = np.where(np.asarray(g) <= 0.5, sh.v_left + sh.dv * np.asarray(g),
                 sh.v_right - sh.dv * np.asarray(q))
    u = sh.u_left - sh.speed * (v - sh.v_left)
    if np.ndim(xi) == 0:
        return float(v), float(u), g, gp
    return v, u, g, gp


def _d1_4th(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order centered first derivative at nodes 2..n-3."""
    return (-f[4:] + 8.0 * f[3:-1] - 8.0 * f[1:-3] + f[:-4]) / (12.0 * h)


def profile_residual(profile: ShockProfile, model: GasModel, shock: ShockConfig) -> float:
    """Max over interior nodes of ``|-s u' + p(v)' - (sigma'(v) u')'|`` by 4th-order FD."""
    h = profile.h
    v, u = profile.v, profile.u
    du = _d1_4th(u, h)
    dp = _d1_4th(model.pressure(v), h)
    flux = model.sigma_d1(v[2:-2]) * du
    dflux = _d1_4th(flux, h)
    res = -shock.speed * du[2:-2] + dp[2:-2] - dflux
    return float(np.max(np.abs(res))) if res.size else 0.0


def check_profile_invariants(profile: ShockProfile, tol: float = 1e-12) -> list:
    """Return human-readable descriptions of every violated profile invariant."""
    sh = profile.shock
    problems = []
    if not np.all(np.diff(profile.v) > 0):
        problems.append("v_s is not strictly increasing")
    if not np.all(np.diff(profile.u) < 0):
        problems.append("u_s is not strictly decreasing")
    if not (np.all(profile.g > 0) and np.all(profile.g < 1)):
        problems.append("g leaves (0, 1)")
    if not np.all(profile.gp > 0):
        problems.append("g' is not positive")
    fi = np.max(np.abs(profile.u - (sh.u_left - sh.speed * (profile.v - sh.v_left))))
    if fi > tol:
        problems.append(f"first integral violated by {fi:.2e}")
    if abs(profile.v[0] - sh.v_left) >= tol or abs(profile.v[-1] - sh.v_right) >= tol:
        problems.append("end values not within tolerance of the far-field states")
    return problems
