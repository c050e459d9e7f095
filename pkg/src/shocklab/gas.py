"""Gas law, viscosity and the algebraic shock relations.

The isentropic system in Lagrangian mass coordinates is

    v_t - u_x = 0,
    u_t + p(v)_x = (mu(v)/v * u_x)_x,

with ``sigma(v) = int_1^v mu(s)/s ds`` so that the viscous flux reads
``sigma'(v) u_x``.  Everything downstream only talks to a :class:`GasModel`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import EntropyViolationError, InvalidParameterError

ArrayFn = Callable[[np.ndarray], np.ndarray]

SIGMA_QUAD_TOL = 1e-12


def _vectorize_quad(fn: Callable[[float], float]) -> ArrayFn:
    def wrapped(v):
        arr = np.asarray(v, dtype=float)
        out = np.array([fn(float(x)) for x in arr.ravel()])
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    return wrapped


@dataclass(frozen=True)
class GasModel:
    """Pressure law and viscosity, all callables vectorised over numpy arrays.

    ``power_law`` is ``(gamma, mu0, beta)`` when ``p = v**-gamma`` and
    ``mu = mu0 * v**-beta``; the compiled solver kernels use it.  Models
    outside that family run on the pure numpy path.
    """

    pressure: ArrayFn
    pressure_d1: ArrayFn
    pressure_d2: ArrayFn
    viscosity: ArrayFn
    sigma_d1: ArrayFn
    sigma_d2: ArrayFn
    sigma: ArrayFn
    pressure_integral: ArrayFn
    name: str = "custom"
    power_law: Optional[tuple] = field(default=None)

    def sound_speed(self, v):
        return np.sqrt(-self.pressure_d1(v))

    def pressure_increment(self, v0: float, dv):
        """``p(v0 + dv) - p(v0)`` without cancellation for small ``dv`` on power laws."""
        dv = np.asarray(dv, dtype=float)
        if self.power_law is not None:
            gamma = self.power_law[0]
            return v0 ** -gamma * np.expm1(-gamma * np.log1p(dv / v0))
        return self.pressure(v0 + dv) - float(self.pressure(v0))


def make_polytropic(gamma: float, viscosity="constant", mu0: float = 1.0) -> GasModel:
    """``p(v) = v**-gamma`` with ``mu = mu0`` ("constant") or ``mu = mu0/v`` ("inverse").

    ``viscosity`` may also be a positive callable, in which case sigma is
    computed by adaptive quadrature.
    """
    if not np.isfinite(gamma) or gamma <= 1.0:
        raise InvalidParameterError(f"polytropic exponent must satisfy gamma > 1, got {gamma}")
    if mu0 <= 0:
        raise InvalidParameterError(f"viscosity scale must be positive, got {mu0}")
    g = float(gamma)

    def p(v):
        return np.power(v, -g)

    def p1(v):
        return -g * np.power(v, -g - 1.0)

    def p2(v):
        return g * (g + 1.0) * np.power(v, -g - 2.0)

    def p_int(v):
        # antiderivative normalised to vanish at v = 1
        return (np.power(v, 1.0 - g) - 1.0) / (1.0 - g)

    if callable(viscosity):
        base = make_custom(p, p1, p2, viscosity, pressure_integral=p_int)
        return GasModel(**{**base.__dict__, "name": f"polytropic(gamma={g}, mu=custom)"})

    if viscosity == "constant":
        beta = 0.0

        def sig(v):
            return mu0 * np.log(v)

    elif viscosity == "inverse":
        beta = 1.0

        def sig(v):
            return mu0 * (1.0 - 1.0 / np.asarray(v, dtype=float))

    else:
        raise InvalidParameterError(f"unknown viscosity law {viscosity!r}")

    def mu(v):
        return mu0 * np.power(v, -beta)

    def s1(v):
        return mu0 * np.power(v, -beta - 1.0)

    def s2(v):
        return -(beta + 1.0) * mu0 * np.power(v, -beta - 2.0)

    return GasModel(
        pressure=p,
        pressure_d1=p1,
        pressure_d2=p2,
        viscosity=mu,
        sigma_d1=s1,
        sigma_d2=s2,
        sigma=sig,
        pressure_integral=p_int,
        name=f"polytropic(gamma={g}, mu={viscosity})",
        power_law=(g, float(mu0), beta),
    )


def make_custom(pressure, pressure_d1, pressure_d2, viscosity, pressure_integral=None) -> GasModel:
    """Arbitrary smooth law; sigma and missing antiderivatives use quadrature."""

    def s1(v):
        return viscosity(v) / np.asarray(v, dtype=float)

    def s2(v):
        v = np.asarray(v, dtype=float)
        step = 1e-5 * np.maximum(1.0, np.abs(v))
        return (s1(v + step) - s1(v - step)) / (2.0 * step)

    def _sigma_scalar(x):
        if x <= 0:
            return float("nan")
        val, _ = integrate.quad(lambda t: float(viscosity(t)) / t, 1.0, x,
                                epsabs=SIGMA_QUAD_TOL, epsrel=1e-13, limit=200)
        return val

    if pressure_integral is None:
        def _pint_scalar(x):
            val, _ = integrate.quad(lambda t: float(pressure(t)), 1.0, x,
                                    epsabs=1e-13, epsrel=1e-13, limit=200)
            return val

        pressure_integral = _vectorize_quad(_pint_scalar)

    return GasModel(
        pressure=pressure,
        pressure_d1=pressure_d1,
        pressure_d2=pressure_d2,
        viscosity=viscosity,
        sigma_d1=s1,
        sigma_d2=s2,
        sigma=_vectorize_quad(_sigma_scalar),
        pressure_integral=pressure_integral,
    )


@dataclass(frozen=True)
class ModelReport:
    ok: bool
    first_violation: Optional[tuple] = None  # (v, condition, value)
    n_violations: int = 0

    def __str__(self):
        if self.ok:
            return "model ok"
        v, cond, val = self.first_violation
        return f"{self.n_violations} violation(s); first at v={v:.6g}: {cond} (value {val:.3e})"


def validate_model(model: GasModel, v_min: float, v_max: float, samples: int = 100) -> ModelReport:
    """Sample ``p' < 0``, ``p'' > 0`` and ``mu > 0`` on a uniform grid."""
    if not (0 < v_min < v_max) or samples < 2:
        raise InvalidParameterError("need 0 < v_min < v_max and samples >= 2")
    vs = np.linspace(v_min, v_max, samples)
    checks = (
        ("p'(v) < 0", np.asarray(model.pressure_d1(vs)), lambda x: x < 0),
        ("p''(v) > 0", np.asarray(model.pressure_d2(vs)), lambda x: x > 0),
        ("mu(v) > 0", np.broadcast_to(model.viscosity(vs), vs.shape), lambda x: x > 0),
    )
    first = None
    count = 0
    for i, v in enumerate(vs):
        for name, vals, good in checks:
            if not good(vals[i]):
                count += 1
                if first is None:
                    first = (float(v), name, float(vals[i]))
    return ModelReport(ok=first is None, first_violation=first, n_violations=count)


class ShockFamily(str, enum.Enum):
    TWO_SHOCK = "two_shock"
    ONE_SHOCK = "one_shock"


@dataclass(frozen=True)
class ShockConfig:
    v_left: float
    v_right: float
    u_left: float
    u_right: float
    speed: float
    family: ShockFamily = ShockFamily.TWO_SHOCK

    @property
    def dv(self) -> float:
        return self.v_right - self.v_left

    @property
    def du(self) -> float:
        return self.u_right - self.u_left

    def rh_residuals(self, model: GasModel) -> tuple:
        s = self.speed
        r1 = -s * self.dv - self.du
        r2 = -s * self.du + (float(model.pressure(self.v_right)) - float(model.pressure(self.v_left)))
        return r1, r2

    def lax_ok(self) -> bool:
        return self.v_left < self.v_right and self.u_left > self.u_right


def shock_speed(model: GasModel, v_left: float, v_right: float) -> float:
    dp = float(model.pressure(v_right)) - float(model.pressure(v_left))
    if not dp < 0.0:
        raise EntropyViolationError(f"pressure does not drop across the shock (jump {dp:.3g})")
    return math.sqrt(-dp / (v_right - v_left))


def build_shock(model: GasModel, v_left: float, v_right: float, u_left: float,
                family=ShockFamily.TWO_SHOCK) -> ShockConfig:
    """Close the Rankine-Hugoniot relations for a 2-shock from ``(v_l, v_r, u_l)``."""
    family = ShockFamily(family)
    if family is not ShockFamily.TWO_SHOCK:
        raise InvalidParameterError("only the 2-shock family is implemented")
    if not (np.isfinite(v_left) and np.isfinite(v_right) and np.isfinite(u_left)):
        raise InvalidParameterError("shock states must be finite")
    if v_left <= 0 or v_right <= 0:
        raise InvalidParameterError(f"specific volumes must be positive, got {v_left}, {v_right}")
    if v_left >= v_right:
        raise EntropyViolationError(
            f"Lax condition for a 2-shock needs v_left < v_right, got {v_left} >= {v_right}")
    s = shock_speed(model, v_left, v_right)
    u_right = u_left - s * (v_right - v_left)
    return ShockConfig(float(v_left), float(v_right), float(u_left), float(u_right), s, family)
