"""YAML experiment configuration: schema, defaults, validation and round trip.

A minimal file only needs the shock states; every other key has a default::

    run_id: reference
    gas: {gamma: 2.0}
    shock: {v_left: 1.0, v_right: 2.0, u_left: 0.0}

Periodic parts are ``epsilon`` times the unit modes listed per side.  ``bump.b``
may be the string ``solve``, in which case it is left deferred and fixed by the
zero-mass closure when the experiment runs.
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

from .errors import ConfigError
from .periodic import Mode, PeriodicPerturbation

SOLVE = "solve"
AUTO = "auto"


@dataclass(frozen=True)
class GasConfig:
    gamma: float = 2.0
    viscosity: str = "constant"  # "constant" (mu = mu0) or "inverse" (mu = mu0 / v)
    mu0: float = 1.0


@dataclass(frozen=True)
class ShockSpec:
    v_left: float = 1.0
    v_right: float = 2.0
    u_left: float = 0.0


@dataclass(frozen=True)
class ModeSpec:
    """Unit-amplitude mode; the run multiplies ``v`` and ``u`` by ``epsilon``."""

    k: int = 1
    v: float = 0.0
    u: float = 0.0
    phase_v: float = 0.0
    phase_u: float = 0.0


@dataclass(frozen=True)
class SideSpec:
    period: float = math.pi
    modes: tuple = ()

    def perturbation(self, eps: float) -> PeriodicPerturbation:
        return PeriodicPerturbation(self.period, tuple(
            Mode(m.k, eps * m.v, eps * m.u, m.phase_v, m.phase_u) for m in self.modes))


@dataclass(frozen=True)
class PerturbationConfig:
    epsilon: float = 0.0
    left: SideSpec = SideSpec()
    right: SideSpec = SideSpec()
    # draw every phase uniformly from [0, 2 pi) with the config seed
    random_phases: bool = False


@dataclass(frozen=True)
class BumpConfig:
    a: float = 0.0
    b: Union[float, str] = 0.0
    radius: float = 1.0

    @property
    def b_deferred(self) -> bool:
        return self.b == SOLVE


@dataclass(frozen=True)
class NumericsConfig:
    cells_per_period: int = 256
    half_width: Union[float, str] = AUTO
    t_end: float = 8.0
    sample_dt: float = 0.25
    donor_t_end: Union[float, str] = AUTO  # horizon of the lab-frame donors, default max(t_end, 16)
    donor_sample_dt: float = 0.01
    cfl: float = 0.4
    profile_tail_tol: float = 1e-12
    pressure_tol: float = 1e-12

    def donor_horizon(self) -> float:
        return max(self.t_end, 16.0) if self.donor_t_end == AUTO else float(self.donor_t_end)


@dataclass(frozen=True)
class OutputConfig:
    snapshot_every: int = 8  # write every n-th Cauchy sample (first and last always)


@dataclass(frozen=True)
class SweepConfig:
    parameter: str = "perturbation.epsilon"
    values: tuple = ()
    jobs: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    run_id: str = "run"
    seed: int = 0
    gas: GasConfig = GasConfig()
    shock: ShockSpec = ShockSpec()
    perturbation: PerturbationConfig = PerturbationConfig()
    bump: BumpConfig = BumpConfig()
    numerics: NumericsConfig = NumericsConfig()
    output: OutputConfig = OutputConfig()
    sweep: SweepConfig = SweepConfig()

    def sides(self) -> tuple:
        """``(left, right)`` perturbations with ``epsilon`` applied and phases resolved."""
        p = self.perturbation
        left, right = p.left, p.right
        if p.random_phases:
            rng = np.random.default_rng(self.seed)

            def draw(side):
                return replace(side, modes=tuple(
                    replace(m, phase_v=float(rng.uniform(0, 2 * math.pi)),
                            phase_u=float(rng.uniform(0, 2 * math.pi))) for m in side.modes))

            left, right = draw(left), draw(right)
        return left.perturbation(p.epsilon), right.perturbation(p.epsilon)

    def to_dict(self) -> dict:
        out = asdict(self)
        for side in ("left", "right"):
            out["perturbation"][side]["modes"] = [dict(m) for m in out["perturbation"][side]["modes"]]
        out["sweep"]["values"] = list(out["sweep"]["values"])
        return out

    def dump(self) -> str:
        """Effective configuration with every default materialised."""
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)

    def with_value(self, dotted: str, value: Any) -> "ExperimentConfig":
        """Copy with one dotted key replaced, validated again."""
        raw = self.to_dict()
        node = raw
        keys = dotted.split(".")
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigError([f"{dotted}: unknown key"])
            node = node[k]
        if keys[-1] not in node:
            raise ConfigError([f"{dotted}: unknown key"])
        node[keys[-1]] = value
        return from_dict(raw)


# ---------------------------------------------------------------------------
# parsing


class _Collector:
    def __init__(self):
        self.problems: list = []

    def add(self, path: str, msg: str) -> None:
        self.problems.append(f"{path}: {msg}")


def _number(raw, path, col, kind=float, default=None):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        col.add(path, f"expected a number, got {raw!r}")
        return default
    if kind is int:
        if float(raw) != int(raw):
            col.add(path, f"expected an integer, got {raw!r}")
            return default
        return int(raw)
    val = float(raw)
    if not math.isfinite(val):
        col.add(path, "must be finite")
        return default
    return val


def _section(raw, cls, path, col, parse_field=None):
    """Build dataclass ``cls`` from mapping ``raw``, recording unknown keys and type errors."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        col.add(path or "<root>", f"expected a mapping, got {type(raw).__name__}")
        return cls()
    known = {f.name: f for f in fields(cls)}
    for key in raw:
        if key not in known:
            col.add(f"{path}.{key}" if path else str(key), "unknown key")
    kw = {}
    defaults = cls()
    for name, f in known.items():
        if name not in raw:
            continue
        sub = f"{path}.{name}" if path else name
        value = raw[name]
        if parse_field is not None:
            handled, parsed = parse_field(name, value, sub, col)
            if handled:
                if parsed is not None:
                    kw[name] = parsed
                continue
        default = getattr(defaults, name)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                col.add(sub, f"expected true/false, got {value!r}")
            else:
                kw[name] = value
        elif isinstance(default, int):
            got = _number(value, sub, col, int)
            if got is not None:
                kw[name] = got
        elif isinstance(default, float):
            got = _number(value, sub, col)
            if got is not None:
                kw[name] = got
        elif isinstance(default, str):
            if not isinstance(value, str):
                col.add(sub, f"expected a string, got {value!r}")
            else:
                kw[name] = value
        else:
            kw[name] = value
    return cls(**kw)


def _float_or_word(word):
    def parse(name, value, path, col):
        if value == word:
            return True, word
        got = _number(value, path, col)
        return True, got
    return parse


def _parse_side(raw, path, col) -> SideSpec:
    def field_parser(name, value, sub, col):
        if name != "modes":
            return False, None
        if not isinstance(value, (list, tuple)):
            col.add(sub, "expected a list of modes")
            return True, None
        return True, tuple(_section(m, ModeSpec, f"{sub}[{i}]", col) for i, m in enumerate(value))

    return _section(raw, SideSpec, path, col, field_parser)


def from_dict(raw: dict) -> ExperimentConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    col = _Collector()
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError([f"<root>: expected a mapping, got {type(raw).__name__}"])
    raw = copy.deepcopy(raw)

    def top(name, value, sub, col):
        if name == "gas":
            return True, _section(value, GasConfig, sub, col)
        if name == "shock":
            return True, _section(value, ShockSpec, sub, col)
        if name == "perturbation":
            def pert_field(n, v, s, c):
                if n in ("left", "right"):
                    return True, _parse_side(v, s, c)
                return False, None
            return True, _section(value, PerturbationConfig, sub, col, pert_field)
        if name == "bump":
            def bump_field(n, v, s, c):
                if n == "b":
                    return _float_or_word(SOLVE)(n, v, s, c)
                return False, None
            return True, _section(value, BumpConfig, sub, col, bump_field)
        if name == "numerics":
            def num_field(n, v, s, c):
                if n in ("half_width", "donor_t_end"):
                    return _float_or_word(AUTO)(n, v, s, c)
                return False, None
            return True, _section(value, NumericsConfig, sub, col, num_field)
        if name == "output":
            return True, _section(value, OutputConfig, sub, col)
        if name == "sweep":
            def sweep_field(n, v, s, c):
                if n == "values":
                    if not isinstance(v, (list, tuple)):
                        c.add(s, "expected a list")
                        return True, None
                    return True, tuple(v)
                return False, None
            return True, _section(value, SweepConfig, sub, col, sweep_field)
        return False, None

    cfg = _section(raw, ExperimentConfig, "", col, top)
    _validate(cfg, col)
    if col.problems:
        raise ConfigError(col.problems)
    return cfg


def _validate(cfg: ExperimentConfig, col: _Collector) -> None:
    g = cfg.gas
    if not g.gamma > 1.0:
        col.add("gas.gamma", f"must exceed 1 (got {g.gamma}): the pressure v^-gamma must be strictly "
                             "convex for the Lax shock condition and a monotone viscous profile")
    if g.viscosity not in ("constant", "inverse"):
        col.add("gas.viscosity", f"must be 'constant' or 'inverse', got {g.viscosity!r}")
    if not g.mu0 > 0:
        col.add("gas.mu0", "must be positive")
    sh = cfg.shock
    if not (sh.v_left > 0 and sh.v_right > 0):
        col.add("shock", "specific volumes must be positive")
    elif not sh.v_left < sh.v_right:
        col.add("shock.v_right", "Lax condition for a 2-shock needs v_left < v_right")
    p = cfg.perturbation
    if p.epsilon < 0:
        col.add("perturbation.epsilon", "must be nonnegative")
    for side in ("left", "right"):
        s = getattr(p, side)
        if not s.period > 0:
            col.add(f"perturbation.{side}.period", "must be positive")
        for i, m in enumerate(s.modes):
            if m.k < 1:
                col.add(f"perturbation.{side}.modes[{i}].k", "must be a positive integer")
    b = cfg.bump
    if isinstance(b.b, str) and b.b != SOLVE:
        col.add("bump.b", f"must be a number or {SOLVE!r}")
    if not b.radius > 0:
        col.add("bump.radius", "must be positive")
    n = cfg.numerics
    if n.cells_per_period < 8:
        col.add("numerics.cells_per_period", "must be at least 8")
    if n.half_width != AUTO and not float(n.half_width) > 0:
        col.add("numerics.half_width", f"must be positive or {AUTO!r}")
    if not n.t_end > 0:
        col.add("numerics.t_end", "must be positive")
    if not n.sample_dt > 0:
        col.add("numerics.sample_dt", "must be positive")
    elif n.t_end > 0 and n.sample_dt > n.t_end:
        col.add("numerics.sample_dt", "must not exceed t_end")
    if n.donor_t_end != AUTO and not float(n.donor_t_end) >= n.t_end:
        col.add("numerics.donor_t_end", "must be at least t_end")
    if not n.donor_sample_dt > 0:
        col.add("numerics.donor_sample_dt", "must be positive")
    if not 0 < n.cfl <= 1.0:
        col.add("numerics.cfl", "must lie in (0, 1]")
    if not 0 < n.profile_tail_tol <= 1e-6:
        col.add("numerics.profile_tail_tol", "must lie in (0, 1e-6]")
    if not n.pressure_tol > 0:
        col.add("numerics.pressure_tol", "must be positive")
    if cfg.output.snapshot_every < 1:
        col.add("output.snapshot_every", "must be at least 1")
    if cfg.sweep.jobs < 1:
        col.add("sweep.jobs", "must be at least 1")
    if not cfg.run_id or any(c in cfg.run_id for c in "/\\ "):
        col.add("run_id", "must be a non-empty name without spaces or slashes")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"{path}: no such file"])
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML ({exc})"]) from exc
    return from_dict(raw)


def scale_resolution(cfg: ExperimentConfig, factor: float) -> ExperimentConfig:
    n = max(8, int(round(cfg.numerics.cells_per_period * factor)))
    return replace(cfg, numerics=replace(cfg.numerics, cells_per_period=n))


def override(cfg: ExperimentConfig, t_end: Optional[float] = None,
             resolution_scale: Optional[float] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Apply command-line overrides and validate the result."""
    if t_end is not None:
        cfg = cfg.with_value("numerics.t_end", float(t_end))
    if resolution_scale is not None:
        if not resolution_scale > 0:
            raise ConfigError(["--resolution-scale: must be positive"])
        cfg = scale_resolution(cfg, resolution_scale)
    if seed is not None:
        cfg = cfg.with_value("seed", int(seed))
    return from_dict(cfg.to_dict())
