"""Run configuration: YAML with flat keys plus ``sweep`` and ``calibration`` blocks.

Units at this boundary are rpm for rotation rates and seconds for times;
everything else is SI.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .drag import DragModel
from .robot import RobotSpec
from .stepper import SolverConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepBlock:
    n: tuple = (2, 3)
    omega_T_rpm: tuple = tuple(range(60, 251, 10))


@dataclass(frozen=True)
class CalibrationBlock:
    initial: tuple = (2.420, 0.039, 6.828)  # C1, C2, mu
    lower: tuple = (0.1, 0.001, 0.1)
    upper: tuple = (20.0, 1.0, 100.0)
    duration_s: float = 20.0
    max_evals: int = 300


@dataclass(frozen=True)
class RunConfig:
    # robot
    n: int = 2
    a: float = 0.02
    L2: float = 0.04
    L3: float = 0.111
    r0: float = 0.0032
    E: float = 1.2e6
    nu: float = 0.5
    rho: float = 1000.0
    target_edge_length: float = 4.11e-3
    head_mass: float = 0.035
    # actuation and duration
    omega_T_rpm: float = 100.0
    duration_s: float = 200.0
    # solver
    dt: float = 1e-2
    newton_tolerance: Optional[float] = None
    max_newton_iterations: int = 50
    rigid_multiplier: float = 1e4
    # drag
    C1: float = 2.420
    C2: float = 0.039
    mu: float = 6.828
    # output and execution
    out_dir: str = "out"
    workers: int = 1
    sweep: SweepBlock = field(default_factory=SweepBlock)
    calibration: CalibrationBlock = field(default_factory=CalibrationBlock)

    def robot_spec(self, n: Optional[int] = None) -> RobotSpec:
        return RobotSpec(n=self.n if n is None else n, a=self.a, L2=self.L2, L3=self.L3,
                         r0=self.r0, E=self.E, nu=self.nu, rho=self.rho,
                         target_edge_length=self.target_edge_length, head_mass=self.head_mass)

    def solver(self) -> SolverConfig:
        return SolverConfig(self.dt, self.newton_tolerance, self.max_newton_iterations,
                            self.rigid_multiplier)

    def drag(self) -> DragModel:
        return DragModel(mu=self.mu, C1=self.C1, C2=self.C2, a=self.a, L=self.L3, r0=self.r0)

    @property
    def omega_T(self) -> float:
        return self.omega_T_rpm * 2.0 * math.pi / 60.0


_POSITIVE = ("n", "a", "L2", "L3", "r0", "E", "rho", "target_edge_length", "omega_T_rpm",
             "duration_s", "dt", "max_newton_iterations", "rigid_multiplier", "C1", "C2", "mu",
             "workers")
_INTEGER = ("n", "max_newton_iterations", "workers")


def _number(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return value


def _check_block(name, raw, cls):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {', '.join(unknown)}")
    out = {}
    for k, v in raw.items():
        key = f"{name}.{k}"
        if isinstance(v, (list, tuple)):
            if not v:
                raise ConfigError(f"{key}: list must not be empty")
            out[k] = tuple(_number(key, x) for x in v)
            if any(x <= 0 for x in out[k]):
                raise ConfigError(f"{key}: all entries must be positive")
        else:
            out[k] = _number(key, v)
            if out[k] <= 0:
                raise ConfigError(f"{key}: must be positive, got {v}")
    blk = cls(**out)
    if cls is SweepBlock and any(int(x) != x for x in blk.n):
        raise ConfigError(f"{name}.n: tail counts must be integers")
    if cls is SweepBlock:
        blk = SweepBlock(tuple(int(x) for x in blk.n), tuple(blk.omega_T_rpm))
    if cls is CalibrationBlock:
        for k in ("initial", "lower", "upper"):
            if len(getattr(blk, k)) != 3:
                raise ConfigError(f"{name}.{k}: expected [C1, C2, mu]")
        if any(lo >= hi for lo, hi in zip(blk.lower, blk.upper)):
            raise ConfigError(f"{name}: lower bounds must be below upper bounds")
        blk = CalibrationBlock(blk.initial, blk.lower, blk.upper, float(blk.duration_s),
                               int(blk.max_evals))
    return blk


def config_from_dict(raw: Optional[dict]) -> RunConfig:
    raw = dict(raw or {})
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    kw = {}
    for k, v in raw.items():
        if k == "sweep":
            kw[k] = _check_block(k, v, SweepBlock)
        elif k == "calibration":
            kw[k] = _check_block(k, v, CalibrationBlock)
        elif k == "out_dir":
            if not isinstance(v, str) or not v:
                raise ConfigError("out_dir: expected a non-empty string")
            kw[k] = v
        elif k == "newton_tolerance" and v is None:
            kw[k] = None
        else:
            v = _number(k, v)
            if k in _INTEGER:
                if int(v) != v:
                    raise ConfigError(f"{k}: expected an integer, got {v}")
                v = int(v)
            else:
                v = float(v)
            if (k in _POSITIVE or k in ("newton_tolerance",)) and not v > 0:
                raise ConfigError(f"{k}: must be positive, got {v}")
            if k == "head_mass" and v < 0:
                raise ConfigError("head_mass: must be non-negative")
            if k == "nu" and not -1.0 < v <= 0.5:
                raise ConfigError("nu: must lie in (-1, 0.5]")
            kw[k] = v
    return RunConfig(**kw)


def parse_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {p}: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"config {p} must be a mapping of keys to values")
    return config_from_dict(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["sweep"] = {k: list(v) for k, v in d["sweep"].items()}
    cal = d["calibration"]
    for k in ("initial", "lower", "upper"):
        cal[k] = list(cal[k])
    return d


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
