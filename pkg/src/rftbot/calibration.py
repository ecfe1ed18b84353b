"""Fit the drag parameters (C1, C2, mu) to measured speed and head-rotation data."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .drag import DragModel
from .measure import measure
from .robot import Robot, RobotSpec, build_robot, simulate
from .stepper import SolverConfig

log = logging.getLogger(__name__)

DATASET_COLUMNS = ("n", "omega_T_rpm", "v_mm_s", "omega_h_rpm", "weight")
FAILURE_PENALTY = 1e6


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationRecord:
    n: int
    omega_T_rpm: float
    v_mm_s: float
    omega_h_rpm: float
    weight: float = 1.0


@dataclass(frozen=True)
class CalibrationDataset:
    records: tuple
    source: str = ""

    def __post_init__(self):
        for r in self.records:
            if not r.omega_T_rpm > 0:
                raise DatasetError(f"omega_T_rpm must be positive, got {r.omega_T_rpm}")
            if r.v_mm_s == 0 or r.omega_h_rpm == 0:
                raise DatasetError("observed v and omega_h must be non-zero (relative errors)")
            if not r.weight >= 0:
                raise DatasetError("weights must be non-negative")
            if int(r.n) != r.n or r.n < 1:
                raise DatasetError(f"tail count must be a positive integer, got {r.n}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def underdetermined(self) -> bool:
        """Fewer residuals than the three fitted parameters."""
        return 2 * len(self.records) < 3

    def subset(self, n: int) -> "CalibrationDataset":
        return CalibrationDataset(tuple(r for r in self.records if r.n == n), self.source)


def read_dataset(path) -> CalibrationDataset:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    lines = [ln.split("#", 1)[0].strip() for ln in path.read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise DatasetError(f"{path}: empty dataset")
    header = [h.strip() for h in lines[0].split(",")]
    if header[:4] != list(DATASET_COLUMNS[:4]) or header[4:] not in ([], ["weight"]):
        raise DatasetError(f"{path}: header must be '{', '.join(DATASET_COLUMNS)}'")
    recs = []
    for i, ln in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != len(header):
            raise DatasetError(f"{path}: row {i} has {len(cells)} fields, expected {len(header)}")
        try:
            vals = [float(c) for c in cells]
        except ValueError as exc:
            raise DatasetError(f"{path}: row {i}: {exc}") from exc
        w = vals[4] if len(vals) > 4 else 1.0
        recs.append(CalibrationRecord(int(vals[0]), vals[1], vals[2], vals[3], w))
    return CalibrationDataset(tuple(recs), source=str(path))


def write_dataset(ds: CalibrationDataset, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [", ".join(DATASET_COLUMNS)]
    for r in ds.records:
        rows.append(f"{r.n}, {r.omega_T_rpm:.12g}, {r.v_mm_s:.12g}, {r.omega_h_rpm:.12g}, {r.weight:.12g}")
    path.write_text("\n".join(rows) + "\n")
    return path


class ForwardModel:
    """Maps ``(C1, C2, mu)`` and a record's ``(n, omega_T)`` to simulated ``(v, omega_h)``.

    Robots are built once per tail count; results are memoised so that
    repeated evaluations at the same point cost nothing.
    """

    def __init__(self, spec: RobotSpec = RobotSpec(), solver: SolverConfig = SolverConfig(),
                 duration: float = 20.0, rigid_multiplier: float = 1e4):
        self.spec = spec
        self.solver = solver
        self.duration = duration
        self.rigid_multiplier = rigid_multiplier
        self._robots: dict[int, Robot] = {}
        self._cache: dict[tuple, tuple[float, float]] = {}
        self.evaluations = 0

    def robot(self, n: int) -> Robot:
        if n not in self._robots:
            self._robots[n] = build_robot(replace(self.spec, n=n), self.rigid_multiplier)
        return self._robots[n]

    def drag(self, params) -> DragModel:
        C1, C2, mu = (float(p) for p in params)
        return DragModel(mu=mu, C1=C1, C2=C2, a=self.spec.a, L=self.spec.L3, r0=self.spec.r0)

    def __call__(self, params, n: int, omega_T_rpm: float) -> tuple[float, float]:
        key = (tuple(float(p) for p in params), int(n), float(omega_T_rpm))
        if key not in self._cache:
            drag = self.drag(params)
            w = omega_T_rpm * 2.0 * math.pi / 60.0
            traj = simulate(self.robot(int(n)), w, self.duration, self.solver, drag)
            m = measure(traj, drag)
            self.evaluations += 1
            self._cache[key] = (m.v_mm_s, m.omega_h_rpm)
        return self._cache[key]


def _check_params(params):
    p = np.asarray(params, dtype=np.float64)
    if p.shape != (3,) or not np.all(p > 0):
        raise ValueError(f"(C1, C2, mu) must be three positive numbers, got {params}")
    return p


def record_residuals(params, ds: CalibrationDataset, model: ForwardModel) -> np.ndarray:
    """(len, 2) relative errors of v and omega_h per record."""
    out = np.empty((len(ds), 2))
    for i, r in enumerate(ds.records):
        v, wh = model(params, r.n, r.omega_T_rpm)
        out[i] = ((v - r.v_mm_s) / r.v_mm_s, (wh - r.omega_h_rpm) / r.omega_h_rpm)
    return out


def objective(params, ds: CalibrationDataset, model: ForwardModel) -> float:
    """Weighted sum of squared relative errors in v and omega_h."""
    p = _check_params(params)
    total = 0.0
    for r in sorted(ds.records, key=lambda r: (r.n, r.omega_T_rpm, r.v_mm_s, r.omega_h_rpm, r.weight)):
        try:
            v, wh = model(p, r.n, r.omega_T_rpm)
        except Exception as exc:  # noqa: BLE001 - any failed simulation is penalised
            log.warning("simulation failed at params=%s n=%d omega_T=%g: %s", p, r.n, r.omega_T_rpm, exc)
            return FAILURE_PENALTY
        total += r.weight * (((v - r.v_mm_s) / r.v_mm_s) ** 2 + ((wh - r.omega_h_rpm) / r.omega_h_rpm) ** 2)
    return float(total)


@dataclass
class FittedParams:
    C1: float
    C2: float
    mu: float
    objective_value: float
    converged: bool
    underdetermined: bool
    evaluations: int
    history: list = field(default_factory=list)  # (C1, C2, mu, objective) per evaluation

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.C1, self.C2, self.mu)


def fit(ds: CalibrationDataset, initial_guess: Sequence[float] = (2.420, 0.039, 6.828),
        bounds: Optional[Sequence[Sequence[float]]] = None, model: Optional[ForwardModel] = None,
        max_evals: int = 300, xtol: float = 1e-3, ftol: float = 1e-8,
        simplex_step: float = 0.2) -> FittedParams:
    """Nelder-Mead in log-parameter space, within ``bounds`` = ((lo...), (hi...))."""
    if len(ds) == 0:
        raise DatasetError("cannot fit an empty dataset")
    model = model or ForwardModel()
    x0 = np.log(_check_params(initial_guess))
    if bounds is None:
        lo, hi = np.asarray([0.1, 0.001, 0.1]), np.asarray([20.0, 1.0, 100.0])
    else:
        lo, hi = (_check_params(b) for b in bounds)
    if np.any(lo >= hi):
        raise ValueError("lower bounds must be below upper bounds")
    llo, lhi = np.log(lo), np.log(hi)
    x0 = np.clip(x0, llo, lhi)
    history = []

    def f(z):
        p = np.exp(z)
        val = objective(p, ds, model)
        history.append((*p, val))
        return val

    simplex = [x0]
    for i in range(3):
        z = x0.copy()
        z[i] += simplex_step if x0[i] + simplex_step <= lhi[i] else -simplex_step
        simplex.append(z)
    res = minimize(f, x0, method="Nelder-Mead", bounds=list(zip(llo, lhi)),
                   options={"maxfev": max_evals, "xatol": xtol, "fatol": ftol,
                            "initial_simplex": np.asarray(simplex)})
    if not res.success:
        log.warning("calibration stopped before convergence: %s", res.message)
    p = np.exp(res.x)
    return FittedParams(float(p[0]), float(p[1]), float(p[2]), float(res.fun), bool(res.success),
                        ds.underdetermined, int(res.nfev), history)


def cross_validate(params, holdout: CalibrationDataset, model: Optional[ForwardModel] = None) -> dict:
    """Per-record relative errors on held-out data and their summary."""
    model = model or ForwardModel()
    rel = record_residuals(_check_params(params), holdout, model)
    rows = []
    for r, (ev, ew) in zip(holdout.records, rel):
        v, wh = model(params, r.n, r.omega_T_rpm)
        rows.append({"n": r.n, "omega_T_rpm": r.omega_T_rpm, "v_mm_s_obs": r.v_mm_s,
                     "v_mm_s_sim": v, "omega_h_rpm_obs": r.omega_h_rpm, "omega_h_rpm_sim": wh,
                     "rel_err_v": ev, "rel_err_omega_h": ew})
    a = np.abs(rel)
    return {
        "records": rows,
        "mean_rel_err_v": float(a[:, 0].mean()),
        "mean_rel_err_omega_h": float(a[:, 1].mean()),
        "max_rel_err_v": float(a[:, 0].max()),
        "max_rel_err_omega_h": float(a[:, 1].max()),
        "mean_rel_err": float(a.mean()),
        "objective": float(sum(r.weight * (e[0] ** 2 + e[1] ** 2) for r, e in zip(holdout.records, rel))),
    }


def synthetic_dataset(params, n: int, omega_T_rpm: Sequence[float], model: ForwardModel,
                      noise: float = 0.0, seed: int = 0) -> CalibrationDataset:
    """Dataset simulated at ``params``, optionally with multiplicative Gaussian noise."""
    rng = np.random.default_rng(seed)
    recs = []
    for w in omega_T_rpm:
        v, wh = model(params, n, w)
        if noise:
            v *= 1.0 + noise * rng.standard_normal()
            wh *= 1.0 + noise * rng.standard_normal()
        recs.append(CalibrationRecord(n, float(w), float(v), float(wh), 1.0))
    return CalibrationDataset(tuple(recs), source=f"synthetic n={n} params={tuple(params)}")
