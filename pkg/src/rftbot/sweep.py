"""Speed and efficiency curves over tail count and motor rate."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .io import SWEEP_COLUMNS, write_rows
from .measure import measure
from .robot import build_robot, simulate

log = logging.getLogger(__name__)


def run_point(cfg: RunConfig, n: int, omega_T_rpm: float) -> dict:
    """One simulation; failures are reported in the ``status`` field."""
    row = {"n": int(n), "omega_T_rpm": float(omega_T_rpm)}
    try:
        robot = build_robot(cfg.robot_spec(n), cfg.rigid_multiplier)
        w = omega_T_rpm * 2.0 * math.pi / 60.0
        traj = simulate(robot, w, cfg.duration_s, cfg.solver(), cfg.drag())
        m = measure(traj, cfg.drag())
        vals = {
            "v_mm_s": m.v_mm_s,
            "omega_h_rpm": m.omega_h_rpm,
            "omega_t_rpm": m.omega_t_rpm,
            "eta": m.eta,
            "newton_iters_mean": float(np.mean(traj.iters[1:])),
            "wall_time_s": traj.wall_time,
        }
        if not all(math.isfinite(v) for v in vals.values()):
            raise FloatingPointError("non-finite measurement")
        row.update(vals)
        row["status"] = "ok"
    except Exception as exc:  # noqa: BLE001 - a failed point must not stop the sweep
        log.error("sweep point n=%s omega_T=%s rpm failed: %s", n, omega_T_rpm, exc)
        row["status"] = f"failed: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
    return row


def _point(args):
    return run_point(*args)


def run_sweep(cfg: RunConfig, out_path=None) -> list[dict]:
    """Run every (n, omega_T) pair of ``cfg.sweep``; rows sorted by (n, omega_T)."""
    jobs = sorted({(int(n), float(w)) for n in cfg.sweep.n for w in cfg.sweep.omega_T_rpm})
    args = [(cfg, n, w) for n, w in jobs]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            rows = list(ex.map(_point, args))
    else:
        rows = [_point(a) for a in args]
    if out_path is None:
        out_path = Path(cfg.out_dir) / "sweep.csv"
    write_rows(rows, SWEEP_COLUMNS, out_path)
    return rows


def single_point_config(cfg: RunConfig, n: int, omega_T_rpm: float) -> RunConfig:
    return replace(cfg, n=n, omega_T_rpm=omega_T_rpm)
