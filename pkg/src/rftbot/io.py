"""CSV/JSON writers and readers with fixed formatting for reproducible diffs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from types import SimpleNamespace

import numpy as np

TRAJECTORY_COLUMNS = ("t_s", "xh_x_m", "xh_y_m", "xh_z_m", "s_m", "theta_h_rad", "residual", "iters")
SWEEP_COLUMNS = ("n", "omega_T_rpm", "v_mm_s", "omega_h_rpm", "omega_t_rpm", "eta",
                 "newton_iters_mean", "wall_time_s", "status")


def fmt(x) -> str:
    """12 significant digits; integers stay integers."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"refusing to write non-finite value {x}")
    out = f"{x:.12g}"
    return "0" if out == "-0" else out


def write_trajectory(traj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for i in range(len(traj.t)):
            row = (traj.t[i], *traj.head[i], traj.s[i], traj.theta_h[i], traj.residual[i],
                   int(traj.iters[i]))
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_trajectory(path, omega_T: float = 0.0) -> SimpleNamespace:
    """Trajectory-like record (no spoke angle) from a CSV written by :func:`write_trajectory`."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"trajectory file not found: {path}")
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return SimpleNamespace(
        t=data[:, 0], head=data[:, 1:4], s=data[:, 4], theta_h=data[:, 5],
        residual=data[:, 6], iters=data[:, 7].astype(np.int64), spoke_angle=None,
        omega_T=omega_T,
    )


def write_rows(rows, columns, path) -> Path:
    """Write dict rows; missing or None fields become empty cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            cells = []
            for c in columns:
                v = r.get(c)
                cells.append("" if v is None else (v if isinstance(v, str) else fmt(v)))
            fh.write(",".join(cells) + "\n")
    return path


def read_rows(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(obj: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (float, np.floating)):
            return float(fmt(v))
        if isinstance(v, np.integer):
            return int(v)
        return v

    path.write_text(json.dumps(clean(obj), indent=2, sort_keys=True) + "\n")
    return path
