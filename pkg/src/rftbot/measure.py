"""Steady-state observables extracted from a trajectory."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drag import DragModel

TRANSIENT_FRACTION = 0.2
MIN_SAMPLES = 50


class MeasurementError(ValueError):
    pass


def rpm_to_rad_s(rpm):
    return np.asarray(rpm) * (2.0 * math.pi / 60.0) if np.ndim(rpm) else rpm * 2.0 * math.pi / 60.0


def rad_s_to_rpm(w):
    return np.asarray(w) * (60.0 / (2.0 * math.pi)) if np.ndim(w) else w * 60.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class Measurement:
    v: float  # m/s, + toward the head
    omega_h: float  # rad/s, magnitude
    omega_t: float  # rad/s, magnitude
    omega_T: float  # rad/s, magnitude
    eta: float
    fit_residual: float  # rms of the linear position fit, m

    @property
    def v_mm_s(self) -> float:
        return self.v * 1e3

    @property
    def omega_h_rpm(self) -> float:
        return rad_s_to_rpm(self.omega_h)

    @property
    def omega_t_rpm(self) -> float:
        return rad_s_to_rpm(self.omega_t)

    @property
    def budget_error(self) -> float:
        """Relative mismatch of |w_h| + |w_t| against |w_T|."""
        if self.omega_T == 0:
            return abs(self.omega_h + self.omega_t)
        return abs(self.omega_h + self.omega_t - self.omega_T) / self.omega_T


def _steady(t, y, transient: float):
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if t.shape != y.shape:
        raise MeasurementError("time and signal lengths differ")
    k = int(math.floor(transient * len(t)))
    if len(t) - k < MIN_SAMPLES:
        raise MeasurementError(
            f"trajectory too short: {len(t) - k} samples after the transient, need {MIN_SAMPLES}"
        )
    return t[k:], y[k:]


def linear_fit(t, y, transient: float = TRANSIENT_FRACTION) -> tuple[float, float]:
    """Least-squares slope of ``y(t)`` past the transient, and the rms fit residual."""
    tt, yy = _steady(t, y, transient)
    A = np.column_stack([tt, np.ones_like(tt)])
    coef, *_ = np.linalg.lstsq(A, yy, rcond=None)
    r = yy - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(r * r)))


def measure_speed(traj, transient: float = TRANSIENT_FRACTION) -> tuple[float, float]:
    """Steady speed (m/s) of the head node along the swimming axis."""
    return linear_fit(traj.t, traj.s, transient)


def measure_rotations(traj, omega_T: float, transient: float = TRANSIENT_FRACTION):
    """``(omega_h, omega_t)`` as magnitudes in rad/s.

    The head rate is the slope of the head twist angle.  The tail rate is the
    slope of the first spoke's azimuth when the trajectory carries it, and
    ``|omega_T| - omega_h`` otherwise.
    """
    wh = abs(linear_fit(traj.t, traj.theta_h, transient)[0])
    spoke = getattr(traj, "spoke_angle", None)
    if spoke is not None:
        wt = abs(linear_fit(traj.t, spoke, transient)[0])
    else:
        wt = abs(omega_T) - wh
    return wh, wt


def efficiency(v: float, omega_h: float, drag: DragModel = DragModel()) -> float:
    """Head drag force times head radius over head drag torque: 6 C1 v / (8 C2 a w_h)."""
    if omega_h == 0:
        raise MeasurementError("efficiency undefined for a non-rotating head")
    return 6.0 * drag.C1 * v / (8.0 * drag.C2 * drag.a * omega_h)


def measure(traj, drag: DragModel = DragModel(), transient: float = TRANSIENT_FRACTION) -> Measurement:
    v, res = measure_speed(traj, transient)
    wT = abs(traj.omega_T)
    wh, wt = measure_rotations(traj, wT, transient)
    eta = efficiency(v, wh, drag) if wh > 0 else 0.0
    return Measurement(v, wh, wt, wT, eta, res)
