"""Command-line entry point: ``rftbot simulate|sweep|calibrate|measure``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .calibration import ForwardModel, cross_validate, fit, read_dataset
from .config import dump_config, parse_config
from .io import read_trajectory, write_json, write_trajectory
from .measure import measure, rpm_to_rad_s
from .robot import build_robot, simulate
from .sweep import run_sweep


def _cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out or cfg.out_dir)
    robot = build_robot(cfg.robot_spec(), cfg.rigid_multiplier)
    traj = simulate(robot, cfg.omega_T, cfg.duration_s, cfg.solver(), cfg.drag())
    write_trajectory(traj, out / "trajectory.csv")
    m = measure(traj, cfg.drag())
    summary = {
        "n": cfg.n,
        "omega_T_rpm": cfg.omega_T_rpm,
        "v_mm_s": m.v_mm_s,
        "omega_h_rpm": m.omega_h_rpm,
        "omega_t_rpm": m.omega_t_rpm,
        "eta": m.eta,
        "fit_residual_m": m.fit_residual,
        "newton_iters_mean": float(traj.iters[1:].mean()),
    }
    write_json(summary, out / "measurement.json")
    (out / "config.yaml").write_text(dump_config(cfg))
    print(f"v = {m.v_mm_s:.4f} mm/s, omega_h = {m.omega_h_rpm:.3f} rpm, "
          f"omega_t = {m.omega_t_rpm:.3f} rpm, eta = {m.eta:.5f}")
    print(f"wrote {out / 'trajectory.csv'}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "sweep.csv"
    rows = run_sweep(cfg, out)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"wrote {len(rows)} rows to {out} ({failed} failed)")
    return 0


def _cmd_calibrate(args) -> int:
    cfg = parse_config(args.config)
    ds = read_dataset(args.data)
    cal = cfg.calibration
    model = ForwardModel(cfg.robot_spec(), cfg.solver(), cal.duration_s, cfg.rigid_multiplier)
    res = fit(ds, cal.initial, (cal.lower, cal.upper), model, max_evals=cal.max_evals)
    report = {
        "C1": res.C1, "C2": res.C2, "mu": res.mu,
        "objective": res.objective_value,
        "converged": res.converged,
        "underdetermined": res.underdetermined,
        "evaluations": res.evaluations,
    }
    if args.holdout:
        report["holdout"] = cross_validate(res.params, read_dataset(args.holdout), model)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "calibration.json"
    write_json(report, out)
    flag = "" if res.converged else " (not converged)"
    if res.underdetermined:
        flag += " (underdetermined)"
    print(f"C1 = {res.C1:.4g}, C2 = {res.C2:.4g}, mu = {res.mu:.4g}, "
          f"objective = {res.objective_value:.3e}{flag}")
    return 0


def _cmd_measure(args) -> int:
    w = rpm_to_rad_s(args.omega_T_rpm) if args.omega_T_rpm is not None else 0.0
    traj = read_trajectory(args.trajectory, w)
    m = measure(traj)
    out = {"v_mm_s": m.v_mm_s, "omega_h_rpm": m.omega_h_rpm, "fit_residual_m": m.fit_residual}
    if args.omega_T_rpm is not None:
        out.update(omega_t_rpm=m.omega_t_rpm, eta=m.eta)
    for k, v in out.items():
        print(f"{k} = {v:.6g}")
    if args.out:
        write_json(out, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rftbot", description="Soft multi-tailed robot simulator")
    p.add_argument("--version", action="version", version=f"rftbot {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (default: out_dir from the config)")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("sweep", help="speed/efficiency curves over n and omega_T")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output CSV (default: <out_dir>/sweep.csv)")
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("calibrate", help="fit C1, C2, mu to a dataset")
    s.add_argument("--config", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--holdout", help="dataset for cross-validation")
    s.add_argument("--out", help="output JSON (default: <out_dir>/calibration.json)")
    s.set_defaults(func=_cmd_calibrate)

    s = sub.add_parser("measure", help="measure v and omega_h from a trajectory CSV")
    s.add_argument("--trajectory", required=True)
    s.add_argument("--omega-T-rpm", dest="omega_T_rpm", type=float,
                   help="motor rate; enables omega_t and eta")
    s.add_argument("--out", help="output JSON")
    s.set_defaults(func=_cmd_measure)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - report and exit non-zero
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
