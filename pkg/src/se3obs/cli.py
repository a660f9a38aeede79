"""Command-line entry point: ``se3obs run|mc|preset|validate``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .config import PRESETS, load_config, preset_text
from .dynamics import Inertia
from .errors import GainBoundViolated, Se3ObsError
from .harness import config_gains, emit_csv, run_monte_carlo, run_single
from .observer import gain_bound


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    rec = run_single(cfg, args.run_index)
    path = emit_csv(rec, _out_dir(args.out) / f"{cfg.name or 'run'}_run{args.run_index:03d}.csv")
    pe, th = rec.final_errors
    print(f"run {args.run_index}: |p_e| = {np.linalg.norm(pe):.6g} m, |theta_e| = {np.linalg.norm(th):.6g} deg "
          f"({time.perf_counter() - t0:.2f} s) -> {path}")
    if not rec.ok:
        print(f"run failed: {rec.message}", file=sys.stderr)
        return 1
    return 0


def cmd_mc(args) -> int:
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    res = run_monte_carlo(cfg, jobs=args.jobs)
    out = _out_dir(args.out)
    stem = cfg.name or "mc"
    path = emit_csv(res, out / f"{stem}_summary.csv")
    if args.runs:
        for rec in res.records:
            emit_csv(rec, out / f"{stem}_run{rec.run_index:03d}.csv")
    s = res.summary
    print(f"{s.n_runs} runs ({len(s.failed)} failed) in {time.perf_counter() - t0:.1f} s -> {path}")
    print(f"  max |p_e| = {s.max_p_norm:.6g} m, min |p_e| = {s.min_p_norm:.6g} m")
    print(f"  max |theta_e| = {s.max_theta_norm:.6g} deg, min |theta_e| = {s.min_theta_norm:.6g} deg")
    if s.failed:
        print(f"failed runs: {', '.join(map(str, s.failed))}", file=sys.stderr)
        return 1
    return 0


def cmd_preset(args) -> int:
    if args.action == "list":
        for name in PRESETS:
            print(name)
        return 0
    if not args.name:
        print("preset show needs a name", file=sys.stderr)
        return 2
    sys.stdout.write(preset_text(args.name))
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    g = cfg.gains
    nominal = Inertia(cfg.inertia.rotational, cfg.inertia.mass)
    cert = gain_bound(g.p22, g.psi0_bound, g.omega_e0_bound, nominal)
    print(f"p1 = {g.p1:.6g}  bound = {cert.bound:.6g}  (rotational-block variant {cert.bound_rotational:.6g})")
    print(f"  sigma_max(Lambda) = {cert.sigma_max_inertia:.6g}, sigma_max(I) = {cert.sigma_max_rotational:.6g}, "
          f"|psi0| <= {g.psi0_bound:.6g} rad, |w_e0| <= {g.omega_e0_bound:.6g} rad/s")
    try:
        config_gains(cfg)
    except GainBoundViolated as exc:
        print(f"INVALID: {exc}", file=sys.stderr)
        return 1
    print("valid")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="se3obs", description="SE(3) rigid-body observer simulations")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one sampled scenario")
    r.add_argument("--config", required=True, help="config file or preset name")
    r.add_argument("--run-index", type=int, default=0)
    r.add_argument("--out", default=".")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("mc", help="Monte-Carlo batch with summary statistics")
    m.add_argument("--config", required=True, help="config file or preset name")
    m.add_argument("--out", default=".")
    m.add_argument("--jobs", type=int, default=1)
    m.add_argument("--runs", action="store_true", help="also write every run's time series")
    m.set_defaults(func=cmd_mc)

    s = sub.add_parser("preset", help="list or print bundled presets")
    s.add_argument("action", choices=["list", "show"])
    s.add_argument("name", nargs="?")
    s.set_defaults(func=cmd_preset)

    v = sub.add_parser("validate", help="check the gain certificate of a config")
    v.add_argument("--config", required=True, help="config file or preset name")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (Se3ObsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
