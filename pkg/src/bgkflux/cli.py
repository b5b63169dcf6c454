"""Command line entry point: ``bgkflux run | converge-eps | converge-grid | verify | riemann``.

Every subcommand that evaluates checks writes ``report.json`` into the
output directory and exits with status 0 only if all checks pass.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .experiments import (ConfigError, ExperimentConfig, converge_eps, converge_grid,
                          load_config, run_experiment, write_macro_csv, write_report)
from .reference import riemann_profile
from .verification import verify_suite

DEFAULT_LADDER = "0.1,0.05,0.025,0.0125"


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out(args, cfg: ExperimentConfig | None = None) -> Path:
    out = Path(args.out or (cfg.out_dir if cfg else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _summarize(checks) -> int:
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.4g} (bound {c.bound:.4g})")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    res = run_experiment(cfg, out_dir=out, write_kinetic=not args.no_kinetic)
    for k in ("l1_error", "equilibrium_distance_final", "defect_mass", "residual_max"):
        print(f"{k} = {res.metrics[k]:.6g}")
    return _summarize(res.checks)


def cmd_converge_eps(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    ladder = [float(s) for s in args.eps_ladder.split(",") if s.strip()]
    rows, checks = converge_eps(cfg, ladder, out_dir=out)
    print("eps           l1_error      eq_distance   defect_mass")
    for r in rows:
        print(f"{r['eps']:<13.4g} {r['l1_error']:<13.4e} {r['equilibrium_distance']:<13.4e} "
              f"{r['defect_mass']:.4e}")
    return _summarize(checks)


def cmd_converge_grid(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    rows, checks = converge_grid(cfg, levels=args.levels, out_dir=out)
    print("n_x    eps         residual_max  l1_error")
    for r in rows:
        print(f"{r['n_x']:<6d} {r['eps']:<11.4g} {r['residual_max']:<13.4e} {r['l1_error']:.4e}")
    return _summarize(checks)


def cmd_verify(args) -> int:
    seed = 0 if args.seed is None else args.seed
    out = _out(args)
    checks = verify_suite(seed, use_jacobian=not args.drop_jacobian)
    write_report(out / "report.json", "verify", checks, {"seed": seed,
                                                         "drop_jacobian": args.drop_jacobian})
    return _summarize(checks)


def cmd_riemann(args) -> int:
    cfg = _config(args)
    if cfg.k_left != cfg.k_right:
        raise ConfigError("coefficient.k_right: the exact Riemann solver needs a constant "
                          "coefficient (k_left == k_right)")
    out = _out(args, cfg)
    grid = cfg.grid()
    vel = cfg.build_velocity()
    times = np.linspace(0.0, cfg.t_final, cfg.n_snapshots + 1)
    u = np.stack([riemann_profile(cfg.u_left, cfg.u_right, cfg.k_left, vel, grid.x, t)
                  for t in times])
    write_macro_csv(out / "macro_0.csv", times, grid.x, u)
    print(f"wrote {out / 'macro_0.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bgkflux",
        description="BGK relaxation experiments for conservation laws with a jump in k(x).")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", metavar="PATH", help="key = value configuration file")
        sp.add_argument("--seed", type=int, default=None, metavar="N")
        sp.add_argument("--out", metavar="DIR", help="output directory")

    sp = sub.add_parser("run", help="one BGK run against the reference")
    common(sp)
    sp.add_argument("--no-kinetic", action="store_true", help="skip kinetic_<idx>.csv")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("converge-eps", help="eps ladder on a fixed grid")
    common(sp)
    sp.add_argument("--eps-ladder", default=DEFAULT_LADDER, metavar="LIST",
                    help=f"comma-separated decreasing eps values (default {DEFAULT_LADDER})")
    sp.set_defaults(func=cmd_converge_eps)

    sp = sub.add_parser("converge-grid", help="joint refinement of dx, dt and eps")
    common(sp)
    sp.add_argument("--levels", type=int, default=3)
    sp.set_defaults(func=cmd_converge_grid)

    sp = sub.add_parser("verify", help="invariant checks with seeded random pairs")
    common(sp, config=False)
    sp.add_argument("--drop-jacobian", action="store_true",
                    help="mutation canary: transport without the Jacobian weight")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("riemann", help="exact Riemann solution on the configured grid")
    common(sp)
    sp.set_defaults(func=cmd_riemann)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
