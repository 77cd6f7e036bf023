"""Command-line driver: solve / verify / diagnose.

Exit codes: 0 on success, 2 when validation refuses to run, 1 on any
runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import driver, io, montecarlo
from .densities import discretize_normalized
from .errors import ConfigError, ValidationError
from .grids import ScalarField


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="casbp",
                                 description="Density steering for control-affine diffusions "
                                             "with mismatched input and noise channels")
    sub = ap.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run the solver and write a solution directory")
    solve.add_argument("config")
    solve.add_argument("--output", help="output directory (overrides the config)")
    solve.add_argument("--stride", type=int, help="trajectory buffer stride (overrides the config)")
    solve.add_argument("--continuation", action="store_true",
                       help="ramp the channel mismatch from 0 to 1, warm-starting each stage")

    verify = sub.add_parser("verify", help="Monte-Carlo check of a solved policy")
    verify.add_argument("config")
    verify.add_argument("dir")

    diag = sub.add_parser("diagnose", help="write reaction-diagnostic snapshots and the validation report")
    diag.add_argument("config")
    diag.add_argument("dir")
    return ap


def _load_and_gate(config_path: str, write_report_to: str | None = None) -> io.Config:
    cfg = io.load_config(config_path)
    report = cfg.spec.validate()
    if write_report_to is not None:
        os.makedirs(os.path.dirname(write_report_to) or ".", exist_ok=True)
        with open(write_report_to, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.format() + "\n")
    if not report.ok:
        raise ValidationError(report)
    return cfg


def _phi_init_field(cfg: io.Config) -> ScalarField | None:
    if cfg.phi_init == "ones":
        return None
    path = cfg.phi_init[len("file:"):]
    _, f = io.read_snapshot(path)
    if f.grid != cfg.spec.grid:
        raise ConfigError(f"phi_init file {path} is on a different grid than the problem")
    return f


def cmd_solve(args) -> int:
    cfg = _load_and_gate(args.config)
    spec = cfg.spec
    if args.stride is not None:
        spec = spec.with_stride(args.stride)
    out_dir = args.output or cfg.out_dir
    if not out_dir:
        print("solve: no output directory (set output.directory or pass --output)", file=sys.stderr)
        return 1

    rho0 = discretize_normalized(cfg.rho0, spec.grid)
    rho1 = discretize_normalized(cfg.rho1, spec.grid)
    if args.continuation or cfg.continuation:
        sol = driver.run_with_continuation(spec, rho0, rho1, tol=cfg.tol, maxiter=cfg.maxiter)
    else:
        sol = driver.run(spec, rho0, rho1, phi_init=_phi_init_field(cfg),
                         tol=cfg.tol, maxiter=cfg.maxiter)
    io.write_solution_dir(sol, out_dir, cfg.n_snapshots, tol=cfg.tol)
    status = "converged" if sol.converged else "did NOT converge"
    print(f"solve: {status} after {sol.iterations} iterations "
          f"(final err {sol.final_err:.3e}); wrote {out_dir}")
    return 0


def cmd_verify(args) -> int:
    cfg = _load_and_gate(args.config)
    spec = cfg.spec
    times = None
    fields_by_comp = []
    for comp in range(spec.m):
        t_c, f_c = io.load_quantity(args.dir, f"u{comp + 1}")
        if times is None:
            times = t_c
        elif t_c != times:
            raise ValueError(f"u{comp + 1} snapshot times disagree with u1")
        fields_by_comp.append(f_c)
    policy_fields = [[fields_by_comp[c][k] for c in range(spec.m)] for k in range(len(times))]

    target = discretize_normalized(cfg.rho1, spec.grid)
    import numpy as np
    result = montecarlo.simulate_policy(
        spec, cfg.rho0, np.asarray(times), policy_fields,
        cfg.n_particles, cfg.seed, target=target, bins=cfg.bins)

    dt_mc = montecarlo.DT_MC_FACTOR * spec.dt_effective
    report = {
        "n_particles": result.n_particles,
        "seed": result.seed,
        "bins": cfg.bins,
        "dt_mc": dt_mc,
        "policy_snapshots": len(times),
        "escaped": result.escaped,
        "escaped_fraction": result.escaped / result.n_particles,
        "tv_to_target": result.tv_to_target,
        "terminal_mean": [float(result.terminal_points[:, 0].mean()),
                          float(result.terminal_points[:, 1].mean())],
    }
    path = os.path.join(args.dir, io.VERIFICATION_NAME)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"verify: TV to target {result.tv_to_target:.4f}, "
          f"{result.escaped} of {result.n_particles} particles clamped; wrote {path}")
    return 0


def cmd_diagnose(args) -> int:
    cfg = _load_and_gate(args.config, write_report_to=os.path.join(args.dir, io.VALIDATION_NAME))
    spec = cfg.spec
    times, phis = io.load_quantity(args.dir, "phi")
    new_files = []
    for k, (t, phi) in enumerate(zip(times, phis)):
        field = driver.reaction_diagnostic(phi, t, spec)
        name = f"reaction_{k:04d}.csv"
        io.write_snapshot(os.path.join(args.dir, name), field, t, "reaction")
        new_files.append({"file": name, "quantity": "reaction", "time": t})
    io.update_manifest(args.dir, new_files, replace_quantity="reaction")
    print(f"diagnose: wrote {len(new_files)} reaction snapshots and {io.VALIDATION_NAME} in {args.dir}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"solve": cmd_solve, "verify": cmd_verify, "diagnose": cmd_diagnose}
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(f"{args.command}: refusing to run\n{exc}", file=sys.stderr)
        return 2
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
