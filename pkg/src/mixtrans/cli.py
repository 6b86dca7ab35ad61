"""Command-line front end: ``mixtrans sinogram | verify | elastic``.

Exit codes: 0 success, 1 a check failed, 2 usage or config error,
3 runtime failure such as a trapped ray.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import config as cfgmod
from .geometry import DomainError, TrappedRayError
from .transforms import _atomic_write, config_checksum, sinogram

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _threads(args):
    if args.threads is not None:
        if args.threads < 0:
            raise cfgmod.ConfigError("--threads must be >= 0")
        os.environ["MIXTRANS_THREADS"] = str(args.threads)
    return args.threads


def _json_path(csv_path):
    root, _ = os.path.splitext(csv_path)
    return root + ".json"


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True, default=float) + "\n"


def cmd_sinogram(args) -> int:
    cfg = cfgmod.load_config(args.config)
    f = cfgmod.build_field(cfg)
    step = args.step if args.step is not None else cfg.step
    if not 0 < step <= 0.1:
        raise cfgmod.ConfigError("--step must lie in (0, 0.1]")
    grid = cfgmod.build_grid(cfg)
    out = args.out or cfg.output.path
    s = sinogram(f, cfg.kind, grid, step, threads=_threads(args))
    s.write(out, _json_path(out), config_checksum(cfg.model_dump(mode="json")))
    lo, hi = float(s.taus.min()), float(s.taus.max())
    print(f"max |value| = {s.max_abs:.6e}")
    print(f"tau range   = [{lo:.6f}, {hi:.6f}]")
    print(f"wrote {out} and {_json_path(out)}")
    return EXIT_OK


def _worst(reports, severity):
    failed = [r for r in reports if not r.passed]
    pool = failed or reports
    return max(pool, key=severity)


def cmd_verify(args) -> int:
    from .verification import run_suite, severity

    if args.k_max < 2 or args.k_max > cfgmod.MAX_TOTAL_ORDER:
        raise cfgmod.ConfigError(f"--k-max must lie in [2, {cfgmod.MAX_TOTAL_ORDER}]")
    step = args.step if args.step is not None else 1e-3
    reports = run_suite(args.suite, args.k_max, args.seed, step, _threads(args))
    payload = [r.to_dict() for r in reports]
    out = args.out or f"verify_{args.suite}.json"
    _atomic_write(out, _dump(payload))
    n_fail = sum(not r.passed for r in reports)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.max_residual:.3e} (tol {r.tolerance:.1e})")
    print(f"{len(reports) - n_fail}/{len(reports)} checks passed; report in {out}")
    if n_fail:
        w = _worst(reports, severity)
        print(f"worst failure: {w.name} residual {w.max_residual:.3e} > {w.tolerance:.1e}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_elastic(args) -> int:
    from .elastic import check_linearization

    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.RunConfig()
    mcfg = cfg.medium or cfgmod.MediumConfig()
    if args.seed is not None and mcfg.preset == "random_smooth":
        mcfg = mcfg.model_copy(update={"seed": args.seed})
    medium = cfgmod.build_medium(mcfg)
    entry = cfgmod.build_entry(mcfg)
    step = args.step if args.step is not None else cfg.step
    expected = {"constant_c_flat": 2.0, "isotropic": 0.0}.get(mcfg.preset)
    r = check_linearization(medium, entry, mcfg.omega0_list, step, expected_phase_per_omega=expected)
    d = r.details
    print(f"medium {medium.name}, entry beta={entry.beta:.6f} phi={entry.phi:.6f}")
    for w0, th in zip(d["omega0"], d["theta"]):
        print(f"omega0 = {w0:.1e}  theta = {th:.15e}")
    print(f"L22 reduction residual = {r.max_residual:.3e}")
    print(f"linearization slope    = {d['slope']:.4f}")
    out = args.out or "elastic.json"
    _atomic_write(out, _dump(r.to_dict()))
    print(f"{'PASS' if r.passed else 'FAIL'}; report in {out}")
    return EXIT_OK if r.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mixtrans", description="Mixed ray transforms on conformal disks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help="output path")
        sp.add_argument("--step", type=float, help="integrator step")
        sp.add_argument("--threads", type=int, help="worker threads, 0 = all cores (env MIXTRANS_THREADS)")

    s = sub.add_parser("sinogram", help="sample a transform on a fan grid")
    s.add_argument("--config", required=True, help="JSON run config")
    common(s)
    s.set_defaults(func=cmd_sinogram)

    v = sub.add_parser("verify", help="run a verification battery")
    v.add_argument("--suite", default="all", choices=["all", "algebra", "transforms", "elastic"])
    v.add_argument("--k-max", type=int, default=5, dest="k_max")
    v.add_argument("--seed", type=int, default=0)
    common(v)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("elastic", help="shear-wave phase and its linearization")
    e.add_argument("--config", help="JSON run config with a medium section")
    e.add_argument("--seed", type=int)
    common(e)
    e.set_defaults(func=cmd_elastic)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except cfgmod.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except TrappedRayError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DomainError, FloatingPointError, ValueError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
