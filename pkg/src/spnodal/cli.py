"""Command-line entry point: ``python -m spnodal <command> [options]``.

Exit codes: 0 success, 1 a check failed, 2 bad configuration or usage.
"""
from __future__ import annotations

import argparse
import sys

from .harness import (
    ConfigError,
    check_sweep,
    level_inequality,
    load_config,
    sweep_R,
    verify_lemmas,
    write_results,
)
from .models import NonlinearityModel, check_f_hypotheses, check_V_hypotheses, make_potential
from .solver import MaxItersExceeded, solve_ground, solve_nodal

OK, FAILED, CONFIG_ERROR = 0, 1, 2


def _radii(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radius list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty radius list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spnodal", description="Radial Schrodinger-Poisson nodal solver")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="key = value config file")
        if out:
            p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--p", type=float, help="power of the nonlinearity")
        p.add_argument("--R", type=float, help="ball radius")
        p.add_argument("--n", type=int, help="grid intervals")
        p.add_argument("--seed", type=int)
        p.add_argument("--potential", choices=("constant", "radial_shifted"))

    common(sub.add_parser("check-hypotheses", help="sampled checks of the f and V hypotheses"), out=False)
    common(sub.add_parser("solve-ground", help="ground state on the Nehari set"))
    common(sub.add_parser("solve-nodal", help="least-energy sign-changing state"))
    sw = sub.add_parser("sweep-R", help="nodal levels over a range of radii at fixed spacing")
    common(sw)
    sw.add_argument("--radii", type=_radii, default=[4.0, 6.0, 8.0, 12.0, 16.0])
    sw.add_argument("--workers", type=int, default=1)
    common(sub.add_parser("level-inequality", help="nodal level against c + c_inf (--R is R_large)"))
    common(sub.add_parser("verify-lemmas", help="identities, bounds, projection and decay checks"), out=False)
    return parser


def _config(args):
    return load_config(args.config, R_support=args.R, n=args.n, p=args.p, seed=args.seed, potential=args.potential)


def _print_checks(checks) -> bool:
    ok = True
    for name, passed, detail in checks:
        print(f"{name:<24s} {'PASS' if passed else 'FAIL'}  {detail}")
        ok &= bool(passed)
    return ok


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return CONFIG_ERROR if exc.code else OK

    try:
        if args.command == "level-inequality":
            # --R names R_large here; the base config keeps its own radius and spacing
            R_large = 16.0 if args.R is None else args.R
            args.R = None
        config = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR

    cmd = args.command
    try:
        if cmd == "check-hypotheses":
            frep = check_f_hypotheses(NonlinearityModel(config.p))
            vrep = check_V_hypotheses(make_potential(config.potential, config.V_inf))
            for line in frep.lines() + vrep.lines():
                print(line)
            return OK if frep.passed and vrep.passed else FAILED

        if cmd == "verify-lemmas":
            return OK if _print_checks(verify_lemmas(config)) else FAILED

        if cmd in ("solve-ground", "solve-nodal"):
            solve = solve_ground if cmd == "solve-ground" else solve_nodal
            try:
                result = solve(config)
                status = OK
            except MaxItersExceeded as exc:
                print(f"solver: {exc}", file=sys.stderr)
                if exc.best is None:
                    return FAILED
                result, status = exc.best, FAILED
            write_results(result, args.out, config, kind=cmd.replace("-", "_"))
            print(f"level {result.level:.12g}  residual {result.residual:.3g}  nodal domains {result.nodal_domains}")
            want = 1 if cmd == "solve-ground" else 2
            return status if result.nodal_domains == want else FAILED

        if cmd == "sweep-R":
            rows = sweep_R(config, args.radii, workers=args.workers)
            write_results(rows, args.out, config)
            checks = check_sweep(rows)
            for row in rows:
                print(f"R = {row.R:<6g} c_R = {row.c_R:.12g}  residual {row.residual:.3g}  {row.error or ''}")
            print(f"non-increasing: {checks['non_increasing']}  gaps shrinking: {checks['gaps_shrinking']}")
            good = checks["all_ok"] and checks["non_increasing"] and (len(rows) < 3 or checks["gaps_shrinking"])
            return OK if good else FAILED

        if cmd == "level-inequality":
            report = level_inequality(config, R_large)
            write_results(report, args.out, config)
            print(f"c0 ~ {report.c0_estimate:.10g}  c = {report.c:.10g}  c_inf = {report.c_inf:.10g}  gap = {report.gap:.4g}")
            print(f"strict: {report.strict}")
            return OK if report.strict else FAILED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    return CONFIG_ERROR


def main() -> None:
    sys.exit(run_cli())
