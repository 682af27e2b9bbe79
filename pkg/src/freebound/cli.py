"""Command-line front end.

    freebound boundary --spec problem.json --method both --format csv
    freebound verify   --spec problem.json --suite residual
    freebound simulate --spec problem.json --x 1 --y 0.1 --compare-scales

A problem spec is a JSON object (a file path or an inline string):

    {"diffusion": {"kind": "gbm", "mu": 0, "sigma": 1, "r": 0.5},
     "profit": {"kind": "cobb_douglas", "alpha": 0.5, "beta": 0.5}}

Exit codes: 0 success, 1 verification failure, 2 unsupported configuration
or invalid input, 3 assumption violation, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .closed_form import closed_form_boundary, has_closed_form
from .diffusions import diffusion_from_dict
from .errors import (AssumptionViolation, DomainViolation, NumericalFailure,
                     UnsupportedConfiguration)
from .montecarlo import (MCConfig, foc_spot_check, policy_comparison, policy_payoff,
                         verify_backward_equation, verify_joint_law)
from .profits import profit_from_dict
from .solver import BoundaryCurve, PointwiseBoundary, residual_report, solve_on_grid

SCHEMA = "fb/1"
EXIT_OK, EXIT_VERIFY, EXIT_UNSUPPORTED, EXIT_ASSUMPTION, EXIT_NUMERICAL = 0, 1, 2, 3, 4
SUITES = ("residual", "backward", "jointlaw", "policy", "foc")


class VerificationFailed(Exception):
    pass


def load_spec(text: str) -> dict:
    if text.lstrip().startswith("{"):
        data = json.loads(text)
    else:
        with open(text) as fh:
            data = json.load(fh)
    if "diffusion" not in data or "profit" not in data:
        raise DomainViolation("spec needs 'diffusion' and 'profit' objects")
    if "r" in data and "r" not in data["diffusion"]:
        data["diffusion"] = dict(data["diffusion"], r=data["r"])
    return data


def build_problem(spec: dict):
    return diffusion_from_dict(spec["diffusion"]), profit_from_dict(spec["profit"])


def make_grid(args) -> np.ndarray:
    if not (0 < args.grid_min < args.grid_max) or args.grid_points < 2:
        raise DomainViolation("need 0 < grid-min < grid-max and grid-points >= 2")
    return np.geomspace(args.grid_min, args.grid_max, args.grid_points)


def manifest(args, diffusion, profit, extra=None) -> dict:
    man = {"schema": SCHEMA, "command": args.command,
           "problem": {"diffusion": diffusion.to_dict(), "profit": profit.to_dict()},
           "tolerances": {"tol": args.tol},
           "seed": getattr(args, "seed", None),
           "output": args.out, "version": __version__}
    if extra:
        man.update(extra)
    return man


def manifest_hash(man: dict) -> str:
    return hashlib.sha256(json.dumps(man, sort_keys=True).encode()).hexdigest()


def _fmt(v) -> str:
    return "%.17g" % v


def render(man: dict, result: dict, table=None, fmt: str = "json") -> str:
    digest = manifest_hash(man)
    if fmt == "csv" and table is not None:
        header, rows = table
        buf = io.StringIO()
        buf.write(f"# schema={SCHEMA}\n# manifest_sha256={digest}\n")
        buf.write("# manifest=" + json.dumps(man, sort_keys=True) + "\n")
        buf.write(",".join(header) + "\n")
        for row in rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()
    doc = {"schema": SCHEMA, "manifest": man, "manifest_sha256": digest, "result": result}
    return json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n"


def emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def read_boundary_csv(path: str) -> BoundaryCurve:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                continue  # header
    arr = np.array(rows)
    return BoundaryCurve(arr[:, 0], arr[:, 1], meta={"source": path})


def resolve_boundary(args, diffusion, profit):
    """Boundary for verify/simulate: a CSV file, the closed form, or the
    generic solver evaluated pointwise wherever a check needs it."""
    if getattr(args, "boundary", None):
        return read_boundary_csv(args.boundary), "file"
    method = args.method
    if method == "both":
        method = "closed" if has_closed_form(diffusion, profit) else "generic"
    if method == "closed":
        return closed_form_boundary(diffusion, profit), "closed"
    return PointwiseBoundary(diffusion, profit), "generic"


# ---------------------------------------------------------------------------
# commands

def cmd_boundary(args):
    diffusion, profit = build_problem(load_spec(args.spec))
    grid = make_grid(args)
    header, cols, result = ["x"], [grid], {"x": grid.tolist()}
    if args.method in ("closed", "both"):
        closed = np.asarray(closed_form_boundary(diffusion, profit)(grid))
        BoundaryCurve(grid, closed)  # monotonicity / positivity check
        header.append("b_closed")
        cols.append(closed)
        result["b_closed"] = closed.tolist()
    if args.method in ("generic", "both"):
        generic = solve_on_grid(diffusion, profit, grid, tol=min(args.tol, 1e-12)).values
        header.append("b_generic")
        cols.append(generic)
        result["b_generic"] = generic.tolist()
    if args.method == "both":
        rel = np.abs(cols[2] / cols[1] - 1.0)
        header.append("rel_diff")
        cols.append(rel)
        result["rel_diff"] = rel.tolist()
        result["max_rel_diff"] = float(rel.max())
    man = manifest(args, diffusion, profit, {"method": args.method,
                                             "grid": [args.grid_min, args.grid_max, args.grid_points]})
    emit(render(man, result, (header, list(zip(*cols))), args.format), args.out)
    return EXIT_OK


def _mc_config(args) -> MCConfig:
    return MCConfig(paths=args.paths, step=args.step, base_seed=args.seed)


def cmd_verify(args):
    diffusion, profit = build_problem(load_spec(args.spec))
    boundary, source = resolve_boundary(args, diffusion, profit)
    suites = SUITES if args.suite == "all" else (args.suite,)
    cfg = _mc_config(args)
    checks = []
    for suite in suites:
        if suite == "residual":
            xs = np.geomspace(args.grid_min, args.grid_max, args.residual_points)
            rep = residual_report(diffusion, profit, boundary, xs)
            checks.append({"name": "residual", "passed": bool(rep.max_abs_residual <= args.tol),
                           "tolerance": args.tol, **rep.to_dict()})
        elif suite == "backward":
            rep = verify_backward_equation(diffusion, profit, boundary, args.x, cfg)
            checks.append(rep.to_dict())
        elif suite == "jointlaw":
            rep, det = verify_joint_law(diffusion, args.x, cfg)
            checks.append({"name": "joint_law", "passed": det["passed"],
                           **{k: v for k, v in det.items() if k != "passed"}})
        elif suite == "policy":
            outcomes, reps = policy_comparison(diffusion, profit, boundary, args.x, args.y, cfg)
            checks.append({"name": "policy_optimality",
                           "passed": all(r.passed for r in reps),
                           "J": {f"{k:g}": v.to_dict() for k, v in outcomes.items()},
                           "comparisons": [r.to_dict() for r in reps]})
        elif suite == "foc":
            reps = foc_spot_check(diffusion, profit, boundary, args.x, args.y, cfg)
            checks.append({"name": "first_order_conditions",
                           "passed": all(r.passed for r in reps),
                           "checks": [r.to_dict() for r in reps]})
    failed = [c["name"] for c in checks if not c["passed"]]
    result = {"boundary_source": source, "checks": checks, "passed": not failed,
              "failed": failed}
    man = manifest(args, diffusion, profit, {"suite": args.suite, "method": args.method,
                                             "mc": cfg.to_dict(), "x": args.x, "y": args.y})
    emit(render(man, result), args.out)
    if failed:
        raise VerificationFailed("failed checks: " + ", ".join(failed))
    return EXIT_OK


def cmd_simulate(args):
    diffusion, profit = build_problem(load_spec(args.spec))
    boundary, source = resolve_boundary(args, diffusion, profit)
    cfg = _mc_config(args)
    if args.compare_scales:
        outcomes, reps = policy_comparison(diffusion, profit, boundary, args.x, args.y, cfg)
        result = {"J_table": [{"scale": k, **v.to_dict()} for k, v in sorted(outcomes.items())],
                  "comparisons": [r.to_dict() for r in reps]}
    else:
        result = policy_payoff(diffusion, profit, boundary, args.x, args.y, cfg).to_dict()
    result["boundary_source"] = source
    man = manifest(args, diffusion, profit, {"mc": cfg.to_dict(), "x": args.x, "y": args.y,
                                             "method": args.method})
    emit(render(man, result), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True, help="problem JSON file or inline JSON")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--grid-min", type=float, default=1e-2)
    common.add_argument("--grid-max", type=float, default=1e2)
    common.add_argument("--grid-points", type=int, default=200)
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--method", choices=("closed", "generic", "both"), default="both")

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--paths", type=int, default=100_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--step", type=float, default=1e-3)
    mc.add_argument("--x", type=float, default=1.0, help="initial state")
    mc.add_argument("--y", type=float, default=0.1, help="initial capacity")
    mc.add_argument("--boundary", default=None, help="boundary CSV (x,b) to use")

    parser = argparse.ArgumentParser(prog="freebound",
                                     description="Free boundaries of irreversible investment problems")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("boundary", parents=[common], help="tabulate b(x) on a grid")
    p.set_defaults(func=cmd_boundary)
    p = sub.add_parser("verify", parents=[common, mc], help="run verification suites")
    p.add_argument("--suite", choices=SUITES + ("all",), default="residual")
    p.add_argument("--residual-points", type=int, default=20)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("simulate", parents=[common, mc], help="Monte Carlo policy payoff")
    p.add_argument("--compare-scales", action="store_true",
                   help="also evaluate the boundary scaled by 0.5 and 2")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if os.environ.get("FB_THREADS") is not None:
        try:
            int(os.environ["FB_THREADS"])
        except ValueError:
            print("error: FB_THREADS must be an integer", file=sys.stderr)
            return EXIT_UNSUPPORTED
    try:
        return args.func(args)
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except UnsupportedConfiguration as exc:
        print(f"unsupported configuration: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainViolation, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED


if __name__ == "__main__":
    sys.exit(main())
