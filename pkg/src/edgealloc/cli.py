"""Command-line front end: ``edgealloc {generate,solve,verify,export-lp,bench}``."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench
from .ldm import DiscretizationConfig, discretize, export_lp, prune
from .model import (UnknownIdError, ValidationError, load_instance, load_solution, save_instance,
                    save_solution)
from .solver import DEFAULT_BUDGET_NODES, DEFAULT_BUDGET_SECS, OracleRefused, solve_brute, solve_ldm
from .taskgen import SMALL_ARCHITECTURE, ArchitectureConfig, TasksetGenConfig, generate_taskset, \
    sample_architecture
from .verify import DEFAULT_TOL, verify
from .zsg import zsg_solve

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_UNPROVEN = 0, 1, 2, 3
ARCHITECTURES = {"full": ArchitectureConfig(), "small": SMALL_ARCHITECTURE}

EPILOG = """exit codes:
  0  success
  1  verify found the solution infeasible
  2  usage error or unreadable / invalid input document
  3  solve --strict: budget exhausted before optimality was proven

The seed defaults to $EDGEALLOC_SEED, or 0 when that is unset."""


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("EDGEALLOC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"EDGEALLOC_SEED must be an integer, got {raw!r}") from None


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _units(args, required: bool) -> DiscretizationConfig | None:
    if args.b_unit is None and args.c_unit is None and not required:
        return None
    if args.b_unit is None or args.c_unit is None:
        raise UsageError("--b-unit and --c-unit are required together")
    try:
        return DiscretizationConfig(args.b_unit, args.c_unit)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_generate(args) -> int:
    try:
        cfg = TasksetGenConfig(args.tasks, args.ub, args.uc)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rng = np.random.default_rng(args.seed)
    arch = sample_architecture(ARCHITECTURES[args.arch], rng)
    _emit(save_instance(generate_taskset(arch, cfg, rng)), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    instance = load_instance(_read(args.instance))
    if args.algo == "zsg":
        if args.b_unit is not None or args.c_unit is not None:
            raise UsageError("--b-unit/--c-unit apply only to ldm and brute")
        solution, proven = zsg_solve(instance), None
    else:
        cfg = _units(args, required=True)
        if args.algo == "ldm":
            solution, stats = solve_ldm(instance, cfg, use_prune=not args.no_prune,
                                        budget_nodes=args.budget_nodes,
                                        budget_secs=args.budget_secs)
            proven = stats.proven_optimal
            _note(f"ldm: {stats.nodes} nodes, {stats.wall_time:.3f} s, "
                  f"{'optimal' if proven else 'budget exhausted, best found'}")
        else:
            try:
                solution = solve_brute(instance, cfg)
            except OracleRefused as exc:
                raise UsageError(str(exc)) from None
            proven = True
    report = verify(instance, solution, args.tol)
    if not report.feasible:
        # solvers only emit feasible allocations; reaching here is a bug
        _note(f"internal error: emitted solution fails verification: {sorted(report.tags())}")
        return EXIT_INFEASIBLE
    _emit(save_solution(solution), args.out)
    _note(f"profit {solution.profit:g} of {instance.total_profit:g}, "
          f"{len(solution.assignments)}/{len(instance.tasks)} tasks")
    if args.strict and proven is False:
        return EXIT_UNPROVEN
    return EXIT_OK


def cmd_verify(args) -> int:
    instance = load_instance(_read(args.instance))
    solution = load_solution(_read(args.solution))
    report = verify(instance, solution, args.tol)
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    if not report.feasible:
        _note("infeasible: " + ", ".join(sorted(report.tags())))
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_export_lp(args) -> int:
    instance = load_instance(_read(args.instance))
    cfg = _units(args, required=True)
    model = discretize(instance, cfg)
    if not args.no_prune:
        model = prune(model, instance, cfg)
    if args.stats:
        _emit(json.dumps(model.stats(), indent=2) + "\n", args.out)
    else:
        _emit(export_lp(model), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        grid = bench.CampaignGrid(
            seeds=tuple(range(args.seeds)), sizes=tuple(args.sizes), ub=tuple(args.ub),
            uc=tuple(args.uc) if args.uc else None, algorithms=tuple(args.algos),
            architecture=ARCHITECTURES[args.arch], arch_seed=args.seed,
            budget_secs=args.budget_secs, budget_nodes=args.budget_nodes, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    def progress(done, total, rec):
        if args.verbose:
            _note(f"[{done}/{total}] {rec.taskset_id} {rec.algo} ratio={rec.ratio:.4f} "
                  f"optimal={rec.optimal} {rec.wall_ms:.0f} ms")

    result = bench.run_campaign(grid, progress=progress)
    paths = bench.write_campaign(result, args.out, plots=not args.no_plots)
    for p in paths:
        _note(f"wrote {p}")
    json.dump(result.summary["algorithms"], sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="edgealloc", epilog=EPILOG, formatter_class=fmt,
                                     description="Deadline-constrained task mapping and "
                                                 "bandwidth/compute allocation for edge clouds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (default: $EDGEALLOC_SEED or 0)")
    common.add_argument("-o", "--out", default=None, help="output path (default: stdout)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL,
                        help=f"relative feasibility tolerance (default: {DEFAULT_TOL:g})")
    units = argparse.ArgumentParser(add_help=False)
    units.add_argument("--b-unit", type=float, default=None, help="minimum bandwidth unit")
    units.add_argument("--c-unit", type=float, default=None, help="minimum compute unit")
    units.add_argument("--no-prune", action="store_true",
                       help="keep variables that can never meet the deadline")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", parents=[common], epilog=EPILOG, formatter_class=fmt,
                       help="sample an architecture and a taskset")
    p.add_argument("--tasks", type=int, required=True, help="number of tasks")
    p.add_argument("--ub", type=float, required=True, help="bandwidth utilization per AP, in (0, 1]")
    p.add_argument("--uc", type=float, required=True,
                   help="total normalized compute utilization, in (0, tasks]")
    p.add_argument("--arch", choices=sorted(ARCHITECTURES), default="full",
                   help="full: 20 APs, 20 edge and 5 cloud servers; small: 4 APs, 4+1 servers")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", parents=[common, units], epilog=EPILOG, formatter_class=fmt,
                       help="compute an allocation")
    p.add_argument("-i", "--instance", required=True, help="instance document ('-' for stdin)")
    p.add_argument("--algo", choices=("zsg", "ldm", "brute"), default="zsg")
    p.add_argument("--budget-nodes", type=int, default=DEFAULT_BUDGET_NODES,
                   help=f"ldm search node budget (default: {DEFAULT_BUDGET_NODES})")
    p.add_argument("--budget-secs", type=float, default=DEFAULT_BUDGET_SECS,
                   help=f"ldm wall-clock budget in seconds (default: {DEFAULT_BUDGET_SECS:g})")
    p.add_argument("--strict", action="store_true",
                   help="exit 3 when the ldm budget runs out before optimality is proven")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", parents=[common], epilog=EPILOG, formatter_class=fmt,
                       help="check a solution against an instance")
    p.add_argument("-i", "--instance", required=True)
    p.add_argument("-s", "--solution", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-lp", parents=[common, units], epilog=EPILOG, formatter_class=fmt,
                       help="write the discretized 0-1 model in CPLEX LP format")
    p.add_argument("-i", "--instance", required=True)
    p.add_argument("--stats", action="store_true",
                   help="print variable/row/nonzero counts as JSON instead of the model")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("bench", parents=[common], epilog=EPILOG, formatter_class=fmt,
                       help="run a benchmark campaign, write CSV, summary and plots")
    p.add_argument("--seeds", type=int, default=10, help="tasksets per grid cell")
    p.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 30])
    p.add_argument("--ub", type=float, nargs="+", default=[0.3, 0.6, 0.9])
    p.add_argument("--uc", type=float, nargs="+", default=None,
                   help="compute utilizations (default: 3 levels up to the architecture total)")
    p.add_argument("--algos", nargs="+", default=["zsg", "ldm-5", "ldm-15"],
                   help="zsg, ldm-U, ldm-B-C, brute-U, brute-B-C")
    p.add_argument("--arch", choices=sorted(ARCHITECTURES), default="small")
    p.add_argument("--budget-secs", type=float, default=None,
                   help="fixed per-solve budget (default: a multiple of the slowest ZSG run)")
    p.add_argument("--budget-nodes", type=int, default=DEFAULT_BUDGET_NODES)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true", help="log every run to stderr")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.command == "bench" and args.out is None:
            raise UsageError("bench needs --out DIR")
        return args.func(args)
    except UsageError as exc:
        _note(f"edgealloc: error: {exc}")
        return EXIT_USAGE
    except ValidationError as exc:
        _note("edgealloc: invalid input document:")
        for v in exc.violations:
            _note(f"  {v}")
        return EXIT_USAGE
    except UnknownIdError as exc:
        _note(f"edgealloc: solution does not match instance: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
