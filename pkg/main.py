"""
locopt: locational-analysis optimization toolkit.
Command-line entry point: solve, check, generate and benchmark.

Exit codes: 0 solved/feasible, 1 self-test mismatch, 2 proven infeasible,
3 budget exceeded, 4 input or usage error.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from agents.grasp_agent import GraspAgent, GraspParams
from agents.lagrangian_agent import LagrangianAgent, LagrangianParams
from services.benchmark_service import BenchConfig, run_benchmark, run_selftest
from services.committee_service import CommitteeProblem, k_centrum_solve, minisum_solve
from services.core import BudgetExceededError, InfeasibleError, ParameterError
from services.instance_service import (
    format_native,
    generate_pmpdc,
    generate_profiles,
    parse_native,
    parse_orlib_pmedian,
)
from services.pmedian_service import (
    Infeasible,
    PMedianInstance,
    exact_solve,
    feasibility_check,
    solve_transformed,
)
from services.report_service import ReportService
from services.sensor_service import (
    GridSpec,
    Rect,
    SensorScenario,
    ZonePartition,
    solve_max_area,
    solve_minmaxmax,
    solve_weighted_area,
    write_field_csv,
)
from utils.config import load_settings
from utils.logger import setup_logger

EXIT_OK, EXIT_MISMATCH, EXIT_INFEASIBLE, EXIT_BUDGET, EXIT_INPUT = 0, 1, 2, 3, 4

logger = logging.getLogger("locopt")


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=["table", "csv"], default="table")
    common.add_argument("--out", default=None, help="write results here instead of stdout")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = CliParser(prog="locopt", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    pm = sub.add_parser("solve-pmpdc", parents=[common], help="p-median with maximum distance limits")
    pm.add_argument("path")
    pm.add_argument("--solver", choices=["exact", "exact-bigm", "lagrangian", "grasp"], default="exact")
    pm.add_argument("--orlib", action="store_true", help="read an OR-Library pmed file")
    pm.add_argument("--beta", type=float, default=None)
    pm.add_argument("--q", type=int, default=None)
    pm.add_argument("--p", type=int, default=None, help="override the instance's p")
    pm.add_argument("--iterations", type=int, default=None)
    pm.add_argument("--alpha", type=float, default=None)
    pm.add_argument("--workers", type=int, default=1)

    fc = sub.add_parser("feascheck", parents=[common], help="set-cover feasibility of a PMPDC instance")
    fc.add_argument("path")
    fc.add_argument("--orlib", action="store_true")
    fc.add_argument("--beta", type=float, default=None)
    fc.add_argument("--q", type=int, default=None)
    fc.add_argument("--p", type=int, default=None)

    cm = sub.add_parser("solve-committee", parents=[common], help="k-centrum approval committee")
    cm.add_argument("path")
    cm.add_argument("--k", type=int, default=None)
    cm.add_argument("--criterion", choices=["kcentrum", "minisum", "minimax"], default="kcentrum")
    cm.add_argument("--strategy", choices=["exact", "heuristic"], default="exact")
    cm.add_argument("--size", type=int, default=None, help="fixed committee size")

    sn = sub.add_parser("solve-sensors", parents=[common], help="sensor placement on a rectangle")
    sn.add_argument("path", nargs="?")
    sn.add_argument("--criterion", choices=["minmaxmax", "max-area", "weighted"], required=True)
    sn.add_argument("--a", type=float, default=None)
    sn.add_argument("--b", type=float, default=None)
    sn.add_argument("--p", type=int, default=3)
    sn.add_argument("--delta", type=float, default=None)
    sn.add_argument("--Delta", type=float, default=None)
    sn.add_argument("--cuts", type=_floats, default=None)
    sn.add_argument("--weights", type=_floats, default=None)
    sn.add_argument("--resolution", type=float, default=None)
    sn.add_argument("--levels", type=int, default=None)
    sn.add_argument("--zoom", type=int, default=None)
    sn.add_argument("--field-csv", default=None, help="also write the eccentricity field as CSV")

    gen = sub.add_parser("gen", parents=[common], help="generate a random instance")
    gen.add_argument("kind", choices=["pmpdc", "approval"])
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=int, default=2)
    gen.add_argument("--s-quantile", type=float, default=0.5)
    gen.add_argument("--m", type=int, default=None)
    gen.add_argument("--density", type=float, default=0.5)
    gen.add_argument("--k", type=int, default=1)

    bench = sub.add_parser("bench", parents=[common], help="benchmark solvers or run the oracle self-test")
    bench.add_argument("--selftest", action="store_true")
    bench.add_argument("--config", default=None, help="JSON file with BenchConfig fields")
    bench.add_argument("--solvers", default=None, help="comma-separated solver names")
    bench.add_argument("--pmpdc-instances", type=int, default=None)
    bench.add_argument("--committee-profiles", type=int, default=None)
    bench.add_argument("--workers", type=int, default=None)
    bench.add_argument("--include-timing", action="store_true")
    bench.add_argument("--summary", default=None, help="write the JSON run summary here")
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _load_pmpdc(args, settings) -> PMedianInstance:
    text = _read(args.path)
    if args.orlib:
        beta = args.beta if args.beta is not None else settings.ORLIB_BETA
        inst = parse_orlib_pmedian(text, beta, args.q, name=args.path)
    else:
        inst = parse_native(text, name=args.path)
        if not isinstance(inst, PMedianInstance):
            raise ParameterError(f"{args.path} is not a pmpdc instance")
    return inst.with_p(args.p) if args.p is not None else inst


def _solve_pmpdc(args, settings, report: ReportService) -> int:
    inst = _load_pmpdc(args, settings)
    record = {"instance": inst.name, "solver": args.solver, "p": inst.p, "seed": args.seed}
    if args.solver == "exact":
        result = exact_solve(inst, settings)
    elif args.solver == "exact-bigm":
        result = solve_transformed(inst, budget=settings.EXACT_ENUMERATION_BUDGET)
    elif args.solver == "grasp":
        overrides = {"seed": args.seed, "workers": args.workers}
        if args.iterations is not None:
            overrides["iterations"] = args.iterations
        if args.alpha is not None:
            overrides["rcl_alpha"] = args.alpha
        result, run = GraspAgent(GraspParams.from_settings(settings, **overrides), settings=settings).solve(inst)
        record["iterations"] = run.iterations
    else:
        overrides = {"seed": args.seed}
        if args.iterations is not None:
            overrides["max_iters"] = args.iterations
        bound, result, run = LagrangianAgent(LagrangianParams.from_settings(settings, **overrides),
                                             settings=settings).bound(inst)
        record["lower_bound"] = bound
        record["iterations"] = run.iterations
        record["gap"] = run.gap
        if result is None:
            result = Infeasible("no feasible incumbent from the repair stage",
                                uncovered_demand=run.notes.get("uncovered_demand"))

    if isinstance(result, Infeasible):
        record.update({"status": "infeasible", "reason": result.reason})
        record.update({k: v for k, v in result.witness.items()})
        _emit(report.key_values(record, args.format), args.out)
        return EXIT_INFEASIBLE
    record.update({
        "status": "feasible" if result.feasible else "infeasible",
        "objective": result.objective,
        "open": " ".join(str(j) for j in result.open),
    })
    _emit(report.key_values(record, args.format), args.out)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def _feascheck(args, settings, report: ReportService) -> int:
    inst = _load_pmpdc(args, settings)
    feas = feasibility_check(inst, settings)
    record = {
        "instance": inst.name,
        "p": inst.p,
        "mode": "exact" if feas.exact else "bounds",
        "p_min": feas.p_min,
        "p_lower": feas.p_lower,
        "p_upper": feas.p_upper,
        "uncovered_demand": feas.uncovered_demand,
        "feasible": "undetermined" if feas.feasible is None else feas.feasible,
    }
    if feas.cover:
        record["cover"] = " ".join(str(j) for j in feas.cover)
    _emit(report.key_values(record, args.format), args.out)
    if feas.feasible is None:
        return EXIT_BUDGET
    return EXIT_OK if feas.feasible else EXIT_INFEASIBLE


def _solve_committee(args, settings, report: ReportService) -> int:
    prob = parse_native(_read(args.path), name=args.path)
    if not isinstance(prob, CommitteeProblem):
        raise ParameterError(f"{args.path} is not an approval profile")
    profile = prob.profile
    if args.criterion == "minisum":
        sol, k = minisum_solve(profile), profile.n_voters
    else:
        k = 1 if args.criterion == "minimax" else (args.k if args.k is not None else prob.k)
        sol = k_centrum_solve(CommitteeProblem(profile, k, args.size), args.strategy, args.seed, settings)
    record = {
        "instance": args.path,
        "criterion": args.criterion,
        "strategy": "closed-form" if args.criterion == "minisum" else args.strategy,
        "k": k,
        "committee": sol.committee.bits,
        "objective": sol.objective,
        "distances": " ".join(str(d) for d in sol.distances),
        "seed": args.seed,
    }
    _emit(report.key_values(record, args.format), args.out)
    return EXIT_OK


def _solve_sensors(args, settings, report: ReportService) -> int:
    scenario = SensorScenario(Rect(1.0, 1.0))
    if args.path:
        scenario = parse_native(_read(args.path), name=args.path)
        if not isinstance(scenario, SensorScenario):
            raise ParameterError(f"{args.path} is not a sensors scenario")
    elif args.a is None or args.b is None:
        raise ParameterError("solve-sensors needs a scenario file or both --a and --b")
    rect = Rect(args.a if args.a is not None else scenario.rect.a, args.b if args.b is not None else scenario.rect.b)
    delta = args.delta if args.delta is not None else scenario.delta
    Delta = args.Delta if args.Delta is not None else scenario.Delta
    zones = scenario.zones
    if args.weights is not None:
        cuts = args.cuts if args.cuts is not None else [rect.a * i / len(args.weights) for i in range(1, len(args.weights))]
        zones = ZonePartition(tuple(cuts), tuple(args.weights), strict_order=False)
    default = GridSpec.default(rect, settings)
    grid = GridSpec(args.resolution or default.resolution,
                    default.refinement_levels if args.levels is None else args.levels,
                    args.zoom or default.zoom)

    record = {"criterion": args.criterion, "a": rect.a, "b": rect.b}
    if args.criterion == "minmaxmax":
        if delta is None:
            raise ParameterError("min-max-max needs --delta")
        sigma, value = solve_minmaxmax(rect, args.p, delta, grid)
        record.update({"delta": delta, "objective": value})
    elif args.criterion == "max-area":
        if Delta is None:
            raise ParameterError("max-area needs --Delta")
        sigma, value = solve_max_area(rect, Delta, grid, settings)
        record.update({"Delta": Delta, "area": value})
    else:
        if zones is None:
            raise ParameterError("weighted criterion needs zone --weights (and optionally --cuts)")
        sigma, value = solve_weighted_area(rect, zones, grid, settings)
        record.update({"weights": " ".join(str(w) for w in zones.weights), "value": value})
    for i, (x, y) in enumerate(sigma.points, start=1):
        record[f"sensor_{i}"] = f"{x:.6f} {y:.6f}"
    if args.field_csv:
        write_field_csv(args.field_csv, rect, grid, Delta)
    _emit(report.key_values(record, args.format), args.out)
    return EXIT_OK


def _gen(args) -> int:
    if args.kind == "pmpdc":
        obj = generate_pmpdc(args.seed, args.n, args.p, args.s_quantile)
    else:
        profile = generate_profiles(args.seed, args.n, args.m if args.m is not None else args.n, args.density)
        obj = CommitteeProblem(profile, args.k)
    _emit(format_native(obj), args.out)
    return EXIT_OK


def _bench(args, settings, report: ReportService) -> int:
    if args.selftest:
        rows, mismatches = run_selftest(args.seed, settings=settings)
        _emit(report.render(rows, args.format), args.out)
        return EXIT_MISMATCH if mismatches else EXIT_OK
    values = json.loads(_read(args.config)) if args.config else {}
    values["seed"] = args.seed
    if args.solvers is not None:
        values["solvers"] = [s.strip() for s in args.solvers.split(",") if s.strip()]
    for name in ("pmpdc_instances", "committee_profiles", "workers"):
        if getattr(args, name) is not None:
            values[name] = getattr(args, name)
    if args.include_timing:
        values["include_timing"] = True
    config = BenchConfig(**values)
    rows = run_benchmark(config, settings)
    table = ReportService(include_timing=config.include_timing)
    _emit(table.render(rows, args.format), args.out)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as f:
            f.write(table.run_summary(config.model_dump(), rows))
    return EXIT_OK


def dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code not in (0, None) else EXIT_OK

    settings = load_settings(use_env=False)
    level = {0: settings.LOG_LEVEL, 1: "INFO"}.get(args.verbose, "DEBUG")
    setup_logger(level, settings.LOG_JSON)
    report = ReportService()
    try:
        if args.command == "solve-pmpdc":
            return _solve_pmpdc(args, settings, report)
        if args.command == "feascheck":
            return _feascheck(args, settings, report)
        if args.command == "solve-committee":
            return _solve_committee(args, settings, report)
        if args.command == "solve-sensors":
            return _solve_sensors(args, settings, report)
        if args.command == "gen":
            return _gen(args)
        return _bench(args, settings, report)
    except BudgetExceededError as e:
        logger.error(f"[main] budget exceeded: {e}")
        sys.stderr.write(f"budget exceeded: {e}\n")
        return EXIT_BUDGET
    except InfeasibleError as e:
        sys.stderr.write(f"infeasible: {e}\n")
        _emit(ReportService().key_values({"status": "infeasible", **e.witness}, args.format), args.out)
        return EXIT_INFEASIBLE
    except (OSError, ValueError) as e:
        sys.stderr.write(f"input error: {e}\n")
        return EXIT_INPUT


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
