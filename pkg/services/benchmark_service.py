"""
Benchmark harness and oracle self-test.

`run_benchmark` generates seeded instances, runs the configured solvers and
returns rows sorted by (instance id, solver) so the emitted table does not
depend on worker scheduling. `run_selftest` checks every solver against
independent brute-force oracles at desk scale.
"""

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from agents.grasp_agent import GraspAgent, GraspParams
from agents.lagrangian_agent import LagrangianAgent, LagrangianParams
from services.committee_service import (
    CommitteeProblem,
    CommitteeSolution,
    committee_objectives_by_k,
    k_centrum_solve,
    minisum_solve,
    objective_value,
)
from services.core import ApprovalProfile, BudgetExceededError, SolverReport
from services.instance_service import generate_pmpdc, generate_profiles
from services.pmedian_service import (
    Infeasible,
    LocationSolution,
    PMedianInstance,
    choose_big_M,
    evaluate,
    exact_solve,
    exact_unconstrained,
    feasibility_check,
    solve_transformed,
    transform_distances,
    verify_solution,
)
from services.report_service import ResultRow
from services.sensor_service import (
    GridSpec,
    Rect,
    SensorSet,
    ZonePartition,
    solve_max_area,
    solve_minmaxmax,
    triangle_area,
    zone_areas,
)
from utils.config import Settings, load_settings

logger = logging.getLogger("locopt.bench")

PMPDC_SOLVERS = ("exact", "exact_bigm", "lagrangian", "grasp")
COMMITTEE_SOLVERS = ("committee_exact", "committee_heuristic", "minisum")


class BenchConfig(BaseModel):
    seed: int = 0
    pmpdc_instances: int = Field(10, ge=1)
    n_range: Tuple[int, int] = (6, 14)
    p_range: Tuple[int, int] = (2, 4)
    s_quantiles: List[float] = Field(default_factory=lambda: [0.3, 0.5, 1.0], min_length=1)
    committee_profiles: int = Field(10, ge=1)
    voters_range: Tuple[int, int] = (3, 12)
    candidates_range: Tuple[int, int] = (3, 12)
    densities: List[float] = Field(default_factory=lambda: [0.2, 0.5, 0.8], min_length=1)
    solvers: List[str] = Field(default_factory=lambda: ["exact", "lagrangian", "grasp"])
    grasp: GraspParams = Field(default_factory=GraspParams)
    lagrangian: LagrangianParams = Field(default_factory=LagrangianParams)
    time_limit_s: float = Field(60.0, gt=0)
    workers: int = Field(1, ge=1)
    include_timing: bool = False

    @model_validator(mode="after")
    def _check(self):
        for name in ("n_range", "p_range", "voters_range", "candidates_range"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must be a nonempty range of positive counts, got {(lo, hi)}")
        if self.p_range[0] > self.n_range[1]:
            raise ValueError("p_range lies above n_range")
        if any(not 0 < q <= 1 for q in self.s_quantiles):
            raise ValueError("s_quantiles must lie in (0, 1]")
        if any(not 0 <= d <= 1 for d in self.densities):
            raise ValueError("densities must lie in [0, 1]")
        unknown = [s for s in self.solvers if s not in PMPDC_SOLVERS + COMMITTEE_SOLVERS]
        if unknown:
            raise ValueError(f"unknown solvers: {', '.join(unknown)}")
        return self


def _relative_gap(value: float, reference: float) -> float:
    return (value - reference) / max(abs(reference), 1.0)


def pmpdc_instances(config: BenchConfig) -> List[PMedianInstance]:
    out = []
    for idx in range(config.pmpdc_instances):
        rng = np.random.default_rng([config.seed, idx])
        n = int(rng.integers(config.n_range[0], config.n_range[1] + 1))
        p = int(rng.integers(config.p_range[0], min(config.p_range[1], n) + 1))
        q = config.s_quantiles[idx % len(config.s_quantiles)]
        out.append(generate_pmpdc(int(rng.integers(2**31)), n, p, q, name=f"pmpdc-{idx:03d}"))
    return out


def committee_profiles(config: BenchConfig) -> List[Tuple[str, ApprovalProfile]]:
    out = []
    for idx in range(config.committee_profiles):
        rng = np.random.default_rng([config.seed, 10_000 + idx])
        n = int(rng.integers(config.voters_range[0], config.voters_range[1] + 1))
        m = int(rng.integers(config.candidates_range[0], config.candidates_range[1] + 1))
        density = config.densities[idx % len(config.densities)]
        out.append((f"committee-{idx:03d}", generate_profiles(int(rng.integers(2**31)), n, m, density)))
    return out


def _guarded(row: ResultRow, action: Callable[[ResultRow], None]) -> ResultRow:
    started = time.perf_counter()
    try:
        action(row)
    except BudgetExceededError as e:
        row.verdict, row.error = "budget", str(e)
    except Exception as e:
        logger.warning(f"[bench] {row.instance_id}/{row.solver} failed: {e}")
        row.verdict, row.error = "error", f"{type(e).__name__}: {e}"
    row.wall_time = time.perf_counter() - started
    return row


class BenchmarkService:
    def __init__(self, config: BenchConfig, settings: Optional[Settings] = None, logger_=None):
        self.config = config
        self.settings = settings or load_settings()
        self.logger = logger_ or logger

    def _pmpdc_rows(self, inst: PMedianInstance) -> List[ResultRow]:
        solvers = [s for s in self.config.solvers if s in PMPDC_SOLVERS]
        if not solvers:
            return []
        ref_report = SolverReport("exact")
        ref_sol, ref_error = None, None
        try:
            ref_sol = exact_solve(inst, self.settings, report=ref_report)
        except BudgetExceededError as e:
            ref_error = e
        reference = ref_sol.objective if isinstance(ref_sol, LocationSolution) else None

        def record(row: ResultRow, result) -> None:
            if isinstance(result, Infeasible):
                row.verdict = "infeasible"
                return
            row.objective = result.objective
            row.verdict = "feasible" if result.feasible else "infeasible"
            if reference is not None:
                row.gap = _relative_gap(result.objective, reference)

        def run(solver: str, row: ResultRow) -> None:
            row.reference = reference
            if solver == "exact":
                if ref_error is not None:
                    raise ref_error
                record(row, ref_sol)
                if row.verdict == "feasible":
                    row.verdict = "optimal"
            elif solver == "exact_bigm":
                record(row, solve_transformed(inst, budget=self.settings.EXACT_ENUMERATION_BUDGET))
            elif solver == "grasp":
                params = self.config.grasp.model_copy(update={"seed": self.config.seed})
                best, _ = GraspAgent(params, logger=self.logger, settings=self.settings).solve(inst)
                record(row, best)
            elif solver == "lagrangian":
                params = self.config.lagrangian.model_copy(update={"seed": self.config.seed})
                bound, incumbent, report = LagrangianAgent(params, logger=self.logger, settings=self.settings).bound(inst)
                row.bound = bound
                if incumbent is not None:
                    row.objective = incumbent.objective
                row.verdict = "infeasible" if report.infeasible else "bound"
                if reference is not None and math.isfinite(bound):
                    row.gap = _relative_gap(reference, bound)

        rows = [_guarded(ResultRow(inst.name, s, "pmpdc", seed=self.config.seed),
                         lambda row, s=s: run(s, row)) for s in solvers]
        for row in rows:
            if row.solver == "exact" and ref_error is None:
                row.wall_time = ref_report.wall_time
        return rows

    def _committee_rows(self, name: str, profile: ApprovalProfile) -> List[ResultRow]:
        solvers = [s for s in self.config.solvers if s in COMMITTEE_SOLVERS]
        rows: List[ResultRow] = []
        if not solvers:
            return rows
        n = profile.n_voters
        for k in sorted({1, math.ceil(n / 2), n}):
            prob = CommitteeProblem(profile, k)
            instance_id = f"{name}-k{k:02d}"
            try:
                reference = k_centrum_solve(prob, "exact", settings=self.settings).objective
            except BudgetExceededError:
                reference = None

            def run(solver: str, row: ResultRow) -> None:
                row.reference = reference
                if solver == "committee_exact":
                    sol = k_centrum_solve(prob, "exact", settings=self.settings)
                elif solver == "committee_heuristic":
                    sol = k_centrum_solve(prob, "heuristic", seed=self.config.seed, settings=self.settings)
                else:
                    # the minisum committee, scored under this k
                    ms = minisum_solve(profile)
                    sol = CommitteeSolution(ms.committee, objective_value(prob, ms.committee), ms.distances)
                row.objective = float(sol.objective)
                row.verdict = {"committee_exact": "optimal", "committee_heuristic": "local"}.get(solver, "closed_form")
                if reference is not None:
                    row.gap = _relative_gap(row.objective, reference)

            for s in solvers:
                rows.append(_guarded(ResultRow(instance_id, s, "committee", seed=self.config.seed),
                                     lambda row, s=s: run(s, row)))
        return rows

    def run(self) -> List[ResultRow]:
        if not self.config.solvers:
            return []
        tasks: List[Callable[[], List[ResultRow]]] = []
        if any(s in PMPDC_SOLVERS for s in self.config.solvers):
            tasks += [lambda inst=inst: self._pmpdc_rows(inst) for inst in pmpdc_instances(self.config)]
        if any(s in COMMITTEE_SOLVERS for s in self.config.solvers):
            tasks += [lambda item=item: self._committee_rows(*item) for item in committee_profiles(self.config)]
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                batches = list(pool.map(lambda task: task(), tasks))
        else:
            batches = [task() for task in tasks]
        rows = sorted((row for batch in batches for row in batch), key=ResultRow.sort_key)
        slow = [r for r in rows if r.wall_time and r.wall_time > self.config.time_limit_s]
        for r in slow:
            self.logger.warning(f"[bench] {r.instance_id}/{r.solver} took {r.wall_time:.1f}s "
                                f"(limit {self.config.time_limit_s}s)")
        self.logger.info(f"[bench] {len(rows)} rows, {sum(1 for r in rows if r.error)} errors")
        return rows


def run_benchmark(config: BenchConfig, settings: Optional[Settings] = None) -> List[ResultRow]:
    return BenchmarkService(config, settings).run()


# ---------------------------------------------------------------- oracles

def brute_force_pmpdc(inst: PMedianInstance) -> Tuple[Optional[Tuple[int, ...]], Optional[float]]:
    """Enumerate every size-p open set through `evaluate`; None when none is feasible."""
    best_open, best = None, None
    for combo in itertools.combinations(range(inst.n_sites), inst.p):
        sol = evaluate(inst, combo)
        if sol.feasible and (best is None or sol.objective < best):
            best_open, best = sol.open, sol.objective
    return best_open, best


def brute_force_committee(profile: ApprovalProfile, k: int) -> Tuple[str, int]:
    """Objective minimum over all 2^m committees, ties to the smallest bit-string."""
    m = profile.m_candidates
    committees = np.array(list(itertools.product((0, 1), repeat=m)), dtype=bool)
    dist = (committees[:, None, :] != profile.p[None, :, :]).sum(axis=2)
    values = -np.sort(-dist, axis=1)[:, :k].sum(axis=1)
    best = int(np.argmin(values))
    return "".join("1" if v else "0" for v in committees[best]), int(values[best])


@dataclass
class CheckRow:
    check: str
    case: str
    expected: str
    observed: str
    status: str

    def sort_key(self):
        return (self.check, self.case)


def _check(rows: List[CheckRow], check: str, case: str, expected, observed, ok: bool) -> None:
    rows.append(CheckRow(check, case, str(expected), str(observed), "ok" if ok else "MISMATCH"))


GRASP_GAP_TOL = 0.05
GRASP_GAP_RATE = 0.9
GRASP_TIME_LIMIT_S = 1.0
GAP_RATE_MIN_CASES = 20
TIGHT_QUANTILE = 0.05


def _tight_instances(seed: int, count: int) -> List[PMedianInstance]:
    """Limits at the nearest-neighbour distance; two facilities almost never cover these."""
    out = []
    for idx in range(count):
        rng = np.random.default_rng([seed, 20_000 + idx])
        n = int(rng.integers(8, 13))
        out.append(generate_pmpdc(int(rng.integers(2**31)), n, 2, TIGHT_QUANTILE, name=f"tight-{idx:03d}"))
    return out


def _selftest_pmpdc(rows: List[CheckRow], seed: int, count: int, settings: Settings) -> None:
    config = BenchConfig(seed=seed, pmpdc_instances=count, n_range=(6, 14), p_range=(2, 4),
                         s_quantiles=[0.3, 0.5, 1.0])
    instances = pmpdc_instances(config) + _tight_instances(seed, max(3, count // 10))
    gaps: List[float] = []
    slow = 0
    for idx, inst in enumerate(instances):
        case = inst.name
        oracle_open, oracle = brute_force_pmpdc(inst)
        result = exact_solve(inst, settings)
        exact_value = result.objective if isinstance(result, LocationSolution) else None
        _check(rows, "pmpdc_exact_vs_bruteforce", case, oracle, exact_value, exact_value == oracle and (
            oracle is None or (result.open == oracle_open and verify_solution(inst, result))))

        M = choose_big_M(inst)
        _, transformed = exact_unconstrained(transform_distances(inst, M), inst.p, settings.EXACT_ENUMERATION_BUDGET)
        feas = feasibility_check(inst, settings)
        if oracle is not None:
            _check(rows, "bigm_equivalence", case, oracle, transformed, transformed == oracle)
        else:
            _check(rows, "bigm_equivalence", case, f">= {M}", transformed, transformed >= M and feas.feasible is False)

        if oracle is not None:
            bound, _, _ = LagrangianAgent(LagrangianParams(seed=seed), settings=settings).bound(inst)
            started = time.perf_counter()
            grasp, _ = GraspAgent(GraspParams.from_settings(settings, seed=seed), settings=settings).solve(inst)
            slow += time.perf_counter() - started > GRASP_TIME_LIMIT_S
            grasp_value = grasp.objective if isinstance(grasp, LocationSolution) else math.inf
            gaps.append(_relative_gap(grasp_value, oracle))
            _check(rows, "bound_sandwich", case, f"{bound} <= {oracle} <= {grasp_value}", "",
                   bound <= oracle + 1e-9 and oracle <= grasp_value + 1e-9)

        if idx < 30 and feas.exact:
            lowest = None
            for p in range(1, inst.n_sites + 1):
                if isinstance(exact_solve(inst.with_p(p), settings), LocationSolution):
                    lowest = p
                    break
            _check(rows, "feasibility_p_min", case, lowest, feas.p_min, lowest == feas.p_min)

    if len(gaps) >= GAP_RATE_MIN_CASES:
        within = sum(1 for g in gaps if g <= GRASP_GAP_TOL)
        _check(rows, "grasp_gap_rate", f"{len(gaps)} instances",
               f">= {GRASP_GAP_RATE:.0%} within {GRASP_GAP_TOL:.0%}, none over {GRASP_TIME_LIMIT_S}s",
               f"{within}/{len(gaps)} within, {slow} slow",
               within >= GRASP_GAP_RATE * len(gaps) and slow == 0)


def _selftest_committee(rows: List[CheckRow], seed: int, count: int, settings: Settings) -> None:
    q = ApprovalProfile(np.array([[1, 1, 1], [1, 0, 0], [0, 0, 0]]))
    for k, expected in ((1, 2), (2, 3), (3, 3)):
        sol = k_centrum_solve(CommitteeProblem(q, k), "exact", settings=settings)
        _check(rows, "committee_known_value", f"Q-k{k}", expected, sol.objective, sol.objective == expected)
    config = BenchConfig(seed=seed, committee_profiles=count)
    for name, profile in committee_profiles(config):
        n = profile.n_voters
        for k in sorted({1, math.ceil(n / 2), n}):
            bits, value = brute_force_committee(profile, k)
            sol = k_centrum_solve(CommitteeProblem(profile, k), "exact", settings=settings)
            _check(rows, "committee_exact_vs_bruteforce", f"{name}-k{k}", f"{bits}={value}",
                   f"{sol.committee.bits}={sol.objective}", (sol.committee.bits, sol.objective) == (bits, value))
        bits, value = brute_force_committee(profile, n)
        ms = minisum_solve(profile)
        _check(rows, "minisum_closed_form", name, f"{bits}={value}", f"{ms.committee.bits}={ms.objective}",
               (ms.committee.bits, ms.objective) == (bits, value))
        by_k = committee_objectives_by_k(profile, settings)
        _check(rows, "objective_monotone_in_k", name, "nondecreasing", by_k,
               all(a <= b for a, b in zip(by_k, by_k[1:])))


def _selftest_sensors(rows: List[CheckRow], seed: int, triangles: int) -> None:
    grid = GridSpec(0.02, 2, 5)
    for rect, target in ((Rect(2, 2), math.sqrt(2)), (Rect(4, 2), math.sqrt(5))):
        _, value = solve_minmaxmax(rect, 3, 0.01, grid)
        _check(rows, "minmaxmax_center_limit", f"{rect.a}x{rect.b}", f"{target:.6f}", f"{value:.6f}",
               abs(value - target) <= 0.01 * target)
    rect = Rect(2, 2)
    _, area = solve_max_area(rect, rect.diagonal / 2, grid)
    _check(rows, "max_area_half_diagonal", "2x2", 0.0, area, area <= 1e-9)
    _, area = solve_max_area(rect, rect.diagonal, grid)
    _check(rows, "max_area_full_range", "2x2", rect.area / 2, area, abs(area - rect.area / 2) <= 0.01 * rect.area / 2)

    rng = np.random.default_rng(seed)
    rect = Rect(3.0, 1.0)
    zones = ZonePartition((1.0, 2.0), (1.0, 2.0, 3.0))
    worst = 0.0
    for _ in range(triangles):
        pts = rng.random((3, 2)) * [rect.a, rect.b]
        tri = SensorSet(tuple(map(tuple, pts)))
        area = triangle_area(tri.points)
        if area <= 0:
            continue
        worst = max(worst, abs(sum(zone_areas(rect, zones, tri)) - area) / area)
    _check(rows, "partition_additivity", f"{triangles} triangles", "<= 1e-9", f"{worst:.3e}", worst <= 1e-9)


def run_selftest(seed: int = 0, pmpdc_count: int = 50, committee_count: int = 100, triangles: int = 1000,
                 settings: Optional[Settings] = None) -> Tuple[List[CheckRow], int]:
    settings = settings or load_settings()
    rows: List[CheckRow] = []
    _selftest_pmpdc(rows, seed, pmpdc_count, settings)
    _selftest_committee(rows, seed, committee_count, settings)
    _selftest_sensors(rows, seed, triangles)
    rows.sort(key=CheckRow.sort_key)
    mismatches = sum(1 for r in rows if r.status != "ok")
    logger.info(f"[selftest] {len(rows)} checks, {mismatches} mismatches")
    return rows, mismatches
