"""
The p-median problem with per-demand maximum distance limits (PMPDC).

Two formulations are supported: the big-M transformed matrix, solved as a
classical p-median, and the constrained one where demand i may only be served
by a site within s_i. Exact search, evaluation and the set-cover feasibility
characterization live here; the Lagrangian and GRASP heuristics live in
`agents/`.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from services.core import (
    BudgetExceededError,
    DistanceMatrix,
    ParameterError,
    SolverReport,
    closest_assignment,
)
from utils.config import Settings, load_settings

logger = logging.getLogger("locopt.pmedian")


@dataclass(frozen=True)
class PMedianInstance:
    dm: DistanceMatrix
    p: int
    s: np.ndarray
    name: str = "instance"

    def __post_init__(self):
        s = np.array(self.s, dtype=np.float64).ravel()
        if s.size != self.dm.n_demand:
            raise ParameterError(f"s-vector has {s.size} entries, expected {self.dm.n_demand}")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ParameterError("distance limits s_i must be finite and nonnegative")
        if not 1 <= self.p <= self.dm.n_sites:
            raise ParameterError(f"p must satisfy 1 <= p <= {self.dm.n_sites}, got {self.p}")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def n_demand(self) -> int:
        return self.dm.n_demand

    @property
    def n_sites(self) -> int:
        return self.dm.n_sites

    def with_p(self, p: int) -> "PMedianInstance":
        return PMedianInstance(self.dm, p, self.s, self.name)

    def with_limits(self, s: Sequence[float]) -> "PMedianInstance":
        return PMedianInstance(self.dm, self.p, np.asarray(s, dtype=np.float64), self.name)


@dataclass(frozen=True)
class LocationSolution:
    open: Tuple[int, ...]
    assignment: Dict[int, int]
    objective: float
    feasible: bool

    def violations(self, inst: PMedianInstance) -> List[int]:
        return [i for i, j in self.assignment.items() if inst.dm.d[i, j] > inst.s[i]]


@dataclass(frozen=True)
class Infeasible:
    """No size-p set of sites serves every demand within its limit.

    p_min is the exact minimum cover size; when only bounds are known,
    p_lower is a lower bound on it instead.
    """

    reason: str
    p_min: Optional[int] = None
    uncovered_demand: Optional[int] = None
    p_lower: Optional[int] = None

    feasible = False

    @property
    def witness(self) -> Dict[str, Optional[int]]:
        if self.uncovered_demand is not None:
            return {"uncovered_demand": self.uncovered_demand}
        if self.p_min is None and self.p_lower is not None:
            return {"p_lower": self.p_lower}
        return {"p_min": self.p_min}


@dataclass(frozen=True)
class FeasibilityReport:
    """Set-cover characterization of PMPDC feasibility.

    feasible is None when only bounds are known and p falls between them.
    """

    feasible: Optional[bool]
    p_min: Optional[int]
    p_lower: int
    p_upper: Optional[int]
    exact: bool
    uncovered_demand: Optional[int] = None
    cover: Tuple[int, ...] = field(default_factory=tuple)


def coverage_sets(inst: PMedianInstance) -> np.ndarray:
    """Boolean [demand][site] matrix of N_i = {j : d_ij <= s_i}."""
    return inst.dm.d <= inst.s[:, None]


def choose_big_M(inst: PMedianInstance) -> float:
    """M = 1 + n * max d, so any single M-edge exceeds every feasible total."""
    return 1.0 + inst.n_demand * inst.dm.max_distance


def transform_distances(inst: PMedianInstance, M: float) -> DistanceMatrix:
    if not M > inst.dm.max_distance:
        raise ParameterError(f"M = {M} must exceed the largest distance {inst.dm.max_distance}")
    return DistanceMatrix(np.where(coverage_sets(inst), inst.dm.d, M))


def _check_open_set(inst: PMedianInstance, open_sites: Iterable[int]) -> Tuple[int, ...]:
    raw = [int(j) for j in open_sites]
    sites = tuple(sorted(set(raw)))
    if len(raw) != len(sites) or len(sites) != inst.p:
        raise ParameterError(f"open set must contain exactly p={inst.p} distinct sites, got {raw}")
    if sites[0] < 0 or sites[-1] >= inst.n_sites:
        raise ParameterError(f"site index out of range 0..{inst.n_sites - 1}: {raw}")
    return sites


def evaluate(inst: PMedianInstance, open_sites: Iterable[int]) -> LocationSolution:
    sites = _check_open_set(inst, open_sites)
    assignment, total = closest_assignment(inst.dm, sites)
    feasible = all(inst.dm.d[i, j] <= inst.s[i] for i, j in assignment.items())
    return LocationSolution(sites, assignment, total, feasible)


def verify_solution(inst: PMedianInstance, sol: LocationSolution, tol: float = 1e-9) -> bool:
    """Recheck a solution independently of the solver that produced it."""
    if len(set(sol.open)) != inst.p or set(sol.assignment) != set(range(inst.n_demand)):
        return False
    if any(j not in sol.open for j in sol.assignment.values()):
        return False
    total = sum(float(inst.dm.d[i, j]) for i, j in sol.assignment.items())
    if abs(total - sol.objective) > tol * max(1.0, abs(total)):
        return False
    within = all(inst.dm.d[i, j] <= inst.s[i] for i, j in sol.assignment.items())
    return within == sol.feasible


def _site_masks(cover: np.ndarray) -> List[int]:
    masks = []
    for j in range(cover.shape[1]):
        mask = 0
        for i in np.flatnonzero(cover[:, j]):
            mask |= 1 << int(i)
        masks.append(mask)
    return masks


def _undominated(masks: List[int]) -> List[int]:
    """Site indices whose coverage is not contained in another site's (lowest index kept on ties)."""
    keep = []
    for j, mj in enumerate(masks):
        if mj == 0:
            continue
        dominated = False
        for k, mk in enumerate(masks):
            if k == j:
                continue
            if mj | mk == mk and (mk != mj or k < j):
                dominated = True
                break
        if not dominated:
            keep.append(j)
    return keep


def _greedy_cover(cover: np.ndarray) -> List[int]:
    uncovered = np.ones(cover.shape[0], dtype=bool)
    chosen = []
    while uncovered.any():
        gains = cover[uncovered].sum(axis=0)
        j = int(np.argmax(gains))
        if gains[j] == 0:
            break
        chosen.append(j)
        uncovered &= ~cover[:, j]
    return sorted(chosen)


def _disjoint_packing(cover: np.ndarray) -> int:
    """Count of pairwise-disjoint coverage sets, a lower bound on any cover size."""
    order = sorted(range(cover.shape[0]), key=lambda i: (int(cover[i].sum()), i))
    used = np.zeros(cover.shape[1], dtype=bool)
    count = 0
    for i in order:
        if not (cover[i] & used).any():
            used |= cover[i]
            count += 1
    return count


def feasibility_check(inst: PMedianInstance, settings: Optional[Settings] = None) -> FeasibilityReport:
    """PMPDC is feasible iff the coverage sets admit a hitting set of size <= p."""
    settings = settings or load_settings()
    cover = coverage_sets(inst)
    empty = np.flatnonzero(~cover.any(axis=1))
    if empty.size:
        i = int(empty[0])
        logger.info(f"[feasibility] demand {i} has an empty coverage set")
        return FeasibilityReport(False, None, inst.n_sites + 1, None, True, uncovered_demand=i)

    if inst.n_sites <= settings.FEASIBILITY_EXACT_MAX_SITES:
        masks = _site_masks(cover)
        full = (1 << inst.n_demand) - 1
        candidates = _undominated(masks)
        for size in range(1, len(candidates) + 1):
            for combo in itertools.combinations(candidates, size):
                acc = 0
                for j in combo:
                    acc |= masks[j]
                if acc == full:
                    logger.info(f"[feasibility] exact p_min={size} via sites {combo}")
                    return FeasibilityReport(inst.p >= size, size, size, size, True, cover=tuple(combo))
        raise AssertionError("coverage sets are nonempty but no cover was found")

    upper = _greedy_cover(cover)
    lower = _disjoint_packing(cover)
    if inst.p >= len(upper):
        verdict = True
    elif inst.p < lower:
        verdict = False
    else:
        verdict = None
    logger.info(f"[feasibility] bracketed p_min in [{lower}, {len(upper)}]")
    return FeasibilityReport(verdict, None, lower, len(upper), False, cover=tuple(upper))


def infeasible_from(inst: PMedianInstance, feas: FeasibilityReport, reason: str,
                    proven: bool = True) -> Infeasible:
    """Infeasibility witness from a feasibility report.

    With `proven`, no size-p cover exists, so a bracketed lower bound is lifted to p + 1.
    """
    if feas.uncovered_demand is not None:
        return Infeasible(reason, uncovered_demand=feas.uncovered_demand)
    if feas.exact:
        return Infeasible(reason, p_min=feas.p_min)
    lower = max(feas.p_lower, inst.p + 1) if proven else feas.p_lower
    return Infeasible(reason, p_lower=lower)


def _combination_count(n: int, p: int) -> int:
    return math.comb(n, p)


def exact_unconstrained(dm: DistanceMatrix, p: int, budget: Optional[int] = None) -> Tuple[Tuple[int, ...], float]:
    """Classical p-median by enumeration: minimum total, lexicographically smallest open set."""
    budget = budget if budget is not None else load_settings().EXACT_ENUMERATION_BUDGET
    size = _combination_count(dm.n_sites, p)
    if size > budget:
        raise BudgetExceededError(f"C({dm.n_sites},{p}) = {size} exceeds the enumeration budget {budget}", size, budget)
    best_open, best = None, math.inf
    for combo in itertools.combinations(range(dm.n_sites), p):
        total = float(dm.d[:, combo].min(axis=1).sum())
        if total < best:
            best_open, best = combo, total
    return best_open, best


def solve_transformed(inst: PMedianInstance, M: Optional[float] = None,
                      budget: Optional[int] = None) -> Union[LocationSolution, Infeasible]:
    """Solve the big-M formulation exactly and report the result on original distances."""
    M = M if M is not None else choose_big_M(inst)
    open_sites, value = exact_unconstrained(transform_distances(inst, M), inst.p, budget)
    if value >= M:
        return Infeasible("every size-p set uses an M-edge in the transformed matrix")
    return evaluate(inst, open_sites)


class _BranchAndBound:
    """Depth-first search over site subsets in lexicographic order.

    The bound at a node is the sum over demands of the smallest covering
    distance among sites still allowed (chosen ones plus those not yet
    decided); a demand with no allowed covering site prunes the node.
    """

    def __init__(self, inst: PMedianInstance):
        self.inst = inst
        self.cost = np.where(coverage_sets(inst), inst.dm.d, np.inf)
        # suffix_min[j] = per-demand minimum over sites j..m-1
        m = inst.n_sites
        suffix = np.full((m + 1, inst.n_demand), np.inf)
        for j in range(m - 1, -1, -1):
            suffix[j] = np.minimum(suffix[j + 1], self.cost[:, j])
        self.suffix_min = suffix
        self.best_open: Optional[Tuple[int, ...]] = None
        self.best = math.inf
        self.nodes = 0

    def run(self) -> None:
        self._branch([], np.full(self.inst.n_demand, np.inf), 0)

    def _branch(self, chosen: List[int], current: np.ndarray, start: int) -> None:
        self.nodes += 1
        p, m = self.inst.p, self.inst.n_sites
        if len(chosen) == p:
            total = float(current.sum())
            if total < self.best:
                self.best, self.best_open = total, tuple(chosen)
            return
        for j in range(start, m - (p - len(chosen)) + 1):
            with_j = np.minimum(current, self.cost[:, j])
            bound = np.minimum(with_j, self.suffix_min[j + 1]).sum()
            if not bound < self.best:
                continue
            chosen.append(j)
            self._branch(chosen, with_j, j + 1)
            chosen.pop()


def exact_solve(inst: PMedianInstance, settings: Optional[Settings] = None,
                report: Optional[SolverReport] = None) -> Union[LocationSolution, Infeasible]:
    """Optimal PMPDC solution, ties to the lexicographically smallest open set."""
    settings = settings or load_settings()
    started = time.perf_counter()
    report = report if report is not None else SolverReport("exact")

    if inst.p == inst.n_sites:
        sol = evaluate(inst, range(inst.n_sites))
        report.wall_time = time.perf_counter() - started
        if not sol.feasible:
            feas = feasibility_check(inst, settings)
            report.infeasible = True
            return infeasible_from(inst, feas, "some demand has no site within its limit")
        report.lower_bound = report.upper_bound = sol.objective
        return sol

    size = _combination_count(inst.n_sites, inst.p)
    if size > settings.EXACT_ENUMERATION_BUDGET:
        raise BudgetExceededError(
            f"C({inst.n_sites},{inst.p}) = {size} exceeds the enumeration budget "
            f"{settings.EXACT_ENUMERATION_BUDGET}; use a heuristic solver",
            size, settings.EXACT_ENUMERATION_BUDGET,
        )

    cover = coverage_sets(inst)
    empty = np.flatnonzero(~cover.any(axis=1))
    if empty.size:
        report.infeasible = True
        report.wall_time = time.perf_counter() - started
        return Infeasible("demand has an empty coverage set", None, int(empty[0]))

    best_open = None
    if size <= settings.EXACT_PLAIN_ENUM_LIMIT:
        best = math.inf
        cost = np.where(cover, inst.dm.d, np.inf)
        for combo in itertools.combinations(range(inst.n_sites), inst.p):
            total = float(cost[:, combo].min(axis=1).sum())
            if total < best:
                best_open, best = combo, total
        report.iterations = size
    else:
        bnb = _BranchAndBound(inst)
        bnb.run()
        best_open = bnb.best_open
        report.iterations = bnb.nodes
    report.wall_time = time.perf_counter() - started

    if best_open is None:
        feas = feasibility_check(inst, settings)
        report.infeasible = True
        result = infeasible_from(inst, feas, "minimum cover of the coverage sets exceeds p")
        logger.info(f"[exact] {inst.name}: infeasible for p={inst.p}, {result.witness}")
        return result

    sol = evaluate(inst, best_open)
    report.lower_bound = report.upper_bound = sol.objective
    logger.info(f"[exact] {inst.name}: objective {sol.objective} with sites {sol.open}")
    return sol
