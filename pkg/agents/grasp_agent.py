"""
GRASP for the PMPDC: randomized greedy construction with a feasibility-first
restricted candidate list, then first-improvement swap local search.

Construction and local search work on the big-M transformed matrix, so an
uncovered demand costs M and any coverage loss outweighs every distance gain.
Feasibility of the returned solution is re-derived from the original limits.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from services.core import SolverReport
from services.pmedian_service import (
    Infeasible,
    LocationSolution,
    PMedianInstance,
    choose_big_M,
    coverage_sets,
    evaluate,
    feasibility_check,
    infeasible_from,
)
from utils.config import Settings, load_settings


class GraspParams(BaseModel):
    iterations: int = Field(32, ge=1)
    rcl_alpha: float = Field(0.15, ge=0.0, le=1.0)
    seed: int = 0
    neighborhood: Literal["swap"] = "swap"
    workers: int = Field(1, ge=1)

    @classmethod
    def from_settings(cls, settings: Settings, **overrides) -> "GraspParams":
        values = dict(iterations=settings.GRASP_ITERATIONS, rcl_alpha=settings.GRASP_RCL_ALPHA)
        values.update(overrides)
        return cls(**values)


class GraspAgent:
    def __init__(self, params: Optional[GraspParams] = None, logger=None, settings: Optional[Settings] = None):
        self.settings = settings or load_settings()
        self.params = params or GraspParams.from_settings(self.settings)
        self.logger = logger or logging.getLogger("locopt")

    def construct(self, cost: np.ndarray, cover: np.ndarray, p: int, rng: np.random.Generator) -> List[int]:
        n, m = cover.shape
        chosen: List[int] = []
        nearest = np.full(n, np.inf)
        covered = np.zeros(n, dtype=bool)
        while len(chosen) < p:
            closed = np.array([j for j in range(m) if j not in chosen])
            gains = cover[~covered][:, closed].sum(axis=0) if (~covered).any() else np.zeros(closed.size, dtype=int)
            if gains.size and gains.max() > 0:
                pool = closed[gains == gains.max()]
            else:
                pool = closed
            values = np.minimum(nearest[:, None], cost[:, pool]).sum(axis=0)
            lo, hi = values.min(), values.max()
            rcl = pool[values <= lo + self.params.rcl_alpha * (hi - lo)]
            pick = int(rcl[rng.integers(rcl.size)])
            chosen.append(pick)
            nearest = np.minimum(nearest, cost[:, pick])
            covered |= cover[:, pick]
        return sorted(chosen)

    def local_search(self, cost: np.ndarray, cover: np.ndarray, open_sites: List[int]) -> Tuple[List[int], int]:
        """First-improvement swap (close one, open one); swaps that lose coverage are rejected."""
        current = sorted(open_sites)
        m = cost.shape[1]
        moves = 0
        improved = True
        while improved:
            improved = False
            sub = cost[:, current]
            total = float(sub.min(axis=1).sum())
            n_covered = int(cover[:, current].any(axis=1).sum())
            closed = np.array([j for j in range(m) if j not in current])
            if closed.size == 0:
                break
            for pos, out in enumerate(current):
                rest = [j for k, j in enumerate(current) if k != pos]
                base = cost[:, rest].min(axis=1) if rest else np.full(cost.shape[0], np.inf)
                base_cov = cover[:, rest].any(axis=1) if rest else np.zeros(cost.shape[0], dtype=bool)
                totals = np.minimum(base[:, None], cost[:, closed]).sum(axis=0)
                cov_counts = (base_cov[:, None] | cover[:, closed]).sum(axis=0)
                ok = np.flatnonzero((totals < total - 1e-9) & (cov_counts >= n_covered))
                if ok.size:
                    incoming = int(closed[ok[0]])
                    current = sorted(rest + [incoming])
                    moves += 1
                    improved = True
                    break
        return current, moves

    def _restart(self, cost: np.ndarray, cover: np.ndarray, p: int, seed_seq: np.random.SeedSequence):
        rng = np.random.default_rng(seed_seq)
        built = self.construct(cost, cover, p, rng)
        improved, moves = self.local_search(cost, cover, built)
        value = float(cost[:, improved].min(axis=1).sum())
        return tuple(improved), value, moves

    def solve(self, inst: PMedianInstance) -> Tuple[Union[LocationSolution, Infeasible], SolverReport]:
        started = time.perf_counter()
        params = self.params
        report = SolverReport("grasp", seed=params.seed)
        cover = coverage_sets(inst)
        M = choose_big_M(inst)
        cost = np.where(cover, inst.dm.d, M)

        empty = np.flatnonzero(~cover.any(axis=1))
        if empty.size:
            report.infeasible = True
            report.wall_time = time.perf_counter() - started
            return Infeasible("demand has an empty coverage set", None, int(empty[0])), report

        children = np.random.SeedSequence(params.seed).spawn(params.iterations)
        if params.workers > 1:
            with ThreadPoolExecutor(max_workers=params.workers) as pool:
                results = list(pool.map(lambda ss: self._restart(cost, cover, inst.p, ss), children))
        else:
            results = [self._restart(cost, cover, inst.p, ss) for ss in children]

        best_open, best_value = None, np.inf
        for it, (open_sites, value, moves) in enumerate(results, start=1):
            if value < best_value or (value == best_value and open_sites < best_open):
                best_open, best_value = open_sites, value
            report.trajectory.append(best_value)
            report.notes["swaps"] = report.notes.get("swaps", 0) + moves
        report.iterations = params.iterations
        report.wall_time = time.perf_counter() - started

        sol = evaluate(inst, best_open)
        if not sol.feasible:
            feas = feasibility_check(inst, self.settings)
            report.infeasible = True
            self.logger.info(f"[GraspAgent] {inst.name}: no feasible construction in {params.iterations} iterations")
            witness = infeasible_from(inst, feas, "no GRASP iteration covered every demand", proven=False)
            return witness, report
        report.upper_bound = sol.objective
        self.logger.info(f"[GraspAgent] {inst.name}: objective {sol.objective} sites {sol.open}")
        return sol, report


def grasp_solve(inst: PMedianInstance, params: Optional[GraspParams] = None,
                logger=None) -> Tuple[Union[LocationSolution, Infeasible], SolverReport]:
    return GraspAgent(params, logger=logger).solve(inst)
