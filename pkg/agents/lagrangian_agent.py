"""
Lagrangian relaxation of the constrained PMPDC formulation.

The "serve every demand exactly once" constraints are dualized with free
multipliers u_i. For fixed u the relaxed problem splits by site: site j is
worth rho_j = sum over covered demands of min(0, d_ij - u_i), and the best p
sites are opened. Multipliers follow a subgradient scheme; each iteration's
relaxed site choice is repaired into a feasible incumbent when possible.
"""

import logging
import math
import time
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from services.core import SolverReport
from services.pmedian_service import (
    LocationSolution,
    PMedianInstance,
    coverage_sets,
    evaluate,
)
from utils.config import Settings, load_settings


class LagrangianParams(BaseModel):
    max_iters: int = Field(500, ge=1)
    initial_step_scale: float = Field(2.0, gt=0)
    halving_patience: int = Field(20, ge=1)
    gap_tol: float = Field(1e-6, ge=0)
    ub_source: Literal["repair", "grasp"] = "repair"
    seed: int = 0

    @classmethod
    def from_settings(cls, settings: Settings, **overrides) -> "LagrangianParams":
        values = dict(
            max_iters=settings.LAGRANGIAN_MAX_ITERS,
            initial_step_scale=settings.LAGRANGIAN_STEP_SCALE,
            halving_patience=settings.LAGRANGIAN_HALVING_PATIENCE,
            gap_tol=settings.LAGRANGIAN_GAP_TOL,
        )
        values.update(overrides)
        return cls(**values)


class LagrangianAgent:
    def __init__(self, params: Optional[LagrangianParams] = None, logger=None, settings: Optional[Settings] = None):
        self.settings = settings or load_settings()
        self.params = params or LagrangianParams.from_settings(self.settings)
        self.logger = logger or logging.getLogger("locopt")

    def _relaxed(self, cost: np.ndarray, cover: np.ndarray, u: np.ndarray, p: int) -> Tuple[float, np.ndarray, np.ndarray]:
        reduced = np.where(cover, np.minimum(0.0, cost - u[:, None]), 0.0)
        rho = reduced.sum(axis=0)
        opened = np.lexsort((np.arange(rho.size), rho))[:p]
        x = np.zeros_like(cover)
        x[:, opened] = cover[:, opened] & (cost[:, opened] - u[:, None] < 0)
        value = float(u.sum() + rho[opened].sum())
        return value, np.sort(opened), x

    def _repair(self, inst: PMedianInstance, cover: np.ndarray, opened: np.ndarray) -> LocationSolution:
        """Swap sites greedily until every demand has an open site within its limit."""
        current = [int(j) for j in opened]
        covered = cover[:, current].any(axis=1)
        while not covered.all():
            best_swap, best_count = None, int(covered.sum())
            closed = [j for j in range(inst.n_sites) if j not in current]
            for out in current:
                rest = [j for j in current if j != out]
                base = cover[:, rest].any(axis=1) if rest else np.zeros(inst.n_demand, dtype=bool)
                counts = (base[:, None] | cover[:, closed]).sum(axis=0)
                k = int(np.argmax(counts))
                if counts[k] > best_count:
                    best_swap, best_count = (out, closed[k]), int(counts[k])
            if best_swap is None:
                break
            current = sorted([j for j in current if j != best_swap[0]] + [best_swap[1]])
            covered = cover[:, current].any(axis=1)
        return evaluate(inst, current)

    def _initial_upper_bound(self, inst: PMedianInstance, cover: np.ndarray) -> Tuple[float, Optional[LocationSolution]]:
        if self.params.ub_source == "grasp":
            from agents.grasp_agent import GraspAgent, GraspParams

            seed_params = GraspParams(iterations=4, seed=self.params.seed)
            best, _ = GraspAgent(seed_params, logger=self.logger, settings=self.settings).solve(inst)
            if isinstance(best, LocationSolution):
                return best.objective, best
        trivial = float(np.where(cover, inst.dm.d, 0.0).max(axis=1).sum())
        return trivial, None

    def bound(self, inst: PMedianInstance) -> Tuple[float, Optional[LocationSolution], SolverReport]:
        started = time.perf_counter()
        params = self.params
        report = SolverReport("lagrangian", seed=params.seed)
        cover = coverage_sets(inst)
        cost = inst.dm.d

        empty = np.flatnonzero(~cover.any(axis=1))
        if empty.size:
            report.lower_bound = math.inf
            report.infeasible = True
            report.notes["uncovered_demand"] = int(empty[0])
            report.wall_time = time.perf_counter() - started
            self.logger.info(f"[LagrangianAgent] {inst.name}: demand {int(empty[0])} cannot be covered")
            return math.inf, None, report

        if inst.p == inst.n_sites:
            sol = evaluate(inst, range(inst.n_sites))
            report.lower_bound = report.upper_bound = sol.objective
            report.infeasible = not sol.feasible
            report.wall_time = time.perf_counter() - started
            return sol.objective, sol if sol.feasible else None, report

        upper, incumbent = self._initial_upper_bound(inst, cover)
        u = np.where(cover, cost, np.inf).min(axis=1)
        best_lb = -math.inf
        step_scale = params.initial_step_scale
        stale = 0
        iteration = 0
        integral = inst.dm.is_integral

        for iteration in range(1, params.max_iters + 1):
            value, opened, x = self._relaxed(cost, cover, u, inst.p)
            if value > best_lb + 1e-12:
                best_lb, stale = value, 0
            else:
                stale += 1
                if stale >= params.halving_patience:
                    step_scale /= 2.0
                    stale = 0

            candidate = self._repair(inst, cover, opened)
            if candidate.feasible and (incumbent is None or candidate.objective < incumbent.objective):
                incumbent = candidate
                upper = min(upper, candidate.objective)
            report.trajectory.append(best_lb)

            if incumbent is not None and upper - best_lb <= params.gap_tol * max(1.0, abs(upper)):
                break
            g = 1.0 - x.sum(axis=1)
            norm = float(g @ g)
            if norm == 0.0:
                # relaxed solution serves every demand once: it is optimal
                break
            theta = step_scale * max(upper - value, 0.0) / norm
            if theta == 0.0:
                theta = step_scale / norm
            u = u + theta * g
            self.logger.debug(f"[LagrangianAgent] iter {iteration}: L={value:.6f} best={best_lb:.6f} UB={upper:.6f}")

        if integral and math.isfinite(best_lb):
            best_lb = float(math.ceil(best_lb - 1e-9))
        if incumbent is not None:
            best_lb = min(best_lb, incumbent.objective)

        report.lower_bound = best_lb
        report.upper_bound = incumbent.objective if incumbent is not None else None
        report.iterations = iteration
        report.infeasible = incumbent is None
        report.notes["final_step_scale"] = step_scale
        report.wall_time = time.perf_counter() - started
        self.logger.info(f"[LagrangianAgent] {inst.name}: bound {best_lb} incumbent "
                         f"{report.upper_bound} after {iteration} iterations")
        return best_lb, incumbent, report


def lagrangian_bound(inst: PMedianInstance, params: Optional[LagrangianParams] = None,
                     logger=None) -> Tuple[float, Optional[LocationSolution], SolverReport]:
    return LagrangianAgent(params, logger=logger).bound(inst)
