"""
Approval-voting committee election under the k-centrum criterion.

A committee x in {0,1}^m is scored by the sum of the k largest voter Hamming
distances d_i(x) = sum_j |p_ij - x_j|. k = n gives Minisum, k = 1 Minimax.
Committees are compared as bit-strings with x_1 most significant; the
lexicographically smallest optimum wins every tie.
"""

import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np

from services.core import (
    ApprovalProfile,
    BudgetExceededError,
    Committee,
    ParameterError,
    k_centrum_aggregate,
)
from utils.config import Settings, load_settings

logger = logging.getLogger("locopt.committee")

Strategy = Literal["exact", "heuristic"]

_POPCOUNT16 = np.array([bin(v).count("1") for v in range(1 << 16)], dtype=np.int64)
_CHUNK = 1 << 16


@dataclass(frozen=True)
class CommitteeProblem:
    profile: ApprovalProfile
    k: int
    size: Optional[int] = None

    def __post_init__(self):
        if not 1 <= self.k <= self.profile.n_voters:
            raise ParameterError(f"k must satisfy 1 <= k <= {self.profile.n_voters}, got {self.k}")
        if self.size is not None and not 0 <= self.size <= self.profile.m_candidates:
            raise ParameterError(f"committee size must lie in 0..{self.profile.m_candidates}, got {self.size}")


@dataclass(frozen=True)
class CommitteeSolution:
    committee: Committee
    objective: int
    distances: Tuple[int, ...]


def _distances(profile: ApprovalProfile, x: np.ndarray) -> np.ndarray:
    return np.count_nonzero(profile.p != x[None, :], axis=1)


def _solution(prob: CommitteeProblem, x: np.ndarray) -> CommitteeSolution:
    dist = _distances(prob.profile, x)
    return CommitteeSolution(Committee(tuple(int(v) for v in x)), int(k_centrum_aggregate(dist, prob.k)),
                             tuple(int(v) for v in dist))


def objective_value(prob: CommitteeProblem, x: Committee) -> int:
    if len(x) != prob.profile.m_candidates:
        raise ParameterError(f"committee has {len(x)} entries, profile has {prob.profile.m_candidates} candidates")
    return _solution(prob, x.as_array()).objective


def minisum_solve(profile: ApprovalProfile) -> CommitteeSolution:
    """Per-candidate strict majority; a tie at exactly n/2 excludes the candidate."""
    x = 2 * profile.approvals() > profile.n_voters
    return _solution(CommitteeProblem(profile, profile.n_voters), x)


def _row_codes(profile: ApprovalProfile) -> np.ndarray:
    m = profile.m_candidates
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    return profile.p.astype(np.int64) @ weights


def _decode(code: int, m: int) -> np.ndarray:
    return np.array([(code >> (m - 1 - j)) & 1 for j in range(m)], dtype=bool)


def _popcount(values: np.ndarray) -> np.ndarray:
    return _POPCOUNT16[values & 0xFFFF] + _POPCOUNT16[(values >> 16) & 0xFFFF]


def exhaustive_table(prob: CommitteeProblem, settings: Optional[Settings] = None) -> np.ndarray:
    """Objective of every committee, indexed by its bit-string read as a binary number."""
    settings = settings or load_settings()
    m, n, k = prob.profile.m_candidates, prob.profile.n_voters, prob.k
    if m > settings.COMMITTEE_MAX_CANDIDATES:
        raise BudgetExceededError(
            f"2^{m} committees exceed the exhaustive budget (m <= {settings.COMMITTEE_MAX_CANDIDATES})",
            1 << m, 1 << settings.COMMITTEE_MAX_CANDIDATES,
        )
    rows = _row_codes(prob.profile)
    table = np.empty(1 << m, dtype=np.int64)
    for start in range(0, 1 << m, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, 1 << m), dtype=np.int64)
        dist = _popcount(codes[:, None] ^ rows[None, :])
        table[start:start + codes.size] = np.partition(dist, n - k, axis=1)[:, n - k:].sum(axis=1)
    if prob.size is not None:
        sizes = _popcount(np.arange(1 << m, dtype=np.int64))
        table = np.where(sizes == prob.size, table, np.iinfo(np.int64).max)
    return table


def _exact(prob: CommitteeProblem, settings: Optional[Settings]) -> CommitteeSolution:
    table = exhaustive_table(prob, settings)
    code = int(np.argmin(table))
    return _solution(prob, _decode(code, prob.profile.m_candidates))


def _steepest_descent(prob: CommitteeProblem, x: np.ndarray) -> np.ndarray:
    """Best-improvement over single flips, then one-in-one-out swaps."""
    m = prob.profile.m_candidates
    current = x.copy()
    value = _solution(prob, current).objective
    while True:
        best_move, best_value = None, value
        if prob.size is None:
            for j in range(m):
                trial = current.copy()
                trial[j] = not trial[j]
                v = _solution(prob, trial).objective
                if v < best_value:
                    best_move, best_value = trial, v
        if best_move is None:
            ins = np.flatnonzero(~current)
            outs = np.flatnonzero(current)
            for a in outs:
                for b in ins:
                    trial = current.copy()
                    trial[a], trial[b] = False, True
                    v = _solution(prob, trial).objective
                    if v < best_value:
                        best_move, best_value = trial, v
        if best_move is None:
            return current
        current, value = best_move, best_value


def _random_start(prob: CommitteeProblem, rng: np.random.Generator) -> np.ndarray:
    m = prob.profile.m_candidates
    if prob.size is None:
        return rng.random(m) < 0.5
    x = np.zeros(m, dtype=bool)
    x[rng.choice(m, size=prob.size, replace=False)] = True
    return x


def _minisum_start(prob: CommitteeProblem) -> np.ndarray:
    x = minisum_solve(prob.profile).committee.as_array()
    if prob.size is None:
        return x
    # keep the size most-approved candidates, ties to the lowest index
    order = np.lexsort((np.arange(x.size), -prob.profile.approvals()))
    fixed = np.zeros_like(x)
    fixed[order[: prob.size]] = True
    return fixed


def _heuristic(prob: CommitteeProblem, seed: int, starts: int) -> CommitteeSolution:
    rng = np.random.default_rng(seed)
    candidates = [_minisum_start(prob)] + [_random_start(prob, rng) for _ in range(max(starts - 1, 0))]
    best: Optional[CommitteeSolution] = None
    for start in candidates:
        sol = _solution(prob, _steepest_descent(prob, start))
        if best is None or (sol.objective, sol.committee.bits) < (best.objective, best.committee.bits):
            best = sol
    logger.debug(f"[committee] heuristic best {best.committee.bits} = {best.objective} over {len(candidates)} starts")
    return best


def k_centrum_solve(prob: CommitteeProblem, strategy: Strategy = "exact", seed: int = 0,
                    settings: Optional[Settings] = None) -> CommitteeSolution:
    settings = settings or load_settings()
    if strategy == "exact":
        return _exact(prob, settings)
    if strategy == "heuristic":
        return _heuristic(prob, seed, settings.COMMITTEE_HEURISTIC_STARTS)
    raise ParameterError(f"unknown strategy {strategy!r}")


def minimax_solve(profile: ApprovalProfile, strategy: Strategy = "exact", seed: int = 0,
                  settings: Optional[Settings] = None) -> CommitteeSolution:
    return k_centrum_solve(CommitteeProblem(profile, 1), strategy, seed, settings)


def committee_objectives_by_k(profile: ApprovalProfile, settings: Optional[Settings] = None) -> List[int]:
    """Exact optimum for every k = 1..n."""
    return [_exact(CommitteeProblem(profile, k), settings).objective for k in range(1, profile.n_voters + 1)]
