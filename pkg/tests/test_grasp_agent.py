"""
Tests for the GRASP agent.
"""
import math
from unittest.mock import MagicMock

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from agents.grasp_agent import GraspAgent, GraspParams, grasp_solve
from services.core import DistanceMatrix
from services.instance_service import generate_pmpdc
from services.pmedian_service import Infeasible, PMedianInstance, coverage_sets, exact_solve, verify_solution
from utils.config import Settings

COORDS = np.array([0.0, 1.0, 2.0, 10.0])


def line_instance(s=3.0):
    d = np.abs(COORDS[:, None] - COORDS[None, :])
    return PMedianInstance(DistanceMatrix(d), 2, np.full(4, s), "L")


def make_agent(**params):
    return GraspAgent(GraspParams(**params), logger=MagicMock(), settings=Settings.model_construct())


@pytest.mark.parametrize("seed", [0, 7, 123])
def test_line_instance_reaches_optimum(seed):
    sol, report = make_agent(iterations=10, seed=seed).solve(line_instance())
    assert sol.objective == 2
    assert sol.open == (1, 3)
    assert report.upper_bound == 2
    assert verify_solution(line_instance(), sol)


def test_infeasible_instance():
    result, report = make_agent(iterations=5).solve(line_instance(s=0.5))
    assert isinstance(result, Infeasible)
    assert result.p_min == 4
    assert report.infeasible


def test_same_seed_same_result():
    rng = np.random.default_rng(11)
    pts = rng.random((12, 2))
    d = np.rint(1000 * np.linalg.norm(pts[:, None] - pts[None, :], axis=2))
    inst = PMedianInstance(DistanceMatrix(d), 3, np.quantile(d, 0.7, axis=1))
    first, r1 = make_agent(iterations=8, seed=5).solve(inst)
    second, r2 = make_agent(iterations=8, seed=5).solve(inst)
    assert first == second
    assert r1.trajectory == r2.trajectory


def test_threaded_restarts_match_sequential():
    rng = np.random.default_rng(4)
    pts = rng.random((10, 2))
    d = np.rint(1000 * np.linalg.norm(pts[:, None] - pts[None, :], axis=2))
    inst = PMedianInstance(DistanceMatrix(d), 3, np.quantile(d, 0.8, axis=1))
    seq, _ = make_agent(iterations=6, seed=2).solve(inst)
    par, _ = make_agent(iterations=6, seed=2, workers=3).solve(inst)
    assert seq == par


def test_grasp_never_beats_exact():
    rng = np.random.default_rng(9)
    pts = rng.random((9, 2))
    d = np.rint(100 * np.linalg.norm(pts[:, None] - pts[None, :], axis=2))
    inst = PMedianInstance(DistanceMatrix(d), 2, np.quantile(d, 1.0, axis=1))
    exact = exact_solve(inst, Settings.model_construct())
    sol, _ = grasp_solve(inst, GraspParams(iterations=4), logger=MagicMock())
    assert sol.objective >= exact.objective


def test_local_search_keeps_coverage():
    inst = line_instance()
    agent = make_agent()
    cover = coverage_sets(inst)
    cost = np.where(cover, inst.dm.d, 100.0)
    improved, moves = agent.local_search(cost, cover, [0, 3])
    assert improved == [1, 3]
    assert moves == 1


def test_params_validation():
    with pytest.raises(ValueError):
        GraspParams(rcl_alpha=1.5)
    assert GraspParams.from_settings(Settings.model_construct(), seed=4).iterations == 32


def _objective(result):
    return math.inf if isinstance(result, Infeasible) else result.objective


@hsettings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(6, 12), st.sampled_from([0.3, 0.6, 1.0]))
def test_best_objective_nonincreasing_in_iterations(seed, n, quantile):
    inst = generate_pmpdc(seed, n, 3, quantile)
    values = [_objective(make_agent(iterations=k, seed=7).solve(inst)[0]) for k in (1, 4, 16)]
    assert values == sorted(values, reverse=True)
    _, report = make_agent(iterations=16, seed=7).solve(inst)
    assert all(a >= b for a, b in zip(report.trajectory, report.trajectory[1:]))


def test_unproven_infeasibility_keeps_bracket_lower_bound():
    n = 24
    d = np.full((n, n), 10.0)
    for t in range(0, n, 3):
        for k in range(3):
            d[t + k, t + k] = d[t + k, t + (k + 1) % 3] = 1.0
    result, report = make_agent(iterations=3).solve(PMedianInstance(DistanceMatrix(d), 8, np.ones(n)))
    assert isinstance(result, Infeasible)
    assert result.witness == {"p_lower": 8}
    assert report.infeasible
