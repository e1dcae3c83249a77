"""
Unit tests for the shared primitives in services.core.
"""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from services.core import (
    ApprovalProfile,
    Committee,
    DistanceMatrix,
    OrderedWeights,
    ParameterError,
    SolverReport,
    closest_assignment,
    hamming,
    k_centrum_aggregate,
)


@pytest.mark.parametrize("values,k,expected", [
    ([3, 1, 2], 2, 5),
    ([4, 4, 4], 1, 4),
    ([2, 7, 1, 5], 4, 15),
])
def test_k_centrum_aggregate_examples(values, k, expected):
    assert k_centrum_aggregate(values, k) == expected


@pytest.mark.parametrize("k", [0, 4])
def test_k_centrum_aggregate_rejects_k_out_of_range(k):
    with pytest.raises(ParameterError):
        k_centrum_aggregate([1, 2, 3], k)


@given(st.lists(st.integers(0, 50), min_size=1, max_size=12), st.data())
def test_k_centrum_aggregate_is_sum_of_sorted_prefix(values, data):
    k = data.draw(st.integers(1, len(values)))
    assert k_centrum_aggregate(values, k) == sum(sorted(values, reverse=True)[:k])


@given(st.lists(st.integers(0, 20), min_size=2, max_size=10))
def test_k_centrum_aggregate_monotone_in_k(values):
    totals = [k_centrum_aggregate(values, k) for k in range(1, len(values) + 1)]
    assert totals == sorted(totals)
    assert totals[0] == max(values)
    assert totals[-1] == sum(values)


def test_ordered_weights_vector_and_aggregate():
    w = OrderedWeights(4, 2)
    assert w.vector().tolist() == [1, 1, 0, 0]
    assert w.aggregate([2, 7, 1, 5]) == 12
    with pytest.raises(ParameterError):
        w.aggregate([1, 2])
    with pytest.raises(ParameterError):
        OrderedWeights(3, 5)


@pytest.mark.parametrize("row,committee,expected", [
    ("111", "111", 0),
    ("111", "000", 3),
    ("101", "110", 2),
])
def test_hamming_examples(row, committee, expected):
    assert hamming([int(c) for c in row], Committee.from_bits(committee)) == expected


def test_hamming_length_mismatch():
    with pytest.raises(ParameterError):
        hamming([1, 0], [1, 0, 1])


def test_closest_assignment_examples():
    dm = DistanceMatrix(np.array([[0, 9], [9, 0]]))
    assignment, total = closest_assignment(dm, {0, 1})
    assert assignment == {0: 0, 1: 1}
    assert total == 0
    assert closest_assignment(dm, {0})[1] == 9


def test_closest_assignment_ties_go_to_lowest_index():
    dm = DistanceMatrix(np.full((3, 3), 5.0))
    assignment, total = closest_assignment(dm, [1, 0])
    assert set(assignment.values()) == {0}
    assert total == 15


def test_closest_assignment_rejects_empty_open_set():
    with pytest.raises(ParameterError):
        closest_assignment(DistanceMatrix(np.zeros((2, 2))), [])


def test_distance_matrix_validation():
    with pytest.raises(ParameterError):
        DistanceMatrix(np.array([[0.0, -1.0]]))
    with pytest.raises(ParameterError):
        DistanceMatrix(np.array([[0.0, np.inf]]))
    dm = DistanceMatrix([[0, 2.5], [1, 0]])
    assert (dm.n_demand, dm.n_sites, dm.max_distance) == (2, 2, 2.5)
    assert not dm.is_integral
    with pytest.raises(ValueError):
        dm.d[0, 0] = 3.0


def test_approval_profile_rejects_non_boolean():
    with pytest.raises(ParameterError):
        ApprovalProfile(np.array([[0, 2]]))
    prof = ApprovalProfile(np.array([[1, 1, 1], [1, 0, 0], [0, 0, 0]]))
    assert prof.approvals().tolist() == [2, 1, 1]


def test_committee_bits_round_trip():
    c = Committee.from_bits("0110")
    assert c.bits == "0110"
    assert len(c) == 4
    with pytest.raises(ParameterError):
        Committee((0, 2))


def test_solver_report_gap_and_timing_toggle():
    report = SolverReport("lagrangian", lower_bound=90.0, upper_bound=100.0, wall_time=1.5)
    assert report.gap == pytest.approx(0.1)
    assert "wall_time" not in report.to_dict(include_timing=False)
    assert SolverReport("x", lower_bound=float("inf"), upper_bound=3.0).gap is None


bits = st.integers(1, 12).flatmap(lambda m: st.tuples(*[st.lists(st.booleans(), min_size=m, max_size=m)] * 3))


@given(bits)
def test_hamming_is_a_metric(triple):
    x, y, z = triple
    assert hamming(x, x) == 0
    assert hamming(x, y) == hamming(y, x)
    assert hamming(x, z) <= hamming(x, y) + hamming(y, z)


@given(bits)
def test_hamming_complement_symmetry(triple):
    x, y, _ = triple
    flipped = [not v for v in y]
    assert hamming(x, y) + hamming(x, flipped) == len(x)
