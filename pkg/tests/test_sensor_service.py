"""
Tests for sensor placement geometry and the three grid-search criteria.
"""
import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from services.core import InfeasibleError, ParameterError
from services.sensor_service import (
    GridSpec,
    Rect,
    SensorSet,
    ZonePartition,
    _weighted_values,
    clip_to_strip,
    convex_hull,
    coverage_feasible,
    eccentricity,
    polygon_area,
    solve_max_area,
    solve_minmaxmax,
    solve_weighted_area,
    triangle_area,
    verify_sensors,
    write_field_csv,
    zone_areas,
    zone_weighted_value,
)
from utils.config import Settings

SQUARE = Rect(2.0, 2.0)
WIDE = Rect(4.0, 2.0)
COARSE = GridSpec(0.05, 2, 5)

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_eccentricity_examples():
    assert eccentricity(SQUARE.center, SQUARE) == pytest.approx(math.sqrt(2))
    assert eccentricity((0.0, 0.0), WIDE) == pytest.approx(math.sqrt(20))


@hsettings(max_examples=50)
@given(unit, unit)
def test_eccentricity_matches_dense_boundary_sample(u, v):
    q = (u * WIDE.a, v * WIDE.b)
    t = np.linspace(0.0, 1.0, 401)
    boundary = np.concatenate([
        np.column_stack([t * WIDE.a, np.zeros_like(t)]),
        np.column_stack([t * WIDE.a, np.full_like(t, WIDE.b)]),
        np.column_stack([np.zeros_like(t), t * WIDE.b]),
        np.column_stack([np.full_like(t, WIDE.a), t * WIDE.b]),
    ])
    sampled = np.max(np.hypot(boundary[:, 0] - q[0], boundary[:, 1] - q[1]))
    assert eccentricity(q, WIDE) == pytest.approx(sampled, abs=1e-9)


def test_coverage_feasible_examples():
    assert coverage_feasible(SQUARE.center, SQUARE, 2.0)
    assert not coverage_feasible((0.0, 0.0), SQUARE, 2.0)
    assert coverage_feasible((0.0, 0.0), SQUARE, SQUARE.diagonal)
    with pytest.raises(ParameterError):
        coverage_feasible((1.0, 1.0), SQUARE, 0.0)


@hsettings(max_examples=100)
@given(unit, unit, unit, unit)
def test_coverage_region_is_convex(x1, y1, x2, y2):
    delta = 1.7
    p, q = (2 * x1, 2 * y1), (2 * x2, 2 * y2)
    if coverage_feasible(p, SQUARE, delta) and coverage_feasible(q, SQUARE, delta):
        mid = ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)
        assert coverage_feasible(mid, SQUARE, delta)


def test_triangle_area_examples():
    assert triangle_area([(0, 0), (1, 0), (0, 1)]) == 0.5
    assert triangle_area([(0, 0), (1, 1), (2, 2)]) == 0.0
    assert triangle_area([(0, 1), (0, 0), (1, 0)]) == 0.5
    with pytest.raises(ParameterError):
        triangle_area([(0, 0), (1, 0)])


def test_polygon_clipping_and_hull():
    square = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]
    assert polygon_area(clip_to_strip(square, 0.5, 1.5)) == pytest.approx(2.0)
    assert clip_to_strip(square, 3.0, 4.0) == []
    hull = convex_hull(np.array(square + [(1.0, 1.0), (1.0, 0.0)]))
    assert len(hull) == 4
    assert polygon_area(hull) == pytest.approx(4.0)


def test_zone_partition_validation():
    with pytest.raises(ParameterError):
        ZonePartition((1.0, 2.0), (2.0, 1.0, 1.0))
    with pytest.raises(ParameterError):
        ZonePartition((1.0,), (1.0,))
    with pytest.raises(ParameterError):
        ZonePartition((2.0, 1.0), (1.0, 1.0, 1.0))
    relaxed = ZonePartition((1.0, 2.0), (1.0, 0.01, 0.01), strict_order=False)
    assert relaxed.total_weight == pytest.approx(1.02)
    with pytest.raises(ParameterError):
        relaxed.bounds(Rect(1.5, 1.0))


def test_zone_weighted_value_examples():
    rect = Rect(3.0, 1.0)
    zones = ZonePartition.equal_strips(rect, (1.0, 1.0, 1.0))
    tri = SensorSet(((0.0, 0.0), (3.0, 0.0), (1.0, 1.0)))
    assert zone_weighted_value(rect, zones, tri) == pytest.approx(triangle_area(tri.points) / 3)
    flat = SensorSet(((0.0, 0.0), (1.0, 0.0), (2.0, 0.0)))
    assert zone_weighted_value(rect, zones, flat) == 0.0


@hsettings(max_examples=100)
@given(st.lists(st.tuples(unit, unit), min_size=3, max_size=3))
def test_clipped_areas_are_additive(points):
    rect = Rect(3.0, 1.0)
    zones = ZonePartition((0.7, 1.9), (1.0, 2.0, 3.0))
    sigma = SensorSet(tuple((3 * x, y) for x, y in points))
    area = triangle_area(sigma.points)
    assert sum(zone_areas(rect, zones, sigma)) == pytest.approx(area, rel=1e-9, abs=1e-12)


@hsettings(max_examples=100)
@given(st.lists(st.tuples(unit, unit), min_size=3, max_size=3))
def test_closed_form_matches_clipping(points):
    rect = Rect(3.0, 1.0)
    zones = ZonePartition((0.7, 1.9), (1.0, 2.0, 3.0))
    sigma = SensorSet(tuple((3 * x, y) for x, y in points))
    fast = _weighted_values(rect, zones, sigma.as_array()[None, :, :])[0]
    assert fast == pytest.approx(zone_weighted_value(rect, zones, sigma), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("rect,limit", [(SQUARE, math.sqrt(2)), (WIDE, math.sqrt(5))])
def test_minmaxmax_approaches_center_eccentricity(rect, limit):
    sigma, value = solve_minmaxmax(rect, 3, 0.01, COARSE)
    assert value == pytest.approx(limit, rel=0.01)
    assert value >= limit
    checks = verify_sensors(rect, sigma, delta=0.01)
    assert all(checks.values())


def test_minmaxmax_nonincreasing_as_delta_shrinks():
    grid = GridSpec(0.1, 0, 5)
    values = [solve_minmaxmax(SQUARE, 3, delta, grid)[1] for delta in (1.0, 0.5, 0.1)]
    assert values[0] >= values[1] >= values[2]


@pytest.mark.parametrize("rect,delta", [(SQUARE, 0.01), (SQUARE, 0.7), (WIDE, 0.3), (Rect(3.0, 1.0), 1.5)])
def test_minmaxmax_nonincreasing_as_grid_refines(rect, delta):
    values = [solve_minmaxmax(rect, 3, delta, GridSpec(0.2, levels, 4))[1] for levels in (0, 1, 2)]
    assert all(finer <= coarser + 1e-9 for coarser, finer in zip(values, values[1:]))


def test_minmaxmax_delta_beyond_diameter():
    with pytest.raises(InfeasibleError) as exc:
        solve_minmaxmax(SQUARE, 3, 3.0, COARSE)
    assert exc.value.witness["diameter"] == pytest.approx(SQUARE.diagonal)


def test_max_area_at_half_diagonal_is_degenerate():
    sigma, area = solve_max_area(SQUARE, math.sqrt(2), GridSpec(0.1, 1, 5), Settings.model_construct())
    assert area == 0.0
    assert all(p == pytest.approx((1.0, 1.0)) for p in sigma.points)


def test_max_area_unconstrained_is_half_the_rectangle():
    sigma, area = solve_max_area(WIDE, WIDE.diagonal, GridSpec(0.1, 1, 5), Settings.model_construct())
    assert area == pytest.approx(WIDE.area / 2)
    assert all(verify_sensors(WIDE, sigma, Delta=WIDE.diagonal).values())


def test_max_area_below_half_diagonal_is_infeasible():
    with pytest.raises(InfeasibleError) as exc:
        solve_max_area(SQUARE, 1.0, GridSpec(0.1, 1, 5), Settings.model_construct())
    assert exc.value.witness["min_Delta"] == pytest.approx(math.sqrt(2))


def test_max_area_beats_dense_grid():
    delta = 2.0
    sigma, area = solve_max_area(SQUARE, delta, GridSpec(0.1, 2, 5), Settings.model_construct())
    assert all(verify_sensors(SQUARE, sigma, Delta=delta).values())
    # brute force over a 4x finer grid without refinement
    dense, dense_area = solve_max_area(SQUARE, delta, GridSpec(0.025, 0, 5), Settings.model_construct())
    assert area >= dense_area - 0.02


def test_weighted_area_unit_strips():
    rect = Rect(3.0, 1.0)
    zones = ZonePartition.equal_strips(rect, (1.0, 1.0, 1.0))
    sigma, value = solve_weighted_area(rect, zones, GridSpec(0.1, 1, 5), Settings.model_construct())
    assert value == pytest.approx(0.5)
    assert all(rect.contains(q) for q in sigma.points)


def test_weighted_area_equal_weights_matches_max_area():
    zones = ZonePartition.equal_strips(SQUARE, (1.0, 1.0, 1.0))
    _, value = solve_weighted_area(SQUARE, zones, GridSpec(0.1, 1, 5), Settings.model_construct())
    _, area = solve_max_area(SQUARE, SQUARE.diagonal, GridSpec(0.1, 1, 5), Settings.model_construct())
    assert value * 3 == pytest.approx(area)


def test_weighted_area_favors_heavy_strip():
    rect = Rect(3.0, 1.0)
    zones = ZonePartition.equal_strips(rect, (1.0, 1e-3, 1e-3), strict_order=False)
    sigma, value = solve_weighted_area(rect, zones, GridSpec(0.1, 1, 5), Settings.model_construct())
    areas = zone_areas(rect, zones, sigma)
    # a triangle spanning the rectangle leaves only a corner of strip one uncovered
    assert areas[0] >= 0.8
    assert value == pytest.approx((areas[0] + 1e-3 * (areas[1] + areas[2])) / zones.total_weight)


def test_write_field_csv(tmp_path):
    path = tmp_path / "field.csv"
    rows = write_field_csv(str(path), SQUARE, GridSpec(0.5), Delta=2.0)
    assert rows == 25
    with open(path, newline="") as f:
        records = list(csv.DictReader(f))
    assert len(records) == 25
    center = [r for r in records if r["x"] == "1.000000" and r["y"] == "1.000000"][0]
    assert center["feasible"] == "1"
    assert float(center["eccentricity"]) == pytest.approx(math.sqrt(2), abs=1e-6)


def test_grid_spec_defaults_and_steps():
    grid = GridSpec.default(WIDE, Settings.model_construct())
    assert grid.resolution == pytest.approx(0.01)
    assert grid.step(2) == pytest.approx(0.01 / 25)
    with pytest.raises(ParameterError):
        GridSpec(0.0)
