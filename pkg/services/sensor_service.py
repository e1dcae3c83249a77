"""
Sensor placement on a rectangular blade section Omega = [0,a] x [0,b].

Three criteria are solved by coarse-to-fine grid search with exact geometry:
  * min-max-max: minimize the largest sensor eccentricity subject to pairwise
    separation >= delta;
  * max-area: maximize the triangle area of three sensors that each hear the
    whole rectangle within range Delta;
  * weighted area: maximize the zone-weighted covered area
    F = (1/W) sum_i w_i A(Omega_i ∩ T) over vertical fault strips.
"""

import csv
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from services.core import InfeasibleError, ParameterError
from utils.config import Settings, load_settings

logger = logging.getLogger("locopt.sensors")

Point = Tuple[float, float]

# directions used to bracket a point set's diameter
_DIRECTIONS = np.stack([np.cos(np.arange(16) * np.pi / 16), np.sin(np.arange(16) * np.pi / 16)], axis=1)
_DIAMETER_SLACK = math.cos(math.pi / 32)


@dataclass(frozen=True)
class Rect:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ParameterError(f"rectangle sides must be positive, got {self.a} x {self.b}")

    @property
    def corners(self) -> np.ndarray:
        return np.array([[0.0, 0.0], [self.a, 0.0], [self.a, self.b], [0.0, self.b]])

    @property
    def center(self) -> Point:
        return (self.a / 2.0, self.b / 2.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.a, self.b)

    @property
    def area(self) -> float:
        return self.a * self.b

    def contains(self, q: Sequence[float], tol: float = 1e-9) -> bool:
        return -tol <= q[0] <= self.a + tol and -tol <= q[1] <= self.b + tol


@dataclass(frozen=True)
class SensorSet:
    points: Tuple[Point, ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=np.float64).reshape(-1, 2)

    def min_separation(self) -> float:
        pts = self.as_array()
        if len(pts) < 2:
            return math.inf
        return float(min(math.dist(p, q) for p, q in itertools.combinations(pts, 2)))


@dataclass(frozen=True)
class ZonePartition:
    """Consecutive vertical strips cut at `cuts`, strip i weighted by weights[i]."""

    cuts: Tuple[float, ...]
    weights: Tuple[float, ...]
    strict_order: bool = True

    def __post_init__(self):
        object.__setattr__(self, "cuts", tuple(float(c) for c in self.cuts))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != len(self.cuts) + 1:
            raise ParameterError(f"{len(self.cuts)} cuts need {len(self.cuts) + 1} weights, got {len(self.weights)}")
        if any(not w > 0 for w in self.weights):
            raise ParameterError(f"zone weights must be positive, got {self.weights}")
        if any(c2 <= c1 for c1, c2 in zip(self.cuts, self.cuts[1:])):
            raise ParameterError(f"cuts must be strictly increasing, got {self.cuts}")
        if self.strict_order and self.weights[0] > min(self.weights[1:], default=self.weights[0]):
            raise ParameterError(f"expected w1 <= min of the other weights, got {self.weights}")

    @property
    def total_weight(self) -> float:
        return float(sum(self.weights))

    def bounds(self, rect: Rect) -> List[Tuple[float, float]]:
        edges = (0.0,) + self.cuts + (rect.a,)
        if not all(0.0 < c < rect.a for c in self.cuts):
            raise ParameterError(f"cuts must lie strictly inside (0, {rect.a}), got {self.cuts}")
        return list(zip(edges[:-1], edges[1:]))

    @classmethod
    def equal_strips(cls, rect: Rect, weights: Sequence[float], strict_order: bool = True) -> "ZonePartition":
        n = len(weights)
        return cls(tuple(rect.a * i / n for i in range(1, n)), tuple(weights), strict_order)


@dataclass(frozen=True)
class GridSpec:
    """Base cell size plus coarse-to-fine refinement.

    Level l searches a window of one previous cell around each incumbent
    sensor with cells of resolution / zoom**l.
    """

    resolution: float
    refinement_levels: int = 2
    zoom: int = 5

    def __post_init__(self):
        if not self.resolution > 0:
            raise ParameterError(f"grid resolution must be positive, got {self.resolution}")
        if self.refinement_levels < 0 or self.zoom < 2:
            raise ParameterError("refinement_levels must be >= 0 and zoom >= 2")

    @classmethod
    def default(cls, rect: Rect, settings: Optional[Settings] = None) -> "GridSpec":
        settings = settings or load_settings()
        return cls(min(rect.a, rect.b) / settings.GRID_CELLS_PER_SIDE,
                   settings.GRID_REFINEMENT_LEVELS, settings.GRID_ZOOM)

    def step(self, level: int) -> float:
        return self.resolution / self.zoom ** level


@dataclass(frozen=True)
class SensorScenario:
    rect: Rect
    p: int = 3
    delta: Optional[float] = None
    Delta: Optional[float] = None
    zones: Optional[ZonePartition] = None


# ---------------------------------------------------------------- geometry

def _eccentricities(points: np.ndarray, rect: Rect) -> np.ndarray:
    dx = np.maximum(np.abs(points[:, 0]), np.abs(points[:, 0] - rect.a))
    dy = np.maximum(np.abs(points[:, 1]), np.abs(points[:, 1] - rect.b))
    return np.hypot(dx, dy)


def eccentricity(q: Sequence[float], rect: Rect) -> float:
    """Largest distance from q to Omega, attained at a corner."""
    return float(max(math.hypot(q[0] - cx, q[1] - cy) for cx, cy in rect.corners))


def coverage_feasible(q: Sequence[float], rect: Rect, Delta: float) -> bool:
    if not Delta > 0:
        raise ParameterError(f"Delta must be positive, got {Delta}")
    return eccentricity(q, rect) <= Delta


def polygon_area(polygon: Sequence[Sequence[float]]) -> float:
    if len(polygon) < 3:
        return 0.0
    pts = np.asarray(polygon, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def triangle_area(points: Sequence[Sequence[float]]) -> float:
    if len(points) != 3:
        raise ParameterError(f"a triangle needs exactly 3 points, got {len(points)}")
    (x1, y1), (x2, y2), (x3, y3) = points
    return abs((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)) / 2.0


def _clip_halfplane(polygon: List[Point], c: float, keep_right: bool) -> List[Point]:
    def inside(pt):
        return pt[0] >= c if keep_right else pt[0] <= c

    def crossing(s, e):
        t = (c - s[0]) / (e[0] - s[0])
        return (c, s[1] + t * (e[1] - s[1]))

    output: List[Point] = []
    if not polygon:
        return output
    s = polygon[-1]
    for e in polygon:
        if inside(e):
            if not inside(s):
                output.append(crossing(s, e))
            output.append(e)
        elif inside(s):
            output.append(crossing(s, e))
        s = e
    return output


def clip_to_strip(polygon: Sequence[Point], x0: float, x1: float) -> List[Point]:
    """Sutherland-Hodgman clip of a polygon to the strip x0 <= x <= x1."""
    return _clip_halfplane(_clip_halfplane(list(polygon), x0, True), x1, False)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone chain hull, counter-clockwise, collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: List[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: List[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def zone_weighted_value(rect: Rect, zones: ZonePartition, sigma: SensorSet) -> float:
    """F = (1/W) sum_i w_i A(Omega_i ∩ conv(sigma)) by exact clipping."""
    if len(sigma) != 3:
        raise ParameterError(f"zone-weighted value needs 3 sensors, got {len(sigma)}")
    if not all(rect.contains(q) for q in sigma.points):
        raise ParameterError("sensors must lie inside the rectangle")
    if triangle_area(sigma.points) == 0.0:
        return 0.0
    total = 0.0
    for w, (x0, x1) in zip(zones.weights, zones.bounds(rect)):
        total += w * polygon_area(clip_to_strip(sigma.points, x0, x1))
    return total / zones.total_weight


def zone_areas(rect: Rect, zones: ZonePartition, sigma: SensorSet) -> List[float]:
    return [polygon_area(clip_to_strip(sigma.points, x0, x1)) for x0, x1 in zones.bounds(rect)]


def _area_left_of(xs: np.ndarray, ys: np.ndarray, c: float) -> np.ndarray:
    """Area of each triangle (rows of xs, ys) lying in x <= c, in closed form."""
    order = np.argsort(xs, axis=1, kind="stable")
    x = np.take_along_axis(xs, order, axis=1)
    y = np.take_along_axis(ys, order, axis=1)
    xa, xb, xc = x[:, 0], x[:, 1], x[:, 2]
    ya, yb, yc = y[:, 0], y[:, 1], y[:, 2]
    span = xc - xa
    safe_span = np.where(span > 0, span, 1.0)
    y_long = ya + (xb - xa) / safe_span * (yc - ya)
    width = np.abs(yb - y_long)
    total = 0.5 * width * span
    rise = np.where(xb > xa, xb - xa, 1.0)
    fall = np.where(xc > xb, xc - xb, 1.0)
    rising = width * (c - xa) ** 2 / (2.0 * rise)
    falling = total - width * (xc - c) ** 2 / (2.0 * fall)
    return np.where(c <= xa, 0.0, np.where(c <= xb, rising, np.where(c < xc, falling, total)))


def _weighted_values(rect: Rect, zones: ZonePartition, tri: np.ndarray) -> np.ndarray:
    """Vectorized F over triangles of shape (T, 3, 2)."""
    xs, ys = tri[:, :, 0], tri[:, :, 1]
    edges = [x0 for x0, _ in zones.bounds(rect)] + [rect.a]
    left = [_area_left_of(xs, ys, c) for c in edges]
    value = np.zeros(len(tri))
    for i, w in enumerate(zones.weights):
        value += w * (left[i + 1] - left[i])
    return value / zones.total_weight


# ---------------------------------------------------------------- grids

def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    count = max(int(math.ceil((hi - lo) / step - 1e-9)), 0) + 1
    return np.linspace(lo, hi, count) if count > 1 else np.array([lo])


def _grid(rect: Rect, step: float, x0: float = 0.0, x1: float = None, y0: float = 0.0, y1: float = None) -> np.ndarray:
    x1 = rect.a if x1 is None else x1
    y1 = rect.b if y1 is None else y1
    gx, gy = np.meshgrid(_axis(x0, x1, step), _axis(y0, y1, step), indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def _windows(rect: Rect, centers: np.ndarray, half: float, step: float) -> np.ndarray:
    blocks = [centers]
    for cx, cy in centers:
        blocks.append(_grid(rect, step, max(0.0, cx - half), min(rect.a, cx + half),
                            max(0.0, cy - half), min(rect.b, cy + half)))
    return np.unique(np.round(np.vstack(blocks), 12), axis=0)


def eccentricity_field(rect: Rect, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    pts = _grid(rect, grid.resolution)
    return pts, _eccentricities(pts, rect)


def write_field_csv(path: str, rect: Rect, grid: GridSpec, Delta: Optional[float] = None) -> int:
    """Per-cell eccentricity (and Delta-feasibility) as CSV; returns the row count."""
    pts, ecc = eccentricity_field(rect, grid)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y", "eccentricity", "feasible"])
        for (x, y), e in zip(pts, ecc):
            feasible = "" if Delta is None else int(e <= Delta)
            writer.writerow([f"{x:.6f}", f"{y:.6f}", f"{e:.6f}", feasible])
    return len(pts)


# ---------------------------------------------------------------- min-max-max

def _has_far_pair(points: np.ndarray, delta: float) -> Optional[Tuple[int, int]]:
    """A pair at distance >= delta, or None; the diameter is bracketed before any quadratic check."""
    if len(points) < 2:
        return None
    proj = points @ _DIRECTIONS.T
    extremes = np.unique(np.concatenate([proj.argmin(axis=0), proj.argmax(axis=0)]))
    sub = points[extremes]
    dist = np.linalg.norm(sub[:, None, :] - sub[None, :, :], axis=2)
    i, j = np.unravel_index(np.argmax(dist), dist.shape)
    if dist[i, j] >= delta:
        return tuple(sorted((int(extremes[i]), int(extremes[j]))))
    if dist[i, j] < delta * _DIAMETER_SLACK:
        return None
    for i in range(len(points)):
        far = np.flatnonzero(np.linalg.norm(points[i + 1:] - points[i], axis=1) >= delta)
        if far.size:
            return i, i + 1 + int(far[0])
    return None


def _separated(points: np.ndarray, cand: np.ndarray, need: int, delta: float) -> Optional[List[int]]:
    if need == 0:
        return []
    if cand.size < need:
        return None
    if need == 1:
        return [int(cand[0])]
    if need == 2:
        pair = _has_far_pair(points[cand], delta)
        return None if pair is None else [int(cand[pair[0]]), int(cand[pair[1]])]
    for pos, c in enumerate(cand):
        rest = cand[pos + 1:]
        rest = rest[np.linalg.norm(points[rest] - points[c], axis=1) >= delta]
        found = _separated(points, rest, need - 1, delta)
        if found is not None:
            return [int(c)] + found
    return None


def _min_max_search(rect: Rect, points: np.ndarray, p: int, delta: float) -> Optional[np.ndarray]:
    """Among `points`, the delta-separated p-set with the smallest largest eccentricity."""
    ecc = _eccentricities(points, rect)
    order = np.lexsort((points[:, 1], points[:, 0], ecc))
    pts = points[order]
    for last in range(len(pts)):
        prefix = np.arange(last)
        if p > 1:
            prefix = prefix[np.linalg.norm(pts[:last] - pts[last], axis=1) >= delta]
        rest = _separated(pts, prefix, p - 1, delta)
        if rest is not None:
            chosen = pts[[last] + rest]
            return chosen[np.lexsort((chosen[:, 1], chosen[:, 0]))]
    return None


def solve_minmaxmax(rect: Rect, p: int = 3, delta: float = 0.01,
                    grid: Optional[GridSpec] = None) -> Tuple[SensorSet, float]:
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if p > 1 and delta > rect.diagonal:
        raise InfeasibleError(f"delta = {delta} exceeds the rectangle diameter {rect.diagonal}",
                              {"diameter": rect.diagonal, "delta": delta})
    grid = grid or GridSpec.default(rect)

    candidates = _grid(rect, grid.step(0))
    best = _min_max_search(rect, candidates, p, delta)
    if best is None:
        raise InfeasibleError(f"no {p} grid points are pairwise {delta} apart",
                              {"grid_points": len(candidates), "delta": delta, "diameter": rect.diagonal})
    for level in range(1, grid.refinement_levels + 1):
        candidates = _windows(rect, best, grid.step(level - 1), grid.step(level))
        best = _min_max_search(rect, candidates, p, delta)
    objective = float(_eccentricities(best, rect).max())
    logger.info(f"[sensors] min-max-max p={p} delta={delta}: {objective:.6f}")
    return SensorSet(tuple(map(tuple, best))), objective


# ---------------------------------------------------------------- max area

def _max_triangle(points: np.ndarray) -> Tuple[np.ndarray, float]:
    """Largest-area triangle with vertices among `points` (searched over their hull)."""
    hull = convex_hull(points)
    if len(hull) < 3:
        base = hull[0] if len(hull) else points[0]
        tri = np.array([base, hull[-1] if len(hull) else base, base])
        return tri, 0.0
    best_area, best = -1.0, None
    for i in range(len(hull) - 2):
        a = hull[i]
        rest = hull[i + 1:]
        u = rest - a
        cross = np.abs(u[:, None, 0] * u[None, :, 1] - u[:, None, 1] * u[None, :, 0]) / 2.0
        cross = np.triu(cross, k=1)
        j, k = np.unravel_index(np.argmax(cross), cross.shape)
        if cross[j, k] > best_area:
            best_area, best = float(cross[j, k]), np.array([a, rest[j], rest[k]])
    return best, best_area


def solve_max_area(rect: Rect, Delta: float, grid: Optional[GridSpec] = None,
                   settings: Optional[Settings] = None) -> Tuple[SensorSet, float]:
    settings = settings or load_settings()
    if not Delta > 0:
        raise ParameterError(f"Delta must be positive, got {Delta}")
    min_delta = eccentricity(rect.center, rect)
    limit = Delta * (1.0 + settings.AREA_TOL)
    if limit < min_delta:
        raise InfeasibleError(f"no point hears the whole rectangle within Delta = {Delta}",
                              {"min_Delta": min_delta})
    grid = grid or GridSpec.default(rect, settings)

    def feasible(points: np.ndarray) -> np.ndarray:
        keep = points[_eccentricities(points, rect) <= limit]
        return np.vstack([keep, np.array([rect.center])])

    best, area = _max_triangle(feasible(_grid(rect, grid.step(0))))
    for level in range(1, grid.refinement_levels + 1):
        window = _windows(rect, best, grid.step(level - 1), grid.step(level))
        tri, value = _max_triangle(np.vstack([feasible(window), best]))
        if value >= area:
            best, area = tri, value
    area = triangle_area(best)
    logger.info(f"[sensors] max-area Delta={Delta}: {area:.6f}")
    return SensorSet(tuple(map(tuple, best))), area


# ---------------------------------------------------------------- weighted area

def _boundary_point(rect: Rect, t: np.ndarray) -> np.ndarray:
    """Perimeter parametrization counter-clockwise from (0,0)."""
    a, b = rect.a, rect.b
    t = np.mod(t, 2 * (a + b))
    sides = [t <= a, t <= a + b, t <= 2 * a + b, np.ones_like(t, dtype=bool)]
    zero = np.zeros_like(t)
    x = np.select(sides, [t, zero + a, a - (t - a - b), zero])
    y = np.select(sides, [zero, t - a, zero + b, b - (t - 2 * a - b)])
    return np.column_stack([x, y])


def _best_weighted(rect: Rect, zones: ZonePartition, tri_t: np.ndarray) -> Tuple[np.ndarray, float]:
    tri = _boundary_point(rect, tri_t.ravel()).reshape(-1, 3, 2)
    values = _weighted_values(rect, zones, tri)
    k = int(np.argmax(values))
    return tri_t[k], float(values[k])


def solve_weighted_area(rect: Rect, zones: ZonePartition, grid: Optional[GridSpec] = None,
                        settings: Optional[Settings] = None) -> Tuple[SensorSet, float]:
    """Maximize F over triangles with vertices on the boundary of Omega.

    Any triangle in Omega is contained in one whose vertices lie on the
    boundary (push each vertex away from its opposite side), and F grows with
    containment because the weights are positive.
    """
    settings = settings or load_settings()
    grid = grid or GridSpec.default(rect, settings)
    perimeter = 2 * (rect.a + rect.b)
    count = int(min(settings.GRID_BOUNDARY_SAMPLES, math.ceil(perimeter / grid.step(0))))
    corners_t = np.array([0.0, rect.a, rect.a + rect.b, 2 * rect.a + rect.b])
    samples = np.unique(np.concatenate([np.linspace(0.0, perimeter, count, endpoint=False), corners_t]))
    triples = np.array(list(itertools.combinations(range(len(samples)), 3)))
    best_t, best = _best_weighted(rect, zones, samples[triples])

    step = perimeter / count
    for _ in range(grid.refinement_levels):
        fine = step / grid.zoom
        offsets = np.arange(-grid.zoom, grid.zoom + 1) * fine
        axes = [np.unique(np.concatenate([t + offsets, corners_t[np.abs(corners_t - t) <= step]])) for t in best_t]
        mesh = np.array(np.meshgrid(*axes, indexing="ij")).reshape(3, -1).T
        t, value = _best_weighted(rect, zones, mesh)
        if value >= best:
            best_t, best = t, value
        step = fine

    sigma = SensorSet(tuple(map(tuple, _boundary_point(rect, best_t))))
    value = zone_weighted_value(rect, zones, sigma)
    logger.info(f"[sensors] weighted area: {value:.6f}")
    return sigma, value


def verify_sensors(rect: Rect, sigma: SensorSet, delta: Optional[float] = None,
                   Delta: Optional[float] = None, tol: float = 1e-9) -> Dict[str, bool]:
    """Independent constraint check of a sensor set."""
    checks = {"inside": all(rect.contains(q, tol) for q in sigma.points)}
    if delta is not None:
        checks["separated"] = sigma.min_separation() >= delta - tol
    if Delta is not None:
        checks["in_range"] = all(eccentricity(q, rect) <= Delta * (1 + tol) for q in sigma.points)
    return checks
