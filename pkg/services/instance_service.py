"""
Instance formats and generators.

Native text format (line oriented, `#` starts a comment):

    pmpdc n m p              approval n m k            sensors a b delta Delta c1 c2 w1 w2 w3
    <n rows of m distances>  <n rows of m 0/1 values>
    <s-vector: n values>

OR-Library pmed files (`n_vertices n_edges p` then 1-based weighted edges) are
read-only; their all-pairs shortest paths become the distance matrix and the
limits s_i are synthesized from a coverage rule.
"""

import logging
import math
from typing import List, Optional, Tuple, Union

import numpy as np

from services.core import ApprovalProfile, DistanceMatrix, ParameterError
from services.pmedian_service import PMedianInstance
from services.committee_service import CommitteeProblem
from services.sensor_service import Rect, SensorScenario, ZonePartition

logger = logging.getLogger("locopt.instances")

NativeInstance = Union[PMedianInstance, CommitteeProblem, SensorScenario]


class InstanceFormatError(ParameterError):
    """Malformed instance text, located by 1-based line and column."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = ""
        if line is not None:
            location = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(location + message)
        self.line = line
        self.column = column


def _content_lines(text: str) -> List[Tuple[int, List[str]]]:
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((number, body.split()))
    return lines


def _number(token: str, line: int, column: int, kind=float):
    try:
        value = kind(token)
    except ValueError:
        raise InstanceFormatError(f"expected {'an integer' if kind is int else 'a number'}, got {token!r}", line, column) from None
    if kind is float and not math.isfinite(value):
        raise InstanceFormatError(f"non-finite value {token!r}", line, column)
    return value


def _fmt(value: float) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def _parse_pmpdc(header, rows, name) -> PMedianInstance:
    line, tokens = header
    if len(tokens) != 4:
        raise InstanceFormatError("pmpdc header must be `pmpdc n m p`", line)
    n, m, p = (_number(t, line, c, int) for c, t in enumerate(tokens[1:], start=2))
    if n < 1 or m < 1:
        raise InstanceFormatError(f"counts must be positive, got n={n} m={m}", line)
    if len(rows) != n + 1:
        raise InstanceFormatError(f"expected {n} matrix rows and one s-vector line, found {len(rows)} lines",
                                  rows[-1][0] if rows else line)
    d = np.empty((n, m))
    for i, (ln, tok) in enumerate(rows[:n]):
        if len(tok) != m:
            raise InstanceFormatError(f"matrix row {i + 1} has {len(tok)} entries, expected {m}", ln)
        for j, t in enumerate(tok):
            d[i, j] = _number(t, ln, j + 1)
            if d[i, j] < 0:
                raise InstanceFormatError(f"negative distance {t}", ln, j + 1)
    s_line, s_tok = rows[n]
    if len(s_tok) != n:
        raise InstanceFormatError(f"s-vector has {len(s_tok)} entries, expected {n}", s_line)
    s = np.array([_number(t, s_line, c) for c, t in enumerate(s_tok, start=1)])
    if np.any(s < 0):
        raise InstanceFormatError("distance limits must be nonnegative", s_line, int(np.argmax(s < 0)) + 1)
    if not 1 <= p <= m:
        raise InstanceFormatError(f"p must satisfy 1 <= p <= {m}, got {p}", line, 4)
    return PMedianInstance(DistanceMatrix(d), p, s, name)


def _parse_approval(header, rows) -> CommitteeProblem:
    line, tokens = header
    if len(tokens) != 4:
        raise InstanceFormatError("approval header must be `approval n m k`", line)
    n, m, k = (_number(t, line, c, int) for c, t in enumerate(tokens[1:], start=2))
    if n < 1 or m < 1:
        raise InstanceFormatError(f"counts must be positive, got n={n} m={m}", line)
    if len(rows) != n:
        raise InstanceFormatError(f"expected {n} profile rows, found {len(rows)}", rows[-1][0] if rows else line)
    matrix = np.zeros((n, m), dtype=bool)
    for i, (ln, tok) in enumerate(rows):
        cells = list(tok[0]) if len(tok) == 1 and m > 1 else tok
        if len(cells) != m:
            raise InstanceFormatError(f"profile row {i + 1} has {len(cells)} entries, expected {m}", ln)
        for j, c in enumerate(cells):
            if c not in ("0", "1"):
                raise InstanceFormatError(f"profile entries must be 0 or 1, got {c!r}", ln, j + 1)
            matrix[i, j] = c == "1"
    if not 1 <= k <= n:
        raise InstanceFormatError(f"k must satisfy 1 <= k <= {n}, got {k}", line, 4)
    return CommitteeProblem(ApprovalProfile(matrix), k)


def _parse_sensors(header, rows) -> SensorScenario:
    line, tokens = header
    if rows:
        raise InstanceFormatError("sensors scenario is a single header line", rows[0][0])
    values = [_number(t, line, c) for c, t in enumerate(tokens[1:], start=2)]
    if len(values) < 4 or (len(values) - 4) % 2 != 1:
        raise InstanceFormatError("sensors header must be `sensors a b delta Delta cuts... weights...` "
                                  "with one more weight than cuts", line)
    a, b, delta, Delta = values[:4]
    zone_values = values[4:]
    n_cuts = (len(zone_values) - 1) // 2
    try:
        rect = Rect(a, b)
        zones = ZonePartition(tuple(zone_values[:n_cuts]), tuple(zone_values[n_cuts:]), strict_order=False)
        zones.bounds(rect)
    except ParameterError as e:
        raise InstanceFormatError(str(e), line)
    return SensorScenario(rect, 3, delta, Delta, zones)


def parse_native(text: str, name: str = "instance") -> NativeInstance:
    lines = _content_lines(text)
    if not lines:
        raise InstanceFormatError("empty instance file")
    header, rows = lines[0], lines[1:]
    kind = header[1][0].lower()
    if kind == "pmpdc":
        return _parse_pmpdc(header, rows, name)
    if kind == "approval":
        return _parse_approval(header, rows)
    if kind == "sensors":
        return _parse_sensors(header, rows)
    raise InstanceFormatError(f"unknown problem kind {header[1][0]!r}", header[0], 1)


def format_native(obj: NativeInstance) -> str:
    if isinstance(obj, PMedianInstance):
        lines = [f"pmpdc {obj.n_demand} {obj.n_sites} {obj.p}"]
        lines += [" ".join(_fmt(v) for v in row) for row in obj.dm.d]
        lines.append(" ".join(_fmt(v) for v in obj.s))
    elif isinstance(obj, CommitteeProblem):
        prof = obj.profile
        lines = [f"approval {prof.n_voters} {prof.m_candidates} {obj.k}"]
        lines += [" ".join("1" if v else "0" for v in row) for row in prof.p]
    elif isinstance(obj, SensorScenario):
        zones = obj.zones or ZonePartition((), (1.0,), strict_order=False)
        values = [obj.rect.a, obj.rect.b, obj.delta or 0.0, obj.Delta or 0.0, *zones.cuts, *zones.weights]
        lines = ["sensors " + " ".join(_fmt(v) for v in values)]
    else:
        raise ParameterError(f"cannot serialize {type(obj).__name__}")
    return "\n".join(lines) + "\n"


def floyd_warshall(matrix: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths; missing edges are np.inf, the diagonal must be zero."""
    dist = np.array(matrix, dtype=np.float64)
    for k in range(len(dist)):
        dist = np.minimum(dist, dist[:, k, None] + dist[None, k, :])
    return dist


def coverage_limits(d: np.ndarray, beta: float, q: int) -> np.ndarray:
    """s_i = beta x (q-th smallest entry of row i), the row's own zero included."""
    if not 1 <= q <= d.shape[1]:
        raise ParameterError(f"q must lie in 1..{d.shape[1]}, got {q}")
    return beta * np.sort(d, axis=1)[:, q - 1]


def parse_orlib_pmedian(text: str, beta: float = 1.1, q: Optional[int] = None,
                        name: str = "orlib") -> PMedianInstance:
    lines = _content_lines(text)
    if not lines:
        raise InstanceFormatError("empty OR-Library file")
    line, tokens = lines[0]
    if len(tokens) != 3:
        raise InstanceFormatError("header must be `n_vertices n_edges p`", line)
    n, n_edges, p = (_number(t, line, c, int) for c, t in enumerate(tokens, start=1))
    if len(lines) - 1 < n_edges:
        raise InstanceFormatError(f"expected {n_edges} edges, found {len(lines) - 1}", lines[-1][0])
    graph = np.full((n, n), np.inf)
    np.fill_diagonal(graph, 0.0)
    for ln, tok in lines[1:n_edges + 1]:
        if len(tok) != 3:
            raise InstanceFormatError("edge lines must be `i j weight`", ln)
        i, j = _number(tok[0], ln, 1, int), _number(tok[1], ln, 2, int)
        w = _number(tok[2], ln, 3)
        if not (1 <= i <= n and 1 <= j <= n):
            raise InstanceFormatError(f"vertex index out of range 1..{n}", ln)
        if w < 0:
            raise InstanceFormatError(f"negative edge weight {w}", ln, 3)
        if i != j:
            # a repeated edge keeps its last weight
            graph[i - 1, j - 1] = graph[j - 1, i - 1] = w
    dist = floyd_warshall(graph)
    if np.isinf(dist).any():
        i, j = map(int, np.argwhere(np.isinf(dist))[0])
        raise InstanceFormatError(f"graph is disconnected: vertex {j + 1} is unreachable from vertex {i + 1}")
    q = q if q is not None else max(1, math.ceil(n / 10))
    s = coverage_limits(dist, beta, q)
    logger.info(f"[instances] OR-Library {name}: n={n}, p={p}, beta={beta}, q={q}")
    return PMedianInstance(DistanceMatrix(dist), p, s, name)


def generate_pmpdc(seed: int, n: int, p: int, s_quantile: float, name: Optional[str] = None) -> PMedianInstance:
    """n uniform points in the unit square; sites are the demand points; distances x1000 rounded."""
    if not n >= p >= 1:
        raise ParameterError(f"need n >= p >= 1, got n={n}, p={p}")
    if not 0 < s_quantile <= 1:
        raise ParameterError(f"s_quantile must lie in (0, 1], got {s_quantile}")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    d = np.rint(1000.0 * np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2))
    s = np.zeros(n)
    for i in range(n):
        positive = d[i][d[i] > 0]
        if positive.size:
            s[i] = np.quantile(positive, s_quantile, method="inverted_cdf")
    return PMedianInstance(DistanceMatrix(d), p, s, name or f"pmpdc-{seed}-{n}-{p}-{s_quantile}")


def generate_profiles(seed: int, n: int, m: int, density: float) -> ApprovalProfile:
    if not 0.0 <= density <= 1.0:
        raise ParameterError(f"density must lie in [0, 1], got {density}")
    if n < 1 or m < 1:
        raise ParameterError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    return ApprovalProfile(rng.random((n, m)) < density)
