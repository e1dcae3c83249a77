"""
Shared primitives for every locopt solver.

Distance matrices, approval profiles, committees, the k-centrum (sum of the
k largest) aggregation, Hamming distance, nearest-open-site assignment and the
common solver report. All types are immutable once built.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np


class LocoptError(Exception):
    """Base class for locopt errors."""


class ParameterError(LocoptError, ValueError):
    """An argument violates an operation's precondition."""


class BudgetExceededError(LocoptError):
    """An exact method would exceed its enumeration budget."""

    def __init__(self, message: str, size: int = None, budget: int = None):
        super().__init__(message)
        self.size = size
        self.budget = budget


class InfeasibleError(LocoptError):
    """No solution satisfies the constraints; `witness` explains why."""

    def __init__(self, message: str, witness: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.witness = witness or {}


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class DistanceMatrix:
    """Nonnegative finite distances indexed [demand][site]."""

    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ParameterError(f"distance matrix must be a nonempty 2-D array, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ParameterError("distance matrix contains non-finite entries")
        if np.any(d < 0):
            i, j = map(int, np.argwhere(d < 0)[0])
            raise ParameterError(f"negative distance d[{i}][{j}] = {d[i, j]}")
        object.__setattr__(self, "d", _frozen(d))

    @property
    def n_demand(self) -> int:
        return self.d.shape[0]

    @property
    def n_sites(self) -> int:
        return self.d.shape[1]

    @property
    def max_distance(self) -> float:
        return float(self.d.max())

    @property
    def is_integral(self) -> bool:
        return bool(np.all(self.d == np.round(self.d)))


@dataclass(frozen=True)
class OrderedWeights:
    """The k-centrum weight vector W(k) = (1,...,1,0,...,0) of length n with k ones."""

    n: int
    k: int

    def __post_init__(self):
        if self.n < 1 or not 1 <= self.k <= self.n:
            raise ParameterError(f"k must satisfy 1 <= k <= n, got k={self.k}, n={self.n}")

    def vector(self) -> np.ndarray:
        w = np.zeros(self.n, dtype=np.int64)
        w[: self.k] = 1
        return w

    def aggregate(self, values: Sequence[float]) -> float:
        if len(values) != self.n:
            raise ParameterError(f"expected {self.n} values, got {len(values)}")
        return k_centrum_aggregate(values, self.k)


@dataclass(frozen=True)
class ApprovalProfile:
    """Boolean approval matrix [voter][candidate]."""

    p: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.p)
        if raw.ndim != 2 or raw.shape[0] < 1 or raw.shape[1] < 1:
            raise ParameterError(f"profile must be a nonempty voters x candidates matrix, got shape {raw.shape}")
        if raw.dtype != np.bool_ and not np.all((raw == 0) | (raw == 1)):
            raise ParameterError("profile entries must be 0 or 1")
        object.__setattr__(self, "p", _frozen(raw.astype(bool)))

    @property
    def n_voters(self) -> int:
        return self.p.shape[0]

    @property
    def m_candidates(self) -> int:
        return self.p.shape[1]

    def approvals(self) -> np.ndarray:
        return self.p.sum(axis=0)


@dataclass(frozen=True)
class Committee:
    """Selection vector x, x_j = 1 when candidate j is elected."""

    x: Tuple[int, ...]

    def __post_init__(self):
        x = tuple(int(v) for v in np.asarray(self.x).ravel())
        if any(v not in (0, 1) for v in x):
            raise ParameterError("committee entries must be 0 or 1")
        object.__setattr__(self, "x", x)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def bits(self) -> str:
        return "".join(str(v) for v in self.x)

    @classmethod
    def from_bits(cls, bits: str) -> "Committee":
        return cls(tuple(int(c) for c in bits.strip()))

    def as_array(self) -> np.ndarray:
        return np.array(self.x, dtype=bool)


@dataclass
class SolverReport:
    """Bounds, incumbent and bookkeeping of one solver run."""

    solver: str
    lower_bound: Optional[float] = None
    upper_bound: Optional[float] = None
    iterations: int = 0
    seed: Optional[int] = None
    wall_time: float = 0.0
    infeasible: bool = False
    trajectory: List[float] = field(default_factory=list)
    notes: Dict[str, Any] = field(default_factory=dict)

    @property
    def gap(self) -> Optional[float]:
        if self.lower_bound is None or self.upper_bound is None:
            return None
        if math.isinf(self.lower_bound) or math.isinf(self.upper_bound):
            return None
        return (self.upper_bound - self.lower_bound) / max(abs(self.upper_bound), 1.0)

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        out = {
            "solver": self.solver,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "gap": self.gap,
            "iterations": self.iterations,
            "seed": self.seed,
            "infeasible": self.infeasible,
            "notes": dict(self.notes),
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def k_centrum_aggregate(values: Iterable[float], k: int) -> float:
    """Sum of the k largest values; k=1 is the maximum and k=len(values) the sum."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.ndim != 1 or not 1 <= k <= v.size:
        raise ParameterError(f"k must satisfy 1 <= k <= {v.size}, got {k}")
    if not np.all(np.isfinite(v)):
        raise ParameterError("values must be finite")
    top = np.partition(v, v.size - k)[v.size - k:]
    total = float(top.sum())
    return int(total) if np.all(v == np.round(v)) else total


def hamming(profile_row: Sequence[int], committee) -> int:
    """Number of coordinates where a voter's approvals and the committee differ."""
    row = np.asarray(profile_row).astype(bool).ravel()
    x = committee.as_array() if isinstance(committee, Committee) else np.asarray(committee).astype(bool).ravel()
    if row.size != x.size:
        raise ParameterError(f"length mismatch: profile row has {row.size} entries, committee {x.size}")
    return int(np.count_nonzero(row != x))


def closest_assignment(dm: DistanceMatrix, open_sites: Iterable[int]) -> Tuple[Dict[int, int], float]:
    """Assign each demand to its nearest open site, ties to the lowest site index."""
    sites = sorted(set(int(j) for j in open_sites))
    if not sites:
        raise ParameterError("open site set is empty")
    if sites[0] < 0 or sites[-1] >= dm.n_sites:
        raise ParameterError(f"site index out of range 0..{dm.n_sites - 1}: {sites}")
    cols = np.array(sites)
    sub = dm.d[:, cols]
    # argmin returns the first minimum; cols are ascending
    nearest = cols[np.argmin(sub, axis=1)]
    assignment = {i: int(j) for i, j in enumerate(nearest)}
    total = float(sub.min(axis=1).sum())
    return assignment, total
