"""Facility location in the unit square.

A planar percentile mechanism applies one percentile vector per axis: the
first coordinate of facility ``j`` is the ``i``-th smallest first
coordinate among the agents, with ``i`` taken from the first row, and
likewise for the second coordinate. The FCFS game is the shared engine from
:mod:`capflp.fcfs` with Euclidean distance and utility ceiling sqrt(2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import make_capacities
from .errors import (
    CapacityInfeasible,
    EmptyInput,
    InvalidParams,
    LengthMismatch,
    NonFinite,
    OutOfRange,
    UnsupportedArity,
)
from .fcfs import PLANE, Placement
from .mechanisms import MechanismKind, PercentileVector, classify_indices, percentile_indices

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PlanarInstance:
    """Agent points in [0, 1]^2, kept in input order."""

    points: tuple[tuple[float, float], ...]

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def positions(self) -> tuple[tuple[float, float], ...]:
        return self.points

    def __len__(self) -> int:
        return len(self.points)

    @property
    def coordinate_orders(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        """Sorted projections on each axis."""
        return (
            tuple(sorted(p[0] for p in self.points)),
            tuple(sorted(p[1] for p in self.points)),
        )

    def to_json(self) -> str:
        return json.dumps([list(p) for p in self.points])


def make_planar_instance(raw_points: Iterable[Sequence[float]]) -> PlanarInstance:
    points = []
    for p in raw_points:
        if len(p) != 2:
            raise LengthMismatch(f"planar points have two coordinates, got {p!r}")
        x, y = float(p[0]), float(p[1])
        for c in (x, y):
            if not math.isfinite(c):
                raise NonFinite(f"non-finite coordinate in {p!r}")
            if c < 0.0 or c > 1.0:
                raise OutOfRange(f"point {p!r} outside the unit square")
        points.append((x, y))
    if not points:
        raise EmptyInput("an instance needs at least one agent")
    return PlanarInstance(tuple(points))


def planar_instance_from_json(text: str) -> PlanarInstance:
    data = json.loads(text)
    if isinstance(data, dict):
        data = data.get("points")
    if not isinstance(data, list):
        raise InvalidParams("planar instance JSON must be an array of [x, y] pairs")
    return make_planar_instance(data)


@dataclass(frozen=True)
class PercentileMatrix:
    """One sorted percentile row per axis."""

    rows: tuple[PercentileVector, PercentileVector]

    def __post_init__(self):
        rows = tuple(r if isinstance(r, PercentileVector) else PercentileVector(tuple(r)) for r in self.rows)
        if len(rows) != 2:
            raise InvalidParams("a planar percentile matrix has two rows")
        if rows[0].m != rows[1].m:
            raise LengthMismatch("both rows need one entry per facility")
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return self.rows[0].m

    def axis_indices(self, n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return percentile_indices(self.rows[0], n), percentile_indices(self.rows[1], n)

    def to_dict(self) -> dict:
        return {"rows": [list(r.entries) for r in self.rows]}

    @classmethod
    def from_dict(cls, data) -> "PercentileMatrix":
        rows = data["rows"] if isinstance(data, dict) else data
        return cls(tuple(tuple(r) for r in rows))

    @classmethod
    def parse(cls, text: str) -> "PercentileMatrix":
        return cls.from_dict(json.loads(text))


def as_matrix(V) -> PercentileMatrix:
    return V if isinstance(V, PercentileMatrix) else PercentileMatrix(tuple(tuple(r) for r in V))


def planar_percentile_placement(V, instance: PlanarInstance, capacities: Sequence[int]) -> Placement:
    matrix = as_matrix(V)
    caps = make_capacities(capacities)
    if len(caps) != matrix.m:
        raise LengthMismatch(f"{len(caps)} capacities for {matrix.m} facilities")
    if sum(caps) >= instance.n:
        raise CapacityInfeasible(f"total capacity {sum(caps)} must be below n = {instance.n}")
    first, second = instance.coordinate_orders
    idx1, idx2 = matrix.axis_indices(instance.n)
    positions = tuple((first[a - 1], second[b - 1]) for a, b in zip(idx1, idx2))
    return Placement(positions, caps, PLANE)


def coordinate_kinds_are_stable(kinds: Sequence[MechanismKind]) -> bool:
    """Stability rule for per-axis mechanism kinds in any dimension: every
    axis all-in-one, or all but one all-in-one with the remaining axis
    side-by-side."""
    others = [k for k in kinds if MechanismKind(k) is not MechanismKind.AIO]
    return not others or (len(others) == 1 and MechanismKind(others[0]) is MechanismKind.SBS)


def planar_is_es(V, n: int, capacities: Sequence[int]) -> bool:
    matrix = as_matrix(V)
    caps = make_capacities(capacities)
    if matrix.m != 2:
        raise UnsupportedArity("the planar stability rule covers two facilities; use the brute-force check")
    if len(caps) != 2:
        raise LengthMismatch("two capacities expected")
    if sum(caps) >= n:
        raise CapacityInfeasible(f"total capacity {sum(caps)} must be below n = {n}")
    kinds = [classify_indices(*idx) for idx in matrix.axis_indices(n)]
    return coordinate_kinds_are_stable(kinds)


@dataclass(frozen=True)
class PlanarRatioResult:
    ratio: float
    active_case: str
    numerator_welfare: float
    denominator_welfare: float
    approximate: bool = False

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "case": self.active_case,
            "num": self.numerator_welfare,
            "den": self.denominator_welfare,
            "approximate": self.approximate,
        }


def ar_median_planar(n: int, k1: int, k2: int) -> PlanarRatioResult:
    """Worst-case ratio of both facilities at the coordinate-wise median.

    The worst instance has ``n // 2`` agents at (0, 0), ``n // 2`` at (1, 1)
    and one at (0, 1), where the facilities land; the mechanism welfare is
    ``(sqrt2 - 1)(k1 + k2) + 1``. For even ``n`` the median is the
    ``ceil(n/2)``-th point on each axis and the value is flagged approximate.
    """
    k1, k2 = max(k1, k2), min(k1, k2)
    if n < 1 or k2 < 1:
        raise InvalidParams("n and capacities must be positive")
    if k1 + k2 >= n:
        raise CapacityInfeasible(f"total capacity {k1 + k2} must be below n = {n}")
    half = n // 2
    den = (SQRT2 - 1.0) * (k1 + k2) + 1.0
    if k1 <= half:
        num = SQRT2 * (k1 + k2)
        case = "balanced"
    else:
        num = SQRT2 * (k2 + half) + SQRT2 - 1.0
        case = "large-capacity"
    return PlanarRatioResult(num / den, case, num, den, approximate=n % 2 == 0)


def planar_worst_case_instance(n: int) -> PlanarInstance:
    """``n // 2`` agents at (0, 0) and at (1, 1), one at (0, 1); ``n`` odd."""
    if n < 1 or n % 2 == 0:
        raise InvalidParams("the corner construction needs an odd number of agents")
    half = n // 2
    return PlanarInstance(((0.0, 0.0),) * half + ((1.0, 1.0),) * half + ((0.0, 1.0),))


MEDIAN_MATRIX = PercentileMatrix(((0.5, 0.5), (0.5, 0.5)))
