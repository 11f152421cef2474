"""Percentile mechanisms: placement, taxonomy, equilibrium-stability
conditions, best vectors and the All-aside mechanism.

Agent indices in this module are 1-based, as in order statistics: index
``i`` is the i-th smallest report.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import Instance, make_capacities
from .errors import (
    CapacityInfeasible,
    Infeasible,
    InvalidParams,
    PreconditionViolated,
    UnsupportedArity,
    UnsupportedCase,
)
from .fcfs import Placement

# Slack added before flooring (n - 1) * v, so that decimal inputs such as
# v = 0.58, n = 101 land on the index their decimal value denotes.
FLOOR_EPS = 1e-9


class MechanismKind(str, enum.Enum):
    AIO = "AIO"
    SBS = "SBS"
    WG = "WG"
    ALL_ASIDE = "AllAside"
    UNIFORM_GRID = "UniformGrid"


@dataclass(frozen=True)
class PercentileVector:
    """Sorted percentiles; ``assignment[j]`` is the index of the capacity
    installed at slot ``j`` (identity by default)."""

    entries: tuple[float, ...]
    assignment: tuple[int, ...] | None = None

    def __post_init__(self):
        v = tuple(float(e) for e in self.entries)
        if not v:
            raise InvalidParams("a percentile vector needs at least one entry")
        if any(not (0.0 <= e <= 1.0) for e in v):
            raise InvalidParams("percentiles must lie in [0, 1]")
        if any(a > b for a, b in zip(v, v[1:])):
            raise InvalidParams("percentile entries must be sorted ascending")
        object.__setattr__(self, "entries", v)
        if self.assignment is not None:
            a = tuple(int(j) for j in self.assignment)
            if sorted(a) != list(range(len(v))):
                raise InvalidParams("assignment must be a permutation of the slots")
            # the identity is stored as None so equal vectors compare equal
            object.__setattr__(self, "assignment", None if a == tuple(range(len(v))) else a)

    @property
    def m(self) -> int:
        return len(self.entries)

    def slot_capacities(self, capacities: Sequence[int]) -> tuple[int, ...]:
        if len(capacities) != self.m:
            raise InvalidParams(f"{len(capacities)} capacities for {self.m} percentiles")
        if self.assignment is None:
            return tuple(int(k) for k in capacities)
        return tuple(int(capacities[a]) for a in self.assignment)

    def mirrored(self) -> "PercentileVector":
        """The same slots with the capacity order reversed (larger capacity
        on the right for a larger-first capacity vector)."""
        base = self.assignment or tuple(range(self.m))
        return PercentileVector(self.entries, tuple(reversed(base)))

    def to_dict(self) -> dict:
        assignment = list(self.assignment) if self.assignment is not None else list(range(self.m))
        return {"v": list(self.entries), "assignment": assignment}

    @classmethod
    def from_dict(cls, data) -> "PercentileVector":
        if isinstance(data, list):
            return cls(tuple(data))
        return cls(tuple(data["v"]), tuple(data["assignment"]) if data.get("assignment") is not None else None)

    @classmethod
    def parse(cls, text: str) -> "PercentileVector":
        return cls.from_dict(json.loads(text))


def as_vector(v) -> PercentileVector:
    if isinstance(v, PercentileVector):
        return v
    return PercentileVector(tuple(v))


def percentile_index(v: float, n: int) -> int:
    return min(n, math.floor((n - 1) * v + FLOOR_EPS) + 1)


def percentile_indices(v, n: int) -> tuple[int, ...]:
    if n < 1:
        raise InvalidParams("n must be positive")
    return tuple(percentile_index(e, n) for e in as_vector(v).entries)


def vector_from_indices(indices: Sequence[int], n: int) -> PercentileVector:
    """A percentile vector whose indices are exactly ``indices``."""
    if n == 1:
        return PercentileVector(tuple(0.0 for _ in indices))
    return PercentileVector(tuple((i - 1) / (n - 1) for i in indices))


def apply_percentile(v, instance: Instance, capacities: Sequence[int]) -> Placement:
    vec = as_vector(v)
    caps = make_capacities(capacities)
    if sum(caps) >= instance.n:
        raise CapacityInfeasible(f"total capacity {sum(caps)} must be below n = {instance.n}")
    idx = percentile_indices(vec, instance.n)
    return Placement(tuple(instance.positions[i - 1] for i in idx), vec.slot_capacities(caps))


def classify_indices(i1: int, i2: int) -> MechanismKind:
    gap = abs(i2 - i1)
    if gap == 0:
        return MechanismKind.AIO
    if gap == 1:
        return MechanismKind.SBS
    return MechanismKind.WG


def classify_percentile(v, n: int) -> MechanismKind:
    vec = as_vector(v)
    if vec.m != 2:
        raise UnsupportedArity("the AIO/SBS/WG taxonomy is defined for two facilities")
    return classify_indices(*percentile_indices(vec, n))


def _groups(indices: Sequence[int], caps: Sequence[int]):
    """Merge co-located facilities: [(index, total capacity)] by index."""
    merged: dict[int, int] = {}
    for i, k in zip(indices, caps):
        merged[i] = merged.get(i, 0) + k
    return sorted(merged.items())


def es_condition(v, n: int, capacities: Sequence[int]) -> bool:
    """Closed-form equilibrium-stability test for a percentile vector.

    Facilities on the same agent are merged. One location is always stable;
    two locations are stable when adjacent, when the index gap covers the
    total capacity minus one, or when either location has capacity one; three
    or more locations are stable when every capacity is one, and otherwise
    need equal capacities and every gap at least ``2k - 1``.

    A capacity-one facility is always taken by an agent at distance 0, and
    the other facility then serves the ``k`` closest of the remaining agents,
    so every equilibrium has the same welfare whatever the gap.
    """
    vec = as_vector(v)
    caps = vec.slot_capacities(make_capacities(capacities))
    if sum(caps) >= n:
        raise CapacityInfeasible(f"total capacity {sum(caps)} must be below n = {n}")
    groups = _groups(percentile_indices(vec, n), caps)
    if len(groups) == 1:
        return True
    if len(groups) == 2:
        (i1, k1), (i2, k2) = groups
        return i2 - i1 <= 1 or i2 - i1 >= k1 + k2 - 1 or min(k1, k2) == 1
    ks = {k for _, k in groups}
    if ks == {1}:
        # every facility is taken by the agent it sits on
        return True
    gaps = [b[0] - a[0] for a, b in zip(groups, groups[1:])]
    if len(ks) != 1 or min(gaps) <= 1:
        raise UnsupportedCase(
            "closed-form stability for three or more locations needs equal capacities and gaps above one"
        )
    k = ks.pop()
    return all(g >= 2 * k - 1 for g in gaps)


@dataclass(frozen=True)
class BestVectorReport:
    indices: tuple[int, ...]
    vector: PercentileVector
    predicted_ratio: float
    case_label: str
    kind: MechanismKind
    n: int
    capacities: tuple[int, ...]
    delta: int | None = None
    exact_ratio: Fraction | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out = {
            "indices": list(self.indices),
            "v": list(self.vector.entries),
            "predicted_ratio": self.predicted_ratio,
            "case_label": self.case_label,
            "kind": self.kind.value,
            "n": self.n,
            "capacities": list(self.capacities),
        }
        if self.delta is not None:
            out["delta"] = self.delta
        if self.exact_ratio is not None:
            out["ratio_fraction"] = str(self.exact_ratio)
        return out


def _vector_for(indices: Sequence[int], n: int) -> PercentileVector:
    """``v_j = i_j / n``, nudged up by ``1 / (2 n (n - 1))`` where a floor
    boundary would otherwise change the index."""
    entries = []
    for i in indices:
        v = i / n
        if n > 1 and percentile_index(v, n) != i:
            v = min(1.0, v + 1.0 / (2 * n * (n - 1)))
        if percentile_index(v, n) != i:
            v = (i - 1) / (n - 1) if n > 1 else 0.0
        entries.append(v)
    return PercentileVector(tuple(entries))


def _wg_case(n: int, k1: int, k2: int) -> tuple[str, tuple[int, int]]:
    """Closed-form index choice by spare agents ``delta = n - k1 - k2``.

    Wide (many spare agents): each facility sits half its capacity in from
    its end. Balanced: the spare agents are shared between the two ends.
    Edge: the right facility sits on the last agent.
    """
    delta = n - (k1 + k2)
    if delta >= -(-(k1 + k2) // 2):
        return "wg-wide", (-(-k1 // 2), n - k2 // 2)
    if k1 - k2 <= delta <= (k1 + k2) // 2 + 1:
        alpha = -(-(delta - (k1 - k2)) // 2)
        return "wg-balanced", (k1 - k2 + alpha, n - alpha)
    return "wg-edge", (delta + 1, n)


def wg_index_pairs(n: int, k1: int, k2: int):
    """Wide-gap pairs ``i1 < i2`` whose gap covers ``k1 + k2 - 1``: the pairs
    with a closed-form worst-case ratio."""
    step = max(2, k1 + k2 - 1)
    for i1 in range(1, n + 1):
        for i2 in range(i1 + step, n + 1):
            yield i1, i2


def best_wg_vector(n: int, k1: int, k2: int) -> BestVectorReport:
    """Wide-gap vector with the smallest worst-case ratio.

    Starts from the closed-form index choice and keeps it when no stable
    wide-gap pair does strictly better; otherwise returns the best pair,
    preferring the one nearest the closed-form choice. The larger capacity
    is placed on the left.
    """
    from .ratios import ar_wg

    caps = make_capacities((k1, k2))
    big, small = max(caps), min(caps)
    if big + small >= n:
        raise Infeasible(f"total capacity {big + small} must be below n = {n}")
    label, start = _wg_case(n, big, small)
    best = None
    for pair in wg_index_pairs(n, big, small):
        result = ar_wg(n, big, small, *pair)
        distance = abs(pair[0] - start[0]) + abs(pair[1] - start[1])
        key = (result.exact_ratio, distance, pair)
        if best is None or key < best[0]:
            best = (key, pair, result)
    if best is None:
        raise Infeasible(f"no stable wide-gap index pair exists for n = {n}, k = ({k1}, {k2})")
    _, indices, result = best
    vector = _vector_for(indices, n)
    assignment = (0, 1) if caps[0] >= caps[1] else (1, 0)
    vector = PercentileVector(vector.entries, assignment)
    if not es_condition(vector, n, caps):  # pragma: no cover - pairs are stable by construction
        raise Infeasible("selected indices fail the stability test")
    return BestVectorReport(
        indices=indices,
        vector=vector,
        predicted_ratio=result.ratio,
        case_label=label,
        kind=MechanismKind.WG,
        n=n,
        capacities=caps,
        delta=n - (big + small),
        exact_ratio=result.exact_ratio,
    )


def best_uniform_vector_m(n: int, k: int, m: int) -> BestVectorReport:
    """Evenly spread vector for ``m`` facilities of capacity ``k``: gaps of
    exactly ``2k - 1`` with the leftover agents shared between both ends."""
    from .ratios import ar_uniform_m

    if k < 1 or m < 2:
        raise InvalidParams("need k >= 1 and m >= 2")
    if m * k >= n:
        raise CapacityInfeasible(f"total capacity {m * k} must be below n = {n}")
    if n < (2 * k - 1) * m:
        raise Infeasible(
            f"n = {n} is below (2k - 1) m = {(2 * k - 1) * m}; use two groups or one location instead"
        )
    alpha = max(1, (n - 2 * k * (m - 1) + 1) // 2)
    indices = tuple(alpha + (2 * k - 1) * j for j in range(m))
    if indices[-1] > n:  # pragma: no cover - excluded by the size check
        raise Infeasible("spread indices overrun the last agent")
    vector = _vector_for(indices, n)
    caps = (k,) * m
    if percentile_indices(vector, n) != indices or not es_condition(vector, n, caps):
        raise Infeasible("spread vector does not reproduce stable indices")  # pragma: no cover
    result = ar_uniform_m(n, k, m, indices[0], indices[-1])
    return BestVectorReport(
        indices=indices,
        vector=vector,
        predicted_ratio=result.ratio,
        case_label="uniform-spread",
        kind=MechanismKind.UNIFORM_GRID,
        n=n,
        capacities=caps,
        exact_ratio=result.exact_ratio,
    )


def median_index(n: int) -> int:
    return (n + 1) // 2


def median_aio_placement(instance: Instance, capacities: Sequence[int]) -> Placement:
    """Every facility on the median agent ``x_ceil(n/2)``."""
    caps = make_capacities(capacities)
    if sum(caps) >= instance.n:
        raise CapacityInfeasible(f"total capacity {sum(caps)} must be below n = {instance.n}")
    y = instance.positions[median_index(instance.n) - 1]
    return Placement(tuple(y for _ in caps), caps)


def all_aside_groups(m: int, k: int) -> tuple[int, ...]:
    """Merged capacities of the two groups: ``ceil(m/2) k`` and ``floor(m/2) k``."""
    big, small = (m + 1) // 2 * k, m // 2 * k
    return (big, small) if small else (big,)


def all_aside_placement(a: int, b: int, instance: Instance, m: int, k: int, relaxed: bool = False) -> Placement:
    """``ceil(m/2)`` facilities at agent ``a`` and ``floor(m/2)`` at agent
    ``b``, each group merged into one facility.

    By default requires ``a + 2mk <= b <= n``; with ``relaxed`` only the
    stability gap ``b - a >= mk - 1`` is required.
    """
    if m < 1 or k < 1:
        raise InvalidParams("need m >= 1 and k >= 1")
    n = instance.n
    if m * k >= n:
        raise CapacityInfeasible(f"total capacity {m * k} must be below n = {n}")
    if not (1 <= a <= b <= n):
        raise PreconditionViolated(f"need 1 <= a <= b <= n, got a = {a}, b = {b}, n = {n}")
    if relaxed:
        if b - a < m * k - 1 and b - a > 1:
            raise PreconditionViolated(f"gap {b - a} is below mk - 1 = {m * k - 1}")
    elif a + 2 * m * k > b:
        raise PreconditionViolated(f"a + 2mk = {a + 2 * m * k} exceeds b = {b}")
    caps = all_aside_groups(m, k)
    positions = (instance.positions[a - 1], instance.positions[b - 1])[: len(caps)]
    return Placement(positions, caps)


def all_aside_report(n: int, k: int, m: int, a: int, b: int) -> BestVectorReport:
    from .ratios import ar_all_aside

    caps = all_aside_groups(m, k)
    indices = (a, b)[: len(caps)]
    result = ar_all_aside(n, k, m, a, b)
    return BestVectorReport(
        indices=indices,
        vector=_vector_for(indices, n),
        predicted_ratio=result.ratio,
        case_label="all-aside",
        kind=MechanismKind.ALL_ASIDE,
        n=n,
        capacities=caps,
        exact_ratio=result.exact_ratio,
    )


def median_aio_report(n: int, capacities: Sequence[int]) -> BestVectorReport:
    from .ratios import ar_aio

    caps = make_capacities(capacities)
    result = ar_aio(n, caps)
    idx = median_index(n)
    return BestVectorReport(
        indices=tuple(idx for _ in caps),
        vector=_vector_for(tuple(idx for _ in caps), n),
        predicted_ratio=result.ratio,
        case_label="aio-median",
        kind=MechanismKind.AIO,
        n=n,
        capacities=caps,
        exact_ratio=result.exact_ratio,
    )


def mirrored_indices(indices: Sequence[int], n: int) -> tuple[int, ...]:
    return tuple(sorted(n + 1 - i for i in indices))
