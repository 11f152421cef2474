"""The First-Come-First-Served game played once facilities are placed.

Each agent names one facility; facility ``j`` serves the ``k_j`` claimants
closest to it (ties by a fixed priority over agents) and a served agent
earns ``ceiling - distance``. Strategy profiles are tuples of 0-based facility
indices; the JSON and CSV forms use 1-based indices.

The same engine handles points on the line and in the unit square: the
``Placement`` carries the metric and the utility ceiling (1 or sqrt(2)).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParams, LengthMismatch, TooLarge

LINE = "line"
PLANE = "plane"

# Distances are compared after rounding to this many decimals, so that values
# equal in exact arithmetic (0.4 - 0.3 vs 0.5 - 0.4) tie instead of being
# ordered by representation error. Utilities keep the unrounded distances.
DISTANCE_DECIMALS = 12
NE_TOL = 1e-12
WELFARE_TOL = 1e-9
DEFAULT_CAP = 2**20
_CHUNK = 1 << 15


@dataclass(frozen=True)
class Placement:
    positions: tuple
    capacities: tuple[int, ...]
    metric: str = LINE

    def __post_init__(self):
        if len(self.positions) != len(self.capacities):
            raise LengthMismatch("one capacity per facility position")
        if not self.positions:
            raise InvalidParams("a placement needs at least one facility")
        if any(int(k) < 1 for k in self.capacities):
            raise InvalidParams("capacities must be >= 1")
        if self.metric not in (LINE, PLANE):
            raise InvalidParams(f"unknown metric {self.metric!r}")

    @property
    def m(self) -> int:
        return len(self.positions)

    @property
    def utility_ceiling(self) -> float:
        return 1.0 if self.metric == LINE else math.sqrt(2.0)

    def to_dict(self) -> dict:
        pos = [list(p) for p in self.positions] if self.metric == PLANE else list(self.positions)
        return {"positions": pos, "capacities": list(self.capacities), "metric": self.metric}

    @classmethod
    def from_dict(cls, data: dict) -> "Placement":
        metric = data.get("metric", LINE)
        pos = data["positions"]
        if metric == PLANE:
            pos = tuple((float(p[0]), float(p[1])) for p in pos)
        else:
            pos = tuple(float(p) for p in pos)
        return cls(pos, tuple(int(k) for k in data["capacities"]), metric)


def line_placement(positions: Iterable[float], capacities: Iterable[int]) -> Placement:
    return Placement(tuple(float(y) for y in positions), tuple(int(k) for k in capacities))


@dataclass(frozen=True)
class PriorityRule:
    """``ordering[r]`` is the agent with the r-th highest priority."""

    ordering: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.ordering) != list(range(len(self.ordering))):
            raise InvalidParams("priority ordering must be a permutation of the agents")

    @classmethod
    def by_index(cls, n: int) -> "PriorityRule":
        return cls(tuple(range(n)))

    def ranks(self) -> np.ndarray:
        rank = np.empty(len(self.ordering), dtype=np.int64)
        rank[list(self.ordering)] = np.arange(len(self.ordering))
        return rank


@dataclass(frozen=True)
class ServiceOutcome:
    served: tuple[frozenset, ...]
    utilities: tuple[float, ...]


def agent_points(instance) -> list:
    """Positions of the agents for 1-D instances, planar instances or plain
    sequences."""
    if hasattr(instance, "points"):
        return list(instance.points)
    if hasattr(instance, "positions"):
        return list(instance.positions)
    return list(instance)


def distance_matrix(points: Sequence, placement: Placement) -> np.ndarray:
    if placement.metric == LINE:
        x = np.asarray(points, dtype=float)
        y = np.asarray(placement.positions, dtype=float)
        return np.abs(x[:, None] - y[None, :])
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    y = np.asarray(placement.positions, dtype=float).reshape(-1, 2)
    diff = x[:, None, :] - y[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


class Game:
    """Precomputed distances and per-facility service orders for one
    (instance, placement, priority) triple."""

    def __init__(self, instance, placement: Placement, priority: PriorityRule | None = None):
        points = agent_points(instance)
        self.n = len(points)
        self.m = placement.m
        if priority is None:
            priority = PriorityRule.by_index(self.n)
        if len(priority.ordering) != self.n:
            raise LengthMismatch("priority ordering must cover every agent")
        self.placement = placement
        self.priority = priority
        self.caps = np.asarray(placement.capacities, dtype=np.int64)
        self.dist = distance_matrix(points, placement)
        self.keys = np.round(self.dist, DISTANCE_DECIMALS)
        self.gain = placement.utility_ceiling - self.dist
        self.rank = priority.ranks()
        # orders[j]: agents sorted by (rounded distance to j, priority)
        self.orders = [np.lexsort((self.rank, self.keys[:, j])) for j in range(self.m)]

    def check_profile(self, profile: Sequence[int]) -> np.ndarray:
        s = np.asarray(profile, dtype=np.int64)
        if s.shape != (self.n,):
            raise LengthMismatch(f"profile has {s.size} entries for {self.n} agents")
        if s.size and (s.min() < 0 or s.max() >= self.m):
            raise InvalidParams(f"strategies must lie in 0..{self.m - 1}")
        return s

    def outcome(self, profile: Sequence[int]) -> ServiceOutcome:
        s = self.check_profile(profile)
        served = []
        utilities = [0.0] * self.n
        for j in range(self.m):
            taken = []
            for i in self.orders[j]:
                if s[i] == j:
                    if len(taken) == self.caps[j]:
                        break
                    taken.append(int(i))
                    utilities[int(i)] = float(self.gain[i, j])
            served.append(frozenset(taken))
        return ServiceOutcome(tuple(served), tuple(utilities))

    def evaluate(self, profiles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Utilities and best unilateral-deviation utilities for a batch of
        profiles of shape (batch, n)."""
        batch = profiles.shape[0]
        util = np.zeros((batch, self.n))
        best = np.zeros((batch, self.n))
        for j in range(self.m):
            order = self.orders[j]
            chose = profiles[:, order] == j
            before = np.cumsum(chose, axis=1) - chose
            open_slot = before < self.caps[j]
            gain = self.gain[order, j]
            util[:, order] += np.where(chose & open_slot, gain, 0.0)
            dev = np.where(~chose & open_slot, gain, 0.0)
            best[:, order] = np.maximum(best[:, order], dev)
        return util, best

    def ne_mask(self, profiles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        util, best = self.evaluate(profiles)
        return np.all(best <= util + NE_TOL, axis=1), util


def resolve_outcome(instance, placement: Placement, profile: Sequence[int], priority=None) -> ServiceOutcome:
    return Game(instance, placement, priority).outcome(profile)


def social_welfare(outcome: ServiceOutcome) -> float:
    return math.fsum(outcome.utilities)


def is_nash_equilibrium(instance, placement: Placement, profile: Sequence[int], priority=None) -> bool:
    game = Game(instance, placement, priority)
    s = game.check_profile(profile)
    ok, _ = game.ne_mask(s[None, :])
    return bool(ok[0])


def construct_ne(instance, placement: Placement, priority=None) -> tuple[int, ...]:
    """Greedy equilibrium: repeatedly give the globally closest remaining
    (agent, facility) pair its match, drop the agent, and drop the facility
    once it is full. Ties go to the higher-priority agent, then to the lower
    facility index. Agents left over play facility 0."""
    game = Game(instance, placement, priority)
    entries = sorted(
        (game.keys[i, j], game.rank[i], j, i) for i in range(game.n) for j in range(game.m)
    )
    strategy = [-1] * game.n
    count = [0] * game.m
    for _, _, j, i in entries:
        if strategy[i] >= 0 or count[j] >= game.caps[j]:
            continue
        strategy[i] = j
        count[j] += 1
    return tuple(0 if s < 0 else s for s in strategy)


def _profile_block(start: int, stop: int, n: int, m: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    powers = m ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] // powers[None, :]) % m).astype(np.int64)


def _scan_ne(game: Game, cap: int):
    total = game.m**game.n
    if total > cap:
        raise TooLarge(f"{game.m}^{game.n} = {total} profiles exceeds the cap {cap}")
    for start in range(0, total, _CHUNK):
        block = _profile_block(start, min(total, start + _CHUNK), game.n, game.m)
        ok, util = game.ne_mask(block)
        yield block[ok], util[ok]


def enumerate_ne(instance, placement: Placement, priority=None, cap: int = DEFAULT_CAP) -> list[tuple[int, ...]]:
    """All pure Nash equilibria in lexicographic order (brute force)."""
    game = Game(instance, placement, priority)
    found = []
    for block, _ in _scan_ne(game, cap):
        found.extend(tuple(int(v) for v in row) for row in block)
    return found


def dedupe_values(values: Iterable[float], tol: float = WELFARE_TOL) -> tuple[float, ...]:
    groups: list[float] = []
    for v in sorted(values):
        if not groups or v - groups[-1] > tol:
            groups.append(v)
    return tuple(groups)


def ne_welfare_values(instance, placement: Placement, priority=None, cap: int = DEFAULT_CAP) -> tuple[float, ...]:
    game = Game(instance, placement, priority)
    values = []
    for block, util in _scan_ne(game, cap):
        values.extend(np.sum(util, axis=1).tolist())
    return dedupe_values(values)


def check_equilibrium_stability(
    instance, placement: Placement, priority=None, cap: int = DEFAULT_CAP
) -> tuple[bool, tuple[float, ...]]:
    values = ne_welfare_values(instance, placement, priority, cap)
    return len(values) <= 1, values


def mechanism_welfare(instance, placement: Placement, priority=None) -> float:
    """Welfare of the constructive equilibrium; the welfare of every
    equilibrium when the placement is equilibrium stable."""
    profile = construct_ne(instance, placement, priority)
    return social_welfare(resolve_outcome(instance, placement, profile, priority))


# -- serialization ---------------------------------------------------------


def profile_to_json(profile: Sequence[int]) -> str:
    return json.dumps([int(s) + 1 for s in profile])


def profile_from_json(text: str) -> tuple[int, ...]:
    data = json.loads(text)
    if not isinstance(data, list) or any(int(s) < 1 for s in data):
        raise InvalidParams("a profile is a JSON array of 1-based facility indices")
    return tuple(int(s) - 1 for s in data)


def outcome_to_csv(instance, profile: Sequence[int], outcome: ServiceOutcome) -> str:
    served = set().union(*outcome.served)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["agent", "position", "strategy", "served", "utility"])
    for i, (x, s) in enumerate(zip(agent_points(instance), profile)):
        pos = json.dumps(list(x)) if isinstance(x, (tuple, list)) else repr(x)
        writer.writerow([i + 1, pos, int(s) + 1, int(i in served), repr(outcome.utilities[i])])
    return buf.getvalue()
