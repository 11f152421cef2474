"""Worst-case instances, empirical ratios and the truthfulness auditor.

The closed-form ratios live in :mod:`capflp.ratios` and are re-exported
here; the matching bound on optimal welfare lives in :mod:`capflp.bound`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bound import sw_upper_bound
from .core import Instance, make_capacities, make_instance
from .errors import (
    CapacityInfeasible,
    InvalidParams,
    NotES,
    UnsupportedCase,
)
from .fcfs import NE_TOL, Game, Placement, PriorityRule, agent_points, mechanism_welfare
from .mechanisms import (
    MechanismKind,
    PercentileVector,
    apply_percentile,
    as_vector,
    classify_indices,
    es_condition,
    vector_from_indices,
)
from .ratios import (  # noqa: F401  (re-exported)
    RatioFormulaResult,
    ar_aio,
    ar_aio_m,
    ar_all_aside,
    ar_median_aio,
    ar_uniform_m,
    ar_wg,
    split_mechanism_welfare,
    split_optimum,
)

LAMBDAS = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class WorstCaseInstance:
    instance: Instance
    indices: tuple[int, ...]
    capacities: tuple[int, ...]
    family: str
    upper_bound: float
    mechanism_welfare: float

    @property
    def ratio(self) -> float:
        return self.upper_bound / self.mechanism_welfare

    @property
    def placement(self) -> Placement:
        return Placement(tuple(self.instance.positions[i - 1] for i in self.indices), self.capacities)

    def to_dict(self) -> dict:
        return {
            "instance": list(self.instance.positions),
            "indices": list(self.indices),
            "capacities": list(self.capacities),
            "family": self.family,
            "upper_bound": self.upper_bound,
            "mechanism_welfare": self.mechanism_welfare,
            "ratio": self.ratio,
        }


def pivot_instance(n: int, index: int, lam: float) -> Instance:
    """Agents before ``index`` at 0, agent ``index`` at ``lam``, the rest at 1."""
    return make_instance([0.0] * (index - 1) + [lam] + [1.0] * (n - index))


def gap_witness_instance(n: int, i1: int, i2: int) -> Instance:
    """Instance that splits the welfare when a wide gap is too narrow for the
    capacities: agents before ``i1`` at 0, agent ``i1`` at 0.4, the agents
    strictly between at 0.5, agent ``i2`` at 0.6 and the rest at 0.9."""
    if not (1 <= i1 < i2 <= n) or i2 - i1 <= 1:
        raise InvalidParams("need 1 <= i1 < i2 <= n with a gap above one")
    return make_instance(
        [0.0] * (i1 - 1) + [0.4] + [0.5] * (i2 - i1 - 1) + [0.6] + [0.9] * (n - i2)
    )


def _check_kind(kind, indices: Sequence[int]):
    if kind is None:
        return
    kind = MechanismKind(kind)
    distinct = sorted(set(indices))
    if kind is MechanismKind.AIO and len(distinct) != 1:
        raise InvalidParams("an all-in-one placement uses a single index")
    if len(indices) == 2 and kind in (MechanismKind.SBS, MechanismKind.WG):
        if classify_indices(*indices) is not kind:
            raise InvalidParams(f"indices {tuple(indices)} do not form a {kind.value} placement")


def worst_case_instance(kind, n: int, capacities: Sequence[int], indices: Sequence[int]) -> WorstCaseInstance:
    """The worst instance among the pivot family: for each facility index
    ``r`` and each ``lam`` in {0, 1/2, 1}, agents before ``r`` at 0, agent
    ``r`` at ``lam`` and the rest at 1. Capacities are aligned with the
    (sorted) indices. Returns the candidate with the largest ratio of the
    welfare bound to the mechanism welfare; the first one wins ties."""
    caps = make_capacities(capacities)
    if sum(caps) >= n:
        raise CapacityInfeasible(f"total capacity {sum(caps)} must be below n = {n}")
    indices = tuple(int(i) for i in indices)
    if len(indices) != len(caps):
        raise InvalidParams("one index per facility")
    if any(not 1 <= i <= n for i in indices) or list(indices) != sorted(indices):
        raise InvalidParams(f"indices must be sorted within 1..{n}")
    _check_kind(kind, indices)
    if not es_condition(vector_from_indices(indices, n), n, caps):
        raise NotES(f"indices {indices} with capacities {caps} are not equilibrium stable")
    best = None
    for r in sorted(set(indices)):
        for lam in LAMBDAS:
            inst = pivot_instance(n, r, lam)
            placement = Placement(tuple(inst.positions[i - 1] for i in indices), caps)
            ub = sw_upper_bound(inst, caps)
            sw = mechanism_welfare(inst, placement)
            candidate = WorstCaseInstance(inst, indices, caps, f"pivot r={r} lambda={lam:g}", ub, sw)
            if best is None or candidate.ratio > best.ratio + 1e-12:
                best = candidate
    return best


def _require_stable(vec: PercentileVector, n: int, caps) -> None:
    try:
        stable = es_condition(vec, n, caps)
    except UnsupportedCase as exc:
        raise NotES(f"stability of {vec.entries} cannot be certified: {exc}") from exc
    if not stable:
        raise NotES(f"percentile vector {vec.entries} with capacities {tuple(caps)} is not equilibrium stable at n = {n}")


def empirical_ratio(instance: Instance, v, capacities: Sequence[int], priority: PriorityRule | None = None) -> float:
    """Welfare bound over the mechanism's (equilibrium-independent) welfare."""
    vec = as_vector(v)
    caps = make_capacities(capacities)
    _require_stable(vec, instance.n, vec.slot_capacities(caps))
    placement = apply_percentile(vec, instance, caps)
    return sw_upper_bound(instance, caps) / mechanism_welfare(instance, placement, priority)


def placement_ratio(instance, placement: Placement, priority: PriorityRule | None = None) -> float:
    """Welfare bound over the constructive-equilibrium welfare of an
    arbitrary placement (no stability check)."""
    return sw_upper_bound(instance, placement.capacities) / mechanism_welfare(instance, placement, priority)


# -- truthfulness ------------------------------------------------------------

PlacementRule = Callable[[Instance], Placement]


def percentile_mechanism(v, capacities: Sequence[int]) -> PlacementRule:
    vec = as_vector(v)
    caps = make_capacities(capacities)
    return lambda instance: apply_percentile(vec, instance, caps)


def mean_mechanism(capacities: Sequence[int]) -> PlacementRule:
    """Every facility at the average report: a non-truthful baseline."""
    caps = make_capacities(capacities)

    def place(instance: Instance) -> Placement:
        y = math.fsum(instance.positions) / instance.n
        return Placement(tuple(y for _ in caps), caps)

    return place


@dataclass(frozen=True)
class TruthfulnessWitness:
    agent: int
    misreport: float
    opponent_profile: tuple[int, ...]
    truthful_utility: float
    misreport_utility: float

    def to_dict(self) -> dict:
        return {
            "agent": self.agent + 1,
            "misreport": self.misreport,
            "opponent_profile": [s + 1 for s in self.opponent_profile],
            "truthful_utility": self.truthful_utility,
            "misreport_utility": self.misreport_utility,
        }


def misreport_grid(step: float) -> list[float]:
    if not 0 < step <= 1:
        raise InvalidParams("grid step must lie in (0, 1]")
    count = int(round(1.0 / step))
    return [min(1.0, t * step) for t in range(count + 1)]


def _opponent_profiles(n: int, m: int, exhaustive_limit: int, samples: int, seed: int) -> np.ndarray:
    others = n - 1
    if m**others <= exhaustive_limit:
        idx = np.arange(m**others, dtype=np.int64)
        powers = m ** np.arange(others - 1, -1, -1, dtype=np.int64)
        return (idx[:, None] // powers[None, :]) % m if others else np.zeros((1, 0), dtype=np.int64)
    rng = np.random.default_rng(seed)
    return rng.integers(0, m, size=(samples, others), dtype=np.int64)


def _best_utility(game: Game, agent: int, opponents: np.ndarray) -> np.ndarray:
    """The agent's best utility over its own strategies, per opponent profile."""
    best = np.zeros(opponents.shape[0])
    for s in range(game.m):
        profiles = np.insert(opponents, agent, s, axis=1)
        util, _ = game.evaluate(profiles)
        best = np.maximum(best, util[:, agent])
    return best


def check_absolute_truthfulness(
    mechanism: PlacementRule,
    instance: Instance,
    agent: int,
    misreports: Sequence[float],
    priority: PriorityRule | None = None,
    exhaustive_limit: int = 2**15,
    samples: int = 500,
    seed: int = 0,
) -> TruthfulnessWitness | None:
    """Search for a misreport of ``agent`` (0-based, in sorted order) that
    raises its best achievable utility against some opponent profile.

    Distances always use true positions; only the placement sees the
    misreport. Opponent profiles are enumerated when there are at most
    ``exhaustive_limit`` of them, otherwise ``samples`` are drawn with
    ``seed``. Returns the first witness in grid order, or None.
    """
    points = agent_points(instance)
    n = len(points)
    if not 0 <= agent < n:
        raise InvalidParams(f"agent {agent} outside 0..{n - 1}")
    if any(not 0.0 <= x <= 1.0 for x in misreports):
        raise InvalidParams("misreports must lie in [0, 1]")
    truthful = Game(points, mechanism(instance), priority)
    opponents = _opponent_profiles(n, truthful.m, exhaustive_limit, samples, seed)
    base = _best_utility(truthful, agent, opponents)
    for x in misreports:
        reports = list(points)
        reports[agent] = float(x)
        placement = mechanism(make_instance(reports))
        game = Game(points, placement, priority)
        if game.m != truthful.m:
            raise InvalidParams("the mechanism changed the number of facilities")
        gained = _best_utility(game, agent, opponents)
        hits = np.nonzero(gained > base + NE_TOL)[0]
        if hits.size:
            t = int(hits[0])
            return TruthfulnessWitness(
                agent, float(x), tuple(int(s) for s in opponents[t]), float(base[t]), float(gained[t])
            )
    return None


def audit_truthfulness(mechanism: PlacementRule, instance: Instance, misreports: Sequence[float], **kwargs):
    """First witness over all agents, or None."""
    for agent in range(instance.n):
        witness = check_absolute_truthfulness(mechanism, instance, agent, misreports, **kwargs)
        if witness is not None:
            return witness
    return None
