"""Matching-based upper bound on the optimal welfare.

The designer may pick facility positions (restricted to agent positions) and
force a capacity-feasible assignment of agents to facilities; the bound is
the best total of ``ceiling - distance`` over such choices.

Two exact routes:

* ``flow``: for every placement on agent positions, a max-weight
  capacitated assignment by successive shortest paths (Bellman-Ford on the
  residual graph, weights negated). Works in any metric and with
  ``fractions.Fraction`` weights for exact comparisons.
* ``runs`` (line only): every optimal solution can be taken as disjoint runs
  of consecutive sorted agents, one run of exactly ``k_j`` agents per
  facility, each facility at its run's median. A DP over run end points and
  facility subsets finds the best runs in ``O(n 2^m m)``.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CapacityInfeasible, InvalidParams
from .fcfs import LINE, PLANE, Placement, agent_points

_INF = float("inf")


def max_weight_assignment(weights, capacities: Sequence[int]):
    """Best capacitated assignment for an n x m weight table.

    Returns ``(value, assignment)`` where ``assignment[i]`` is a facility
    index or -1. Weight entries may be floats or Fractions; the arithmetic
    type is preserved. Stops as soon as no augmenting path improves.
    """
    n = len(weights)
    m = len(capacities)
    zero = weights[0][0] * 0 if n and m else 0
    source, sink = 0, n + m + 1
    size = n + m + 2
    # edge: [to, residual capacity, cost, index of reverse edge]
    graph: list[list[list]] = [[] for _ in range(size)]

    def add(u, v, cap, cost):
        graph[u].append([v, cap, cost, len(graph[v])])
        graph[v].append([u, 0, -cost, len(graph[u]) - 1])

    for i in range(n):
        add(source, 1 + i, 1, zero)
        for j in range(m):
            add(1 + i, 1 + n + j, 1, -weights[i][j])
    for j in range(m):
        add(1 + n + j, sink, int(capacities[j]), zero)

    total = zero
    while True:
        dist: list = [None] * size
        prev: list = [None] * size
        dist[source] = zero
        for _ in range(size - 1):
            changed = False
            for u in range(size):
                du = dist[u]
                if du is None:
                    continue
                for idx, (v, cap, cost, _) in enumerate(graph[u]):
                    if cap > 0 and (dist[v] is None or du + cost < dist[v]):
                        dist[v] = du + cost
                        prev[v] = (u, idx)
                        changed = True
            if not changed:
                break
        if dist[sink] is None or dist[sink] >= 0:
            break
        v = sink
        while v != source:
            u, idx = prev[v]
            edge = graph[u][idx]
            edge[1] -= 1
            graph[v][edge[3]][1] += 1
            v = u
        total -= dist[sink]

    assignment = [-1] * n
    for i in range(n):
        for v, cap, _, _ in graph[1 + i]:
            if 1 + n <= v <= n + m and cap == 0:
                assignment[i] = v - 1 - n
    value = assignment_value(weights, assignment)
    return value, assignment


def assignment_value(weights, assignment: Sequence[int]):
    terms = [weights[i][j] for i, j in enumerate(assignment) if j >= 0]
    if terms and isinstance(terms[0], Fraction):
        return sum(terms, Fraction(0))
    return math.fsum(terms)


def weight_table(points, placement: Placement, exact: bool = False):
    """``ceiling - distance`` for every (agent, facility) pair."""
    if exact:
        if placement.metric != LINE:
            raise InvalidParams("exact weights are only available on the line")
        ys = [Fraction(y) for y in placement.positions]
        return [[1 - abs(Fraction(x) - y) for y in ys] for x in points]
    ceiling = placement.utility_ceiling
    if placement.metric == LINE:
        return [[ceiling - abs(x - y) for y in placement.positions] for x in points]
    return [[ceiling - math.dist(x, y) for y in placement.positions] for x in points]


def candidate_placements(positions, capacities: Sequence[int]):
    """Ordered tuples of candidate positions, skipping permutations among
    facilities of equal capacity."""
    distinct = sorted(set(positions))
    m = len(capacities)
    for combo in itertools.product(distinct, repeat=m):
        if any(
            capacities[a] == capacities[b] and combo[a] > combo[b]
            for a in range(m)
            for b in range(a + 1, m)
        ):
            continue
        yield combo


def _check(n: int, capacities: Sequence[int]):
    if not capacities or any(k < 1 for k in capacities):
        raise InvalidParams("capacities must be positive")
    if sum(capacities) >= n:
        raise CapacityInfeasible(f"total capacity {sum(capacities)} must be below n = {n}")


def bound_by_flow(points, capacities, metric: str = LINE, extra_positions=(), exact: bool = False):
    """Returns ``(value, placement, assignment)``."""
    capacities = tuple(int(k) for k in capacities)
    _check(len(points), capacities)
    best = None
    for combo in candidate_placements(list(points) + list(extra_positions), capacities):
        placement = Placement(tuple(combo), capacities, metric)
        value, assignment = max_weight_assignment(weight_table(points, placement, exact), capacities)
        if best is None or value > best[0]:
            best = (value, placement, assignment)
    return best


def _run_costs(x: np.ndarray, k: int):
    """Sum of |x_t - median| over each run of k consecutive sorted agents,
    indexed by the run's first agent."""
    n = x.size
    s = np.concatenate([[0.0], np.cumsum(x)])
    start = np.arange(0, n - k + 1)
    med = start + (k - 1) // 2
    left = x[med] * (med - start) - (s[med] - s[start])
    right = (s[start + k] - s[med + 1]) - x[med] * (start + k - 1 - med)
    return left + right


def bound_by_runs(positions, capacities):
    """Returns ``(value, placement, assignment)`` for sorted 1-D positions."""
    capacities = tuple(int(k) for k in capacities)
    x = np.asarray(positions, dtype=float)
    n = x.size
    _check(n, capacities)
    if np.any(np.diff(x) < 0):
        raise InvalidParams("runs bound needs sorted positions")
    m = len(capacities)
    costs = {k: _run_costs(x, k) for k in set(capacities)}
    full = (1 << m) - 1
    table = np.full((1 << m, n + 1), _INF)
    table[0, :] = 0.0
    for mask in range(1, full + 1):
        cand = np.full(n + 1, _INF)
        for j in range(m):
            if not mask >> j & 1:
                continue
            k = capacities[j]
            prev = table[mask ^ (1 << j), : n + 1 - k]
            cand[k:] = np.minimum(cand[k:], prev + costs[k])
        table[mask] = np.minimum.accumulate(cand)

    assignment = [-1] * n
    facility_pos = [0.0] * m
    mask, i = full, n
    while mask:
        if i > 0 and table[mask, i] == table[mask, i - 1]:
            i -= 1
            continue
        for j in range(m):
            if not mask >> j & 1:
                continue
            k = capacities[j]
            if k <= i and table[mask ^ (1 << j), i - k] + costs[k][i - k] == table[mask, i]:
                start = i - k
                for t in range(start, i):
                    assignment[t] = j
                facility_pos[j] = float(x[start + (k - 1) // 2])
                mask ^= 1 << j
                i = start
                break
        else:  # pragma: no cover - the table always admits a backtrack
            raise RuntimeError("runs backtrack failed")
    placement = Placement(tuple(facility_pos), capacities, LINE)
    value = assignment_value(weight_table(list(x), placement), assignment)
    return value, placement, assignment


def sw_upper_bound(instance, capacities, method: str = "auto", grid_step: float | None = None, exact: bool = False):
    """Upper bound on the optimal welfare of ``instance``.

    ``method`` is ``runs`` (line only), ``flow`` or ``auto`` (``runs`` on the
    line, ``flow`` in the plane). ``grid_step`` adds a regular grid of
    candidate positions to the flow search, to probe the restriction to
    agent positions on small inputs.
    """
    points = agent_points(instance)
    planar = bool(points) and isinstance(points[0], (tuple, list))
    metric = PLANE if planar else LINE
    if method == "auto":
        method = "flow" if planar or exact or grid_step else "runs"
    if method == "runs":
        if planar:
            raise InvalidParams("the runs bound is defined on the line only")
        return bound_by_runs(sorted(points), capacities)[0]
    if method != "flow":
        raise InvalidParams(f"unknown bound method {method!r}")
    extra = ()
    if grid_step:
        steps = int(round(1.0 / grid_step))
        axis = [t / steps for t in range(steps + 1)]
        extra = [(a, b) for a in axis for b in axis] if planar else axis
    return bound_by_flow(points, capacities, metric, extra, exact)[0]
