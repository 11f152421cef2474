from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capflp import bound, core, fcfs
from capflp.errors import CapacityInfeasible
from capflp.fcfs import Placement
from oracles import brute_force_bound, hand_equilibria

grid = st.sampled_from([0.0, 0.1, 0.2, 0.25, 0.3, 0.5, 0.6, 0.75, 0.9, 1.0])


@st.composite
def bound_inputs(draw, max_n=6, max_m=2):
    n = draw(st.integers(2, max_n))
    x = core.make_instance(draw(st.lists(grid, min_size=n, max_size=n)))
    m = draw(st.integers(1, min(max_m, n - 1)))
    caps = []
    for _ in range(m):
        room = n - 1 - sum(caps) - (m - len(caps) - 1)
        caps.append(draw(st.integers(1, room)))
    return x, tuple(caps)


def test_two_clusters():
    x = core.make_instance([0, 0, 0, 1, 1])
    assert bound.sw_upper_bound(x, (2, 2)) == 4.0
    assert bound.sw_upper_bound(x, (3, 1)) == 4.0


def test_assignment_respects_capacities():
    weights = [[1.0, 0.5], [1.0, 0.5], [1.0, 0.9]]
    value, assignment = bound.max_weight_assignment(weights, (1, 2))
    # one agent at the first facility, the other two share the second
    assert value == pytest.approx(2.4)
    assert assignment.count(0) <= 1 and assignment.count(1) <= 2


def test_capacity_must_be_scarce():
    with pytest.raises(CapacityInfeasible):
        bound.sw_upper_bound(core.make_instance([0.1, 0.2]), (1, 1))


@settings(max_examples=80, deadline=None)
@given(bound_inputs())
def test_flow_bound_equals_enumeration_exactly(case):
    x, caps = case
    assert bound.sw_upper_bound(x, caps, method="flow", exact=True) == brute_force_bound(x.positions, caps)


@settings(max_examples=300, deadline=None)
@given(bound_inputs(max_n=9, max_m=3))
def test_runs_and_flow_agree(case):
    x, caps = case
    runs = bound.sw_upper_bound(x, caps, method="runs")
    flow = bound.sw_upper_bound(x, caps, method="flow")
    assert runs == pytest.approx(flow, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(bound_inputs(max_n=5), st.data())
def test_bound_dominates_every_equilibrium(case, data):
    x, caps = case
    ys = tuple(data.draw(st.sampled_from(x.positions)) for _ in caps)
    ub = bound.sw_upper_bound(x, caps)
    for _, welfare in hand_equilibria(list(x.positions), ys, caps):
        assert welfare <= ub + 1e-9


@settings(max_examples=20, deadline=None)
@given(bound_inputs(max_n=4))
def test_agent_positions_are_enough_on_a_fine_grid(case):
    x, caps = case
    coarse = bound.sw_upper_bound(x, caps, method="flow")
    fine = bound.sw_upper_bound(x, caps, method="flow", grid_step=0.05)
    assert fine == pytest.approx(coarse, abs=1e-12)


def test_exact_weights_are_fractions():
    x = core.make_instance([0.0, 0.5, 1.0])
    value = bound.sw_upper_bound(x, (1,), method="flow", exact=True)
    assert value == Fraction(1)


def test_planar_bound_uses_euclidean_weights():
    pts = [(0.0, 0.0), (0.0, 0.0), (1.0, 1.0)]
    assert bound.sw_upper_bound(pts, (2,)) == pytest.approx(2 * 2**0.5)
    welfare = fcfs.mechanism_welfare(pts, Placement(((0.0, 0.0),), (2,), fcfs.PLANE))
    assert welfare == pytest.approx(2 * 2**0.5)
