from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capflp import analysis, core, fcfs, mechanisms
from capflp.errors import CapacityInfeasible, Infeasible, InvalidParams, PreconditionViolated, UnsupportedArity
from capflp.mechanisms import MechanismKind, PercentileVector
from oracles import percentile_position

EXAMPLE_X = core.make_instance([0.0, 0.3, 0.4, 0.5, 0.9])


def test_percentile_index_rule():
    assert mechanisms.percentile_indices((0.25, 0.75), 5) == (2, 4)
    assert mechanisms.percentile_indices((0.0, 1.0), 10) == (1, 10)
    # decimal inputs land on the index their decimal value denotes
    assert mechanisms.percentile_index(0.58, 101) == 59


@settings(max_examples=300)
@given(st.integers(1, 200), st.data())
def test_index_over_n_maps_back(n, data):
    i = data.draw(st.integers(1, n))
    assert mechanisms.percentile_index(i / n, n) == i


def test_example_placement():
    y = mechanisms.apply_percentile((0.25, 0.75), EXAMPLE_X, (2, 2))
    assert y.positions == (0.3, 0.5)
    assert mechanisms.classify_percentile((0.25, 0.75), 5) is MechanismKind.WG
    assert mechanisms.classify_percentile((0.5, 0.5), 5) is MechanismKind.AIO
    assert mechanisms.classify_percentile((0.5, 0.75), 5) is MechanismKind.SBS


def test_vector_validation():
    with pytest.raises(InvalidParams):
        PercentileVector((0.7, 0.2))
    with pytest.raises(InvalidParams):
        PercentileVector((0.2, 1.2))
    with pytest.raises(InvalidParams):
        PercentileVector((0.2, 0.7), (0, 0))
    with pytest.raises(UnsupportedArity):
        mechanisms.classify_percentile((0.1, 0.5, 0.9), 10)
    with pytest.raises(CapacityInfeasible):
        mechanisms.apply_percentile((0.0, 1.0), EXAMPLE_X, (3, 2))


def test_vector_json_round_trip():
    vec = PercentileVector((0.2, 0.9), (1, 0))
    assert PercentileVector.parse('{"v": [0.2, 0.9], "assignment": [1, 0]}') == vec
    assert PercentileVector.from_dict(vec.to_dict()) == vec
    assert vec.slot_capacities((4, 3)) == (3, 4)
    assert vec.mirrored().slot_capacities((4, 3)) == (4, 3)


def test_stability_condition_examples():
    assert not mechanisms.es_condition((0.25, 0.75), 5, (2, 2))
    assert mechanisms.es_condition(mechanisms.vector_from_indices((2, 9), 10), 10, (2, 2))
    assert mechanisms.es_condition((0.2, 0.45, 0.7), 20, (3, 3, 3))
    assert mechanisms.es_condition((0.5, 0.5), 5, (2, 2))
    assert mechanisms.es_condition((0.5, 0.75), 5, (2, 2))


def test_capacity_one_is_always_stable():
    # gap 2 is below k1 + k2 - 1 = 3, but the unit facility is always taken at distance 0
    assert mechanisms.es_condition(mechanisms.vector_from_indices((1, 3), 5), 5, (3, 1))


@pytest.mark.parametrize("n", range(3, 9))
def test_stability_condition_matches_brute_force(n):
    """True means stable on random instances; false means the gap witness is unstable."""
    for k1 in range(1, n):
        for k2 in range(1, n - k1):
            for i1 in range(1, n - 1):
                for i2 in range(i1 + 2, n + 1):
                    vec = mechanisms.vector_from_indices((i1, i2), n)
                    if mechanisms.es_condition(vec, n, (k1, k2)):
                        for t in range(5):
                            x = core.sample_positions(core.Uniform(), n, [n, k1, k2, i1, i2, t])
                            y = mechanisms.apply_percentile(vec, x, (k1, k2))
                            assert fcfs.check_equilibrium_stability(x, y)[0]
                    else:
                        x = analysis.gap_witness_instance(n, i1, i2)
                        y = mechanisms.apply_percentile(vec, x, (k1, k2))
                        assert not fcfs.check_equilibrium_stability(x, y)[0]


@settings(max_examples=400, deadline=None)
@given(st.integers(2, 12), st.data())
def test_misreports_only_push_facilities_away(n, data):
    """Every facility ends up at least as far from the deviator's true spot."""
    coord = st.floats(0.0, 1.0, allow_nan=False)
    x = data.draw(st.lists(coord, min_size=n, max_size=n))
    m = data.draw(st.integers(1, 3))
    v = sorted(data.draw(st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m)))
    i = data.draw(st.integers(0, n - 1))
    lie = data.draw(coord)
    truthful = sorted(x)
    moved = sorted(x[:i] + [lie] + x[i + 1 :])
    for vj in v:
        before = percentile_position(truthful, vj)
        after = percentile_position(moved, vj)
        assert abs(x[i] - before) <= abs(x[i] - after) + 1e-15


def test_best_wg_vector_examples():
    report = mechanisms.best_wg_vector(10, 2, 2)
    assert report.indices == (2, 9) and report.exact_ratio == Fraction(8, 7)
    assert report.case_label == "wg-wide"
    assert mechanisms.best_wg_vector(10, 4, 3).indices == (3, 9)
    assert mechanisms.best_wg_vector(10, 4, 3).exact_ratio == Fraction(14, 11)
    report = mechanisms.best_wg_vector(10, 6, 2)
    assert report.indices == (3, 10) and report.exact_ratio == Fraction(8, 5)
    assert report.case_label == "wg-edge"
    with pytest.raises(Infeasible):
        mechanisms.best_wg_vector(4, 2, 2)


def test_best_wg_vector_puts_the_larger_capacity_left():
    report = mechanisms.best_wg_vector(10, 2, 4)
    y = mechanisms.apply_percentile(report.vector, core.make_instance([i / 9 for i in range(10)]), (2, 4))
    assert y.capacities == (4, 2)


@pytest.mark.parametrize("n", range(5, 25))
def test_best_wg_vector_is_stable_and_optimal(n):
    for k1 in range(1, n):
        for k2 in range(1, min(k1, n - k1 - 1) + 1):
            try:
                report = mechanisms.best_wg_vector(n, k1, k2)
            except Infeasible:
                continue
            assert mechanisms.percentile_indices(report.vector, n) == report.indices
            assert mechanisms.es_condition(report.vector, n, (k1, k2))
            for pair in mechanisms.wg_index_pairs(n, k1, k2):
                assert analysis.ar_wg(n, k1, k2, *pair).exact_ratio >= report.exact_ratio


@pytest.mark.parametrize("k", [2, 5, 10, 100])
def test_equal_capacities_approach_four_thirds(k):
    n = 10 * k
    report = mechanisms.best_wg_vector(n, k, k)
    assert report.exact_ratio == Fraction(4) / (3 + Fraction(1, k))
    assert report.exact_ratio < Fraction(4, 3)


def test_best_uniform_vector_examples():
    report = mechanisms.best_uniform_vector_m(20, 3, 3)
    assert report.indices == (4, 9, 14)
    assert report.vector.entries == pytest.approx((0.2, 0.45, 0.7))
    assert report.exact_ratio == Fraction(9, 8)
    with pytest.raises(Infeasible):
        mechanisms.best_uniform_vector_m(14, 3, 3)


@pytest.mark.parametrize("m", range(2, 7))
@pytest.mark.parametrize("k", range(1, 6))
def test_best_uniform_vector_keeps_its_ends_clear(m, k):
    for n in range((2 * k - 1) * m, (2 * k - 1) * m + 25):
        if m * k >= n:
            continue
        report = mechanisms.best_uniform_vector_m(n, k, m)
        i1, im = report.indices[0], report.indices[-1]
        assert mechanisms.es_condition(report.vector, n, (k,) * m)
        if n >= 2 * k * m:
            assert i1 >= (k + 1) // 2 and n - im >= (k + 1) // 2
            assert report.exact_ratio <= 1 + Fraction(1, 2 * m - 1)


def test_median_placement():
    assert mechanisms.median_aio_placement(EXAMPLE_X, (2, 2)).positions == (0.4, 0.4)
    assert mechanisms.median_index(5) == 3 and mechanisms.median_index(10) == 5


def test_all_aside_placement():
    x30 = core.make_instance([i / 29 for i in range(30)])
    y = mechanisms.all_aside_placement(1, 30, x30, 2, 2)
    assert y.positions == (0.0, 1.0) and y.capacities == (2, 2)
    x40 = core.make_instance([i / 39 for i in range(40)])
    y = mechanisms.all_aside_placement(5, 25, x40, 3, 2)
    assert y.positions == (x40.positions[4], x40.positions[24]) and y.capacities == (4, 2)
    x20 = core.make_instance([i / 19 for i in range(20)])
    with pytest.raises(PreconditionViolated):
        mechanisms.all_aside_placement(5, 10, x20, 3, 2)
    assert mechanisms.all_aside_placement(5, 10, x20, 3, 2, relaxed=True).capacities == (4, 2)


def test_reports_serialize():
    d = mechanisms.best_wg_vector(10, 2, 2).to_dict()
    assert d["indices"] == [2, 9] and d["ratio_fraction"] == "8/7" and d["kind"] == "WG"
    d = mechanisms.median_aio_report(5, (2, 2)).to_dict()
    assert d["case_label"] == "aio-median" and d["ratio_fraction"] == "8/5"
    assert mechanisms.all_aside_report(40, 2, 3, 5, 25).case_label == "all-aside"
