import json

import pytest

from capflp import core, harness, mechanisms
from capflp.errors import CapacityInfeasible, InvalidParams, NotES
from capflp.mechanisms import PercentileVector


def small_config(**overrides):
    base = dict(
        mechanisms=("best", "extremes"),
        distribution=core.Uniform(),
        n_values=(10, 15),
        capacity_fractions=(0.2, 0.2),
        trials=40,
        seed=11,
    )
    base.update(overrides)
    return harness.ExperimentConfig(**base)


def test_capacity_rule():
    assert harness.capacities_for(10, (0.2, 0.2)) == (2, 2)
    assert harness.capacities_for(12, (0.2, 0.2)) == (2, 2)
    assert harness.capacities_for(3, (0.1, 0.1)) == (1, 1)
    with pytest.raises(CapacityInfeasible):
        harness.capacities_for(10, (0.5, 0.5))


def test_config_validation_and_round_trip():
    config = small_config(mechanisms=("best", PercentileVector((0.1, 0.9))))
    assert harness.ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict()))) == config
    with pytest.raises(InvalidParams):
        small_config(trials=0)
    with pytest.raises(InvalidParams):
        small_config(metric="median")
    with pytest.raises(CapacityInfeasible):
        small_config(capacity_fractions=(0.5, 0.5))


def test_named_mechanisms():
    assert harness.resolve_mechanism("extremes", 10, (2, 2)).entries == (0.0, 1.0)
    assert harness.resolve_mechanism("median", 10, (2, 2)).entries == (0.5, 0.5)
    best = harness.resolve_mechanism("best", 10, (2, 2))
    assert mechanisms.percentile_indices(best, 10) == (2, 9)
    spread = harness.resolve_mechanism("best", 20, (3, 3, 3))
    assert mechanisms.percentile_indices(spread, 20) == (4, 9, 14)
    with pytest.raises(InvalidParams):
        harness.resolve_mechanism("mean", 10, (2, 2))


def test_unstable_mechanisms_are_rejected_up_front():
    config = small_config(mechanisms=(PercentileVector((0.25, 0.75)),), n_values=(5,), capacity_fractions=(0.4, 0.4))
    with pytest.raises(NotES, match="n = 5"):
        harness.run_experiment(config)


def test_ratios_are_at_least_one_and_best_beats_extremes():
    report = harness.run_experiment(small_config(trials=100))
    for cell in report.cells:
        assert cell.bayesian >= 1 - 1e-9
        assert cell.average_case >= 1 - 1e-9
        assert cell.bayesian_ci[0] <= cell.bayesian <= cell.bayesian_ci[1]
        assert cell.average_case_ci[0] <= cell.average_case <= cell.average_case_ci[1]
    for n in (10, 15):
        assert report.cell("best", n).bayesian <= report.cell("extremes", n).bayesian


def test_concentrated_population_is_nearly_optimal():
    config = small_config(distribution=core.Beta(500, 500), mechanisms=("best", "extremes"), trials=30)
    for cell in harness.run_experiment(config).cells:
        assert abs(cell.bayesian - 1) <= 0.01
        assert abs(cell.average_case - 1) <= 0.01


def test_identical_configs_give_identical_csv():
    a = harness.report_csv(harness.run_experiment(small_config()))
    b = harness.report_csv(harness.run_experiment(small_config()))
    assert a == b


def test_parallel_run_matches_serial():
    serial = harness.run_experiment(small_config(), workers=1)
    parallel = harness.run_experiment(small_config(), workers=3)
    for s, p in zip(serial.cells, parallel.cells):
        assert abs(s.bayesian - p.bayesian) <= 1e-12
        assert abs(s.average_case - p.average_case) <= 1e-12
        assert s.bayesian_ci == p.bayesian_ci


def test_adding_a_mechanism_keeps_the_instance_stream():
    one = harness.run_experiment(small_config(mechanisms=("best",)))
    two = harness.run_experiment(small_config(mechanisms=("extremes", "best")))
    assert one.cell("best", 10).bayesian == two.cell("best", 10).bayesian


def test_thread_variable(monkeypatch):
    monkeypatch.setenv("CAPFLP_THREADS", "4")
    assert harness.default_workers() == 4
    monkeypatch.setenv("CAPFLP_THREADS", "many")
    with pytest.raises(InvalidParams):
        harness.default_workers()


def test_empty_report_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    harness.emit_report(harness.RatioReport(None, ()), "csv", str(path))
    assert path.read_text() == ",".join(harness.CSV_COLUMNS) + "\n"


def test_single_cell_round_trip(tmp_path):
    report = harness.run_experiment(small_config(mechanisms=("best",), n_values=(10,), metric="bayesian"))
    path = tmp_path / "one.csv"
    harness.emit_report(report, "csv", str(path))
    rows = harness.read_report_csv(str(path))
    assert len(rows) == 1
    assert rows[0]["mean"] == report.cells[0].bayesian
    assert (rows[0]["ci95_lo"], rows[0]["ci95_hi"]) == report.cells[0].bayesian_ci
    assert rows[0]["trials"] == 40 and rows[0]["seed"] == 11


def test_per_trial_rows(tmp_path):
    report = harness.run_experiment(small_config(mechanisms=("best",), n_values=(10,), trials=500, per_trial=True))
    path = tmp_path / "r.csv"
    written = harness.emit_report(report, "csv", str(path), per_trial=True)
    with open(written[1]) as fh:
        detail = fh.read().splitlines()
    assert len(detail) == 1 + 500
    json_path = tmp_path / "r.json"
    harness.emit_report(report, "json", str(json_path), per_trial=True)
    data = json.loads(json_path.read_text())
    assert len(data["cells"][0]["records"]) == 500
    assert data["config"]["trials"] == 500
