import json
import subprocess
import sys

import pytest

from capflp import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def example_file(tmp_path):
    path = tmp_path / "x.json"
    path.write_text("[0, 0.3, 0.4, 0.5, 0.9]")
    return str(path)


def test_gen_is_reproducible(capsys):
    _, a, _ = run(capsys, "gen", "--dist", "uniform", "--n", "8", "--seed", "3")
    _, b, _ = run(capsys, "gen", "--dist", "uniform", "--n", "8", "--seed", "3")
    assert a == b and len(json.loads(a)) == 8
    code, out, _ = run(capsys, "gen", "--dist", '{"kind": "beta", "alpha": 5, "beta": 5}', "--n", "4", "--seed", "1", "--format", "csv")
    assert code == 0 and out.startswith("position\n")


def test_place_and_ne(capsys, tmp_path, example_file):
    code, out, _ = run(capsys, "place", "--v", "[0.25, 0.75]", "--caps", "2,2", "--instance", example_file)
    assert code == 0
    placement = json.loads(out)
    assert placement["positions"] == [0.3, 0.5] and placement["kind"] == "WG"
    path = tmp_path / "p.json"
    path.write_text(out)
    code, out, _ = run(capsys, "ne", "--instance", example_file, "--placement", str(path), "--enumerate")
    data = json.loads(out)
    assert code == 0 and data["stable"] is False
    assert [1, 1, 2, 2, 2] in data["equilibria"] and [1, 1, 1, 2, 2] in data["equilibria"]
    assert data["welfare_values"] == pytest.approx([3.5, 3.6])


def test_verify_es(capsys):
    code, out, _ = run(capsys, "verify-es", "--v", "[0.25, 0.75]", "--n", "5", "--caps", "2,2")
    assert code == 0 and json.loads(out)["es"] is False
    code, out, _ = run(capsys, "verify-es", "--v", "[0.2, 0.9]", "--n", "10", "--caps", "[2, 2]", "--brute-force", "--instances", "3")
    data = json.loads(out)
    assert data["es"] is True and data["brute_force"]["counterexample"] is None
    code, out, _ = run(capsys, "verify-es", "--v", '{"rows": [[0, 0.3], [0, 0]]}', "--n", "10", "--caps", "2,2")
    assert json.loads(out)["es"] is False


def test_best_vector_and_formula(capsys):
    code, out, _ = run(capsys, "best-vector", "--n", "10", "--k1", "2", "--k2", "2")
    assert code == 0 and json.loads(out)["indices"] == [2, 9]
    code, out, _ = run(capsys, "best-vector", "--n", "20", "--m", "3", "--k", "3")
    assert json.loads(out)["indices"] == [4, 9, 14]
    code, _, err = run(capsys, "best-vector", "--n", "14", "--m", "3", "--k", "3")
    assert code == 3 and "infeasible" in err
    code, out, _ = run(capsys, "formula", "median-aio", "--n", "10", "--caps", "2,2")
    assert json.loads(out)["ratio_fraction"] == "8/5"
    code, out, _ = run(capsys, "formula", "planar-median", "--n", "7", "--caps", "4,2")
    assert json.loads(out)["ratio"] == pytest.approx(2.14769, abs=1e-5)


def test_worst_case_and_ratio(capsys, tmp_path):
    code, out, _ = run(capsys, "worst-case", "--kind", "WG", "--n", "10", "--caps", "2,2")
    data = json.loads(out)
    assert code == 0 and data["ratio"] == pytest.approx(8 / 7)
    path = tmp_path / "w.json"
    path.write_text(json.dumps(data["instance"]))
    code, out, _ = run(capsys, "ratio", "--instance", str(path), "--v", "[0.2, 0.9]", "--caps", "2,2")
    assert json.loads(out)["ratio"] == pytest.approx(8 / 7)


def test_exit_codes(capsys, example_file):
    code, _, err = run(capsys, "ratio", "--instance", example_file, "--v", "[0.25, 0.75]", "--caps", "2,2")
    assert code == 3 and "not equilibrium stable" in err
    code, _, _ = run(capsys, "place", "--v", "[0.75, 0.25]", "--caps", "2,2", "--instance", example_file)
    assert code == 2
    code, _, _ = run(capsys, "place", "--v", "[0.25, 0.75]", "--caps", "3,2", "--instance", example_file)
    assert code == 3
    code, _, _ = run(capsys, "place", "--v", "not json", "--caps", "2,2", "--instance", example_file)
    assert code == 2
    code, _, _ = run(capsys, "place", "--v", "[0.5]", "--caps", "1", "--instance", "/no/such/file.json")
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["best-vector"])
    assert exc.value.code == 2


def test_experiment_writes_csv(capsys, tmp_path):
    config = {
        "mechanisms": ["best", "extremes"],
        "distribution": {"kind": "uniform"},
        "n_values": [10],
        "capacity_fractions": [0.2, 0.2],
        "trials": 20,
        "seed": 5,
    }
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / "r.csv"
    code, stdout, _ = run(capsys, "experiment", "--config", str(cfg), "--out", str(out), "--per-trial")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "mechanism,n,metric,mean,ci95_lo,ci95_hi,trials,seed"
    assert len(lines) == 1 + 4
    assert len(json.loads(stdout)["written"]) == 2


def test_audit_truthful(capsys, tmp_path, example_file):
    code, out, _ = run(capsys, "audit-truthful", "--v", "[0.25, 0.75]", "--caps", "2,2", "--instance", example_file, "--grid-step", "0.1")
    assert code == 0 and json.loads(out)["truthful"] is True
    path = tmp_path / "m.json"
    path.write_text("[0.2, 1.0]")
    code, out, _ = run(capsys, "audit-truthful", "--mechanism", "mean", "--caps", "1", "--instance", str(path), "--grid-step", "0.01")
    assert json.loads(out)["truthful"] is False


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "capflp", "best-vector", "--n", "10", "--k1", "6", "--k2", "2"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["indices"] == [3, 10]
