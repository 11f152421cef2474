"""Seeded Monte-Carlo experiments for Bayesian and average-case ratios.

For each ``n`` and trial ``t`` the instance is drawn from
``SeedSequence(entropy=seed, spawn_key=(n, t))``, so adding mechanisms or
changing the trial count never perturbs existing instance streams. The
welfare bound is computed once per trial and shared by every mechanism.

* Bayesian ratio: ``sum(bound) / sum(mechanism welfare)``; its 95% interval
  is a seeded percentile bootstrap over paired trials.
* Average-case ratio: mean of per-trial ratios; its 95% interval is the
  normal interval ``mean +- 1.96 sd / sqrt(T)``.

Sums use ``math.fsum`` so aggregates do not depend on evaluation order,
which keeps serial and parallel runs identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bound import sw_upper_bound
from .core import (
    DistributionSpec,
    distribution_from_dict,
    distribution_to_dict,
    sample_positions,
)
from .errors import CapacityInfeasible, InvalidParams, NotES, UnsupportedCase
from .fcfs import mechanism_welfare
from .mechanisms import (
    PercentileVector,
    apply_percentile,
    best_uniform_vector_m,
    best_wg_vector,
    es_condition,
)

BOOTSTRAP_RESAMPLES = 2000
_BOOTSTRAP_TAG = 0xB007
Z95 = 1.959963984540054
METRICS = ("bayesian", "average_case")
CSV_COLUMNS = ["mechanism", "n", "metric", "mean", "ci95_lo", "ci95_hi", "trials", "seed"]
TRIAL_COLUMNS = ["mechanism", "n", "trial", "sw_ub", "sw_mech", "ratio"]


def capacities_for(n: int, fractions: Sequence[float]) -> tuple[int, ...]:
    """``k_j = max(1, floor(alpha_j n))``, with a small slack so that, say,
    0.2 * 10 floors to 2."""
    caps = tuple(max(1, math.floor(a * n + 1e-9)) for a in fractions)
    if sum(caps) >= n:
        raise CapacityInfeasible(f"capacities {caps} leave no spare agent at n = {n}")
    return caps


@dataclass(frozen=True)
class ExperimentConfig:
    mechanisms: tuple = ("best",)
    distribution: DistributionSpec = None
    n_values: tuple[int, ...] = (10,)
    capacity_fractions: tuple[float, ...] = (0.2, 0.2)
    trials: int = 100
    seed: int = 0
    metric: str = "both"
    per_trial: bool = False

    def __post_init__(self):
        if self.distribution is None:
            raise InvalidParams("an experiment needs a distribution")
        if self.trials < 1:
            raise InvalidParams("trials must be >= 1")
        if not self.n_values or any(int(n) < 1 for n in self.n_values):
            raise InvalidParams("n values must be positive")
        if self.metric not in ("bayesian", "average_case", "both"):
            raise InvalidParams(f"unknown metric {self.metric!r}")
        if not self.mechanisms:
            raise InvalidParams("at least one mechanism is required")
        if not self.capacity_fractions or any(not 0 < a < 1 for a in self.capacity_fractions):
            raise InvalidParams("capacity fractions must lie in (0, 1)")
        for n in self.n_values:
            capacities_for(int(n), self.capacity_fractions)

    @property
    def metrics(self) -> tuple[str, ...]:
        return METRICS if self.metric == "both" else (self.metric,)

    def to_dict(self) -> dict:
        return {
            "mechanisms": [m.to_dict() if isinstance(m, PercentileVector) else m for m in self.mechanisms],
            "distribution": distribution_to_dict(self.distribution),
            "n_values": list(self.n_values),
            "capacity_fractions": list(self.capacity_fractions),
            "trials": self.trials,
            "seed": self.seed,
            "metric": self.metric,
            "per_trial": self.per_trial,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        mechanisms = []
        for m in data.get("mechanisms", ["best"]):
            if isinstance(m, str):
                mechanisms.append(m)
            else:
                mechanisms.append(PercentileVector.from_dict(m))
        return cls(
            mechanisms=tuple(mechanisms),
            distribution=distribution_from_dict(data["distribution"]),
            n_values=tuple(int(n) for n in data["n_values"]),
            capacity_fractions=tuple(float(a) for a in data.get("capacity_fractions", (0.2, 0.2))),
            trials=int(data.get("trials", 100)),
            seed=int(data.get("seed", 0)),
            metric=str(data.get("metric", "both")),
            per_trial=bool(data.get("per_trial", False)),
        )


def mechanism_label(spec) -> str:
    if isinstance(spec, str):
        return spec
    return "v=" + ",".join(f"{e:g}" for e in spec.entries)


def resolve_mechanism(spec, n: int, capacities: Sequence[int]) -> PercentileVector:
    """Percentile vector for a named strategy or an explicit vector at
    ``(n, capacities)``; raises NotES when the vector is not stable there."""
    m = len(capacities)
    if isinstance(spec, PercentileVector):
        vec = spec
    elif spec == "best":
        if m == 2:
            vec = best_wg_vector(n, *capacities).vector
        elif len(set(capacities)) == 1:
            vec = best_uniform_vector_m(n, capacities[0], m).vector
        else:
            raise UnsupportedCase("the best vector is defined for two facilities or equal capacities")
    elif spec == "extremes":
        vec = PercentileVector(tuple(0.0 if j < (m + 1) // 2 else 1.0 for j in range(m)))
    elif spec == "median":
        vec = PercentileVector((0.5,) * m)
    else:
        raise InvalidParams(f"unknown mechanism {spec!r}")
    if vec.m != m:
        raise InvalidParams(f"mechanism {mechanism_label(spec)} has {vec.m} entries for {m} facilities")
    try:
        stable = es_condition(vec, n, vec.slot_capacities(capacities))
    except UnsupportedCase as exc:
        raise NotES(f"mechanism {mechanism_label(spec)} at n = {n}, k = {tuple(capacities)}: {exc}") from exc
    if not stable:
        raise NotES(f"mechanism {mechanism_label(spec)} is not equilibrium stable at n = {n}, k = {tuple(capacities)}")
    return vec


def trial_seed(seed: int, n: int, t: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(n, t))


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    sw_ub: float
    sw_mech: tuple[float, ...]


def _run_trials(distribution, n, capacities, vectors, seed, trials):
    out = []
    for t in trials:
        instance = sample_positions(distribution, n, trial_seed(seed, n, t))
        ub = sw_upper_bound(instance, capacities)
        sws = tuple(mechanism_welfare(instance, apply_percentile(v, instance, capacities)) for v in vectors)
        out.append(TrialRecord(t, ub, sws))
    return out


@dataclass(frozen=True)
class CellSummary:
    mechanism: str
    n: int
    capacities: tuple[int, ...]
    vector: tuple[float, ...]
    bayesian: float
    bayesian_ci: tuple[float, float]
    average_case: float
    average_case_ci: tuple[float, float]
    trials: int
    seed: int
    records: tuple = field(default=(), compare=False)

    def metric_row(self, metric: str) -> dict:
        mean, (lo, hi) = (
            (self.bayesian, self.bayesian_ci) if metric == "bayesian" else (self.average_case, self.average_case_ci)
        )
        return {
            "mechanism": self.mechanism,
            "n": self.n,
            "metric": metric,
            "mean": mean,
            "ci95_lo": lo,
            "ci95_hi": hi,
            "trials": self.trials,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class RatioReport:
    config: ExperimentConfig | None
    cells: tuple[CellSummary, ...]

    def cell(self, mechanism: str, n: int) -> CellSummary:
        for c in self.cells:
            if c.mechanism == mechanism and c.n == n:
                return c
        raise KeyError((mechanism, n))

    def rows(self) -> list[dict]:
        metrics = self.config.metrics if self.config is not None else METRICS
        return [c.metric_row(m) for c in self.cells for m in metrics]

    def to_dict(self, per_trial: bool = False) -> dict:
        cells = []
        for c in self.cells:
            entry = {
                "mechanism": c.mechanism,
                "n": c.n,
                "capacities": list(c.capacities),
                "v": list(c.vector),
                "bayesian": c.bayesian,
                "bayesian_ci95": list(c.bayesian_ci),
                "average_case": c.average_case,
                "average_case_ci95": list(c.average_case_ci),
                "trials": c.trials,
                "seed": c.seed,
            }
            if per_trial:
                entry["records"] = [{"trial": t, "sw_ub": ub, "sw_mech": sw} for t, ub, sw in c.records]
            cells.append(entry)
        return {"config": self.config.to_dict() if self.config else None, "cells": cells}


def _summarize(label, n, caps, vec, ub, sw, seed, mech_index, keep_records) -> CellSummary:
    ub = np.asarray(ub, dtype=float)
    sw = np.asarray(sw, dtype=float)
    trials = ub.size
    bayesian = math.fsum(ub) / math.fsum(sw)
    per_trial = ub / sw
    average = math.fsum(per_trial) / trials
    if trials > 1:
        sd = math.sqrt(math.fsum((per_trial - average) ** 2) / (trials - 1))
        half = Z95 * sd / math.sqrt(trials)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n, mech_index, _BOOTSTRAP_TAG)))
        idx = rng.integers(0, trials, size=(BOOTSTRAP_RESAMPLES, trials))
        boot = ub[idx].sum(axis=1) / sw[idx].sum(axis=1)
        lo, hi = np.percentile(boot, [2.5, 97.5])
        bayesian_ci = (float(lo), float(hi))
    else:
        half = 0.0
        bayesian_ci = (bayesian, bayesian)
    records = tuple((int(t), float(u), float(s)) for t, u, s in zip(range(trials), ub, sw)) if keep_records else ()
    return CellSummary(
        mechanism=label,
        n=n,
        capacities=tuple(caps),
        vector=vec.entries,
        bayesian=bayesian,
        bayesian_ci=bayesian_ci,
        average_case=average,
        average_case_ci=(average - half, average + half),
        trials=trials,
        seed=seed,
        records=records,
    )


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("CAPFLP_THREADS", "1")))
    except ValueError as exc:
        raise InvalidParams("CAPFLP_THREADS must be an integer") from exc


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> RatioReport:
    """Run every (mechanism, n) cell. ``workers`` defaults to the
    ``CAPFLP_THREADS`` environment variable (1 when unset); the result does
    not depend on it."""
    workers = default_workers() if workers is None else max(1, int(workers))
    labels = [mechanism_label(m) for m in config.mechanisms]
    if len(set(labels)) != len(labels):
        raise InvalidParams("mechanism names must be distinct")
    plan = []
    for n in config.n_values:
        n = int(n)
        caps = capacities_for(n, config.capacity_fractions)
        vectors = [resolve_mechanism(m, n, caps) for m in config.mechanisms]
        plan.append((n, caps, vectors))

    cells = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for n, caps, vectors in plan:
            trials = list(range(config.trials))
            if pool is None:
                records = _run_trials(config.distribution, n, caps, vectors, config.seed, trials)
            else:
                chunks = [trials[i::workers] for i in range(workers)]
                futures = [
                    pool.submit(_run_trials, config.distribution, n, caps, vectors, config.seed, chunk)
                    for chunk in chunks
                    if chunk
                ]
                records = sorted((r for f in futures for r in f.result()), key=lambda r: r.trial)
            ub = [r.sw_ub for r in records]
            for j, (label, vec) in enumerate(zip(labels, vectors)):
                sw = [r.sw_mech[j] for r in records]
                cells.append(_summarize(label, n, caps, vec, ub, sw, config.seed, j, config.per_trial))
    finally:
        if pool is not None:
            pool.shutdown()
    return RatioReport(config, tuple(cells))


# -- persistence ------------------------------------------------------------


def report_csv(report: RatioReport) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in report.rows():
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def trials_csv(report: RatioReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRIAL_COLUMNS)
    for c in report.cells:
        for t, ub, sw in c.records:
            writer.writerow([c.mechanism, c.n, t, repr(ub), repr(sw), repr(ub / sw)])
    return buf.getvalue()


def trials_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}.trials{ext or '.csv'}"


def emit_report(report: RatioReport, fmt: str, path: str, per_trial: bool = False) -> list[str]:
    """Write the report; returns the paths written. With ``per_trial`` and
    CSV output, the trial records go to a sibling ``*.trials.csv`` file."""
    if fmt == "csv":
        written = [path]
        with open(path, "w", newline="") as fh:
            fh.write(report_csv(report))
        if per_trial:
            detail = trials_path(path)
            with open(detail, "w", newline="") as fh:
                fh.write(trials_csv(report))
            written.append(detail)
        return written
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(report.to_dict(per_trial=per_trial), fh, indent=2)
            fh.write("\n")
        return [path]
    raise InvalidParams(f"unknown report format {fmt!r}")


def read_report_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["n"] = int(row["n"])
        row["trials"] = int(row["trials"])
        row["seed"] = int(row["seed"])
        for key in ("mean", "ci95_lo", "ci95_hi"):
            row[key] = float(row[key])
    return rows
