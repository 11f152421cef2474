"""Agent instances, capacity vectors and the position distributions used by
the experiments.

Seed to stream mapping (stable across releases):

* the generator is ``numpy.random.default_rng(seed)`` (PCG64 behind a
  ``SeedSequence``);
* ``Uniform`` draws ``rng.random(n)``;
* ``Triangular`` draws ``u = rng.random(n)`` and returns ``1 - sqrt(1 - u)``;
* ``Beta(a, b)`` draws ``g1 = rng.standard_gamma(a, n)`` then
  ``g2 = rng.standard_gamma(b, n)`` and returns ``g1 / (g1 + g2)``;
* ``Mixture`` splits ``n`` into uniform/beta/triangular counts by largest
  remainder (ties to the earlier family) and draws the three blocks in that
  order from the same generator.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    CapacityInfeasible,
    EmptyInput,
    InvalidParams,
    NonFinite,
    OutOfRange,
)


@dataclass(frozen=True)
class Instance:
    """Sorted agent reports on [0, 1]. Build with :func:`make_instance`."""

    positions: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.positions)

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, i: int) -> float:
        return self.positions[i]

    def to_json(self) -> str:
        return json.dumps(list(self.positions))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["position"])
        for x in self.positions:
            writer.writerow([repr(x)])
        return buf.getvalue()


def make_instance(raw_positions: Iterable[float]) -> Instance:
    values = [float(x) for x in raw_positions]
    if not values:
        raise EmptyInput("an instance needs at least one agent")
    for x in values:
        if not math.isfinite(x):
            raise NonFinite(f"non-finite position {x!r}")
        if x < 0.0 or x > 1.0:
            raise OutOfRange(f"position {x!r} outside [0, 1]")
    return Instance(tuple(sorted(values)))


def instance_from_json(text: str) -> Instance:
    data = json.loads(text)
    if isinstance(data, dict):
        data = data.get("positions", data.get("instance"))
    if not isinstance(data, list):
        raise InvalidParams("instance JSON must be an array of numbers")
    return make_instance(data)


def instance_from_csv(text: str) -> Instance:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and "position" not in rows[0]:
        raise InvalidParams("instance CSV needs a 'position' column")
    return make_instance(float(r["position"]) for r in rows)


def load_instance(path: str) -> Instance:
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".csv"):
        return instance_from_csv(text)
    return instance_from_json(text)


CapacityVector = tuple[int, ...]


def make_capacities(raw: Iterable[int], n: int | None = None) -> CapacityVector:
    """Validate capacities; with ``n`` also require the scarce-resource
    condition ``sum(k) < n``."""
    caps = []
    for k in raw:
        if isinstance(k, float):
            if not k.is_integer():
                raise InvalidParams(f"capacity {k!r} is not an integer")
            k = int(k)
        if int(k) < 1:
            raise InvalidParams(f"capacity {k!r} must be >= 1")
        caps.append(int(k))
    if not caps:
        raise EmptyInput("at least one facility is required")
    if n is not None and sum(caps) >= n:
        raise CapacityInfeasible(
            f"total capacity {sum(caps)} must be below the number of agents {n}"
        )
    return tuple(caps)


# -- distributions ---------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    kind = "uniform"


@dataclass(frozen=True)
class Triangular:
    """Density 2(1 - x) on [0, 1]."""

    kind = "triangular"


@dataclass(frozen=True)
class Beta:
    alpha: float
    beta: float
    kind = "beta"

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidParams("Beta parameters must be strictly positive")


@dataclass(frozen=True)
class Mixture:
    """Population split (uniform, beta, triangular) by ``weights``."""

    weights: tuple[float, float, float]
    alpha: float = 5.0
    beta: float = 5.0
    kind = "mixture"

    def __post_init__(self):
        if len(self.weights) != 3:
            raise InvalidParams("mixture weights are (uniform, beta, triangular)")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
            raise InvalidParams("mixture weights must be non-negative and sum to 1")
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidParams("Beta parameters must be strictly positive")

    def counts(self, n: int) -> tuple[int, int, int]:
        raw = [w * n for w in self.weights]
        counts = [math.floor(r) for r in raw]
        order = sorted(range(3), key=lambda j: (-(raw[j] - counts[j]), j))
        for j in order[: n - sum(counts)]:
            counts[j] += 1
        return counts[0], counts[1], counts[2]


DistributionSpec = Union[Uniform, Triangular, Beta, Mixture]


def distribution_from_dict(data: dict) -> DistributionSpec:
    kind = str(data.get("kind", "")).lower()
    if kind == "uniform":
        return Uniform()
    if kind == "triangular":
        return Triangular()
    if kind == "beta":
        return Beta(float(data["alpha"]), float(data["beta"]))
    if kind == "mixture":
        weights = data.get("weights")
        if weights is None:
            weights = [data["lambda_u"], data["lambda_b"], data["lambda_t"]]
        return Mixture(
            tuple(float(w) for w in weights),
            float(data.get("alpha", 5.0)),
            float(data.get("beta", 5.0)),
        )
    raise InvalidParams(f"unknown distribution kind {data.get('kind')!r}")


def distribution_to_dict(spec: DistributionSpec) -> dict:
    if isinstance(spec, Beta):
        return {"kind": "beta", "alpha": spec.alpha, "beta": spec.beta}
    if isinstance(spec, Mixture):
        return {
            "kind": "mixture",
            "weights": list(spec.weights),
            "alpha": spec.alpha,
            "beta": spec.beta,
        }
    return {"kind": spec.kind}


def parse_distribution(text: str) -> DistributionSpec:
    """Accept a JSON object or a bare kind name (``uniform``, ``triangular``)."""
    text = text.strip()
    if text.startswith("{"):
        return distribution_from_dict(json.loads(text))
    return distribution_from_dict({"kind": text})


def triangular_quantile(u):
    """Inverse CDF of the density 2(1 - x): F(x) = 2x - x**2."""
    return 1.0 - np.sqrt(1.0 - np.asarray(u, dtype=float))


def _draw(spec: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 0:
        return np.empty(0)
    if isinstance(spec, Uniform):
        return rng.random(n)
    if isinstance(spec, Triangular):
        return triangular_quantile(rng.random(n))
    if isinstance(spec, Beta):
        g1 = rng.standard_gamma(spec.alpha, n)
        g2 = rng.standard_gamma(spec.beta, n)
        return g1 / (g1 + g2)
    if isinstance(spec, Mixture):
        n_u, n_b, n_t = spec.counts(n)
        return np.concatenate(
            [
                _draw(Uniform(), n_u, rng),
                _draw(Beta(spec.alpha, spec.beta), n_b, rng),
                _draw(Triangular(), n_t, rng),
            ]
        )
    raise InvalidParams(f"unsupported distribution {spec!r}")


def sample_positions(
    spec: DistributionSpec, n: int, seed: Union[int, np.random.SeedSequence]
) -> Instance:
    if n < 1:
        raise InvalidParams("n must be positive")
    rng = np.random.default_rng(seed)
    return make_instance(np.clip(_draw(spec, n, rng), 0.0, 1.0).tolist())


def positions_array(instance: Instance | Sequence[float]) -> np.ndarray:
    if isinstance(instance, Instance):
        return np.asarray(instance.positions, dtype=float)
    return np.asarray(instance, dtype=float)
