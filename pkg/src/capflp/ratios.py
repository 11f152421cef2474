"""Exact worst-case approximation ratios of percentile mechanisms on the line.

Every ratio is ``optimal welfare / mechanism welfare`` on the worst instance,
computed in exact rational arithmetic. The worst instances are built from
agents stacked at 0 and 1 plus at most one agent at 1/2, so each ratio is the
largest of a few explicit candidate terms:

* ``split-left`` / ``split-right``: the first ``a`` agents at 0, the rest at 1,
  with ``a = i_1`` (left facility alone at 0) or ``a = i_m - 1`` (right
  facility alone at 1). The optimum may put several facilities on the larger
  side, so it is computed rather than assumed to be the total capacity.
* ``half-left`` / ``half-right``: agents before the facility at 0, the
  facility's agent at 1/2, the rest at 1 (and the mirror image).

For all-in-one placements the candidates are the agent at the median index
placed at 0, 1/2 or 1 with everyone else split between 0 and 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import CapacityInfeasible, InvalidParams, NotES, UnsupportedCase

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class RatioFormulaResult:
    active_case: str
    numerator_welfare: Fraction
    denominator_welfare: Fraction

    @property
    def exact_ratio(self) -> Fraction:
        return Fraction(self.numerator_welfare) / Fraction(self.denominator_welfare)

    @property
    def ratio(self) -> float:
        return float(self.exact_ratio)

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "case": self.active_case,
            "num": float(self.numerator_welfare),
            "den": float(self.denominator_welfare),
            "ratio_fraction": str(self.exact_ratio),
        }


def _pick(prefix: str, terms) -> RatioFormulaResult:
    """Largest ratio among ``(label, numerator, denominator)`` terms; the
    first listed wins ties."""
    best = None
    for label, num, den in terms:
        num, den = Fraction(num), Fraction(den)
        if best is None or num / den > best[1] / best[2]:
            best = (label, num, den)
    label, num, den = best
    return RatioFormulaResult(f"{prefix}:{label}", num, den)


def split_optimum(n: int, capacities: Sequence[int], a: int) -> int:
    """Best welfare with ``a`` agents at 0 and ``n - a`` at 1: choose which
    facilities sit at 0 and which at 1."""
    best = 0
    caps = list(capacities)
    total = sum(caps)
    for mask in range(1 << len(caps)):
        at_zero = sum(k for j, k in enumerate(caps) if mask >> j & 1)
        best = max(best, min(at_zero, a) + min(total - at_zero, n - a))
    return best


def split_mechanism_welfare(n: int, capacities: Sequence[int], indices: Sequence[int], a: int) -> int:
    """Welfare of the placement at ``indices`` when the first ``a`` agents sit
    at 0 and the rest at 1."""
    at_zero = sum(k for i, k in zip(indices, capacities) if i <= a)
    return min(at_zero, a) + min(sum(capacities) - at_zero, n - a)


def _check_pair(n, k1, k2):
    if n < 1 or k1 < 1 or k2 < 1:
        raise InvalidParams("n and capacities must be positive")
    if k1 + k2 >= n:
        raise CapacityInfeasible(f"total capacity {k1 + k2} must be below n = {n}")


def ar_wg(n: int, k1: int, k2: int, i1: int, i2: int, optimum_capacities: Sequence[int] | None = None) -> RatioFormulaResult:
    """Worst-case ratio of the two-facility placement at agents ``i1 < i2``
    with capacity ``k1`` on the left and ``k2`` on the right.

    ``optimum_capacities`` lets the optimum use a finer split of the same
    total capacity (groups of facilities merged at the two positions).
    """
    _check_pair(n, k1, k2)
    if k1 < k2:
        raise InvalidParams("the larger capacity must sit on the left (k1 >= k2)")
    if not (1 <= i1 < i2 <= n):
        raise InvalidParams("indices must satisfy 1 <= i1 < i2 <= n")
    if i2 - i1 <= 1:
        raise UnsupportedCase("indices one apart form a side-by-side placement")
    if i2 - i1 < k1 + k2 - 1:
        if k2 == 1:
            raise UnsupportedCase("the closed form covers gaps of at least k1 + k2 - 1")
        raise NotES(f"gap {i2 - i1} is below k1 + k2 - 1 = {k1 + k2 - 1}")
    total = k1 + k2
    opt_caps = tuple(optimum_capacities) if optimum_capacities is not None else (k1, k2)
    if sum(opt_caps) != total:
        raise InvalidParams("optimum capacities must have the same total")
    left_interior = i1 >= (k1 + 1) // 2
    right_interior = i2 < n - (k2 + 1) // 2
    terms = [
        (label, split_optimum(n, opt_caps, a), split_mechanism_welfare(n, (k1, k2), (i1, i2), a))
        for label, a in (("split-left", i1), ("split-right", i2 - 1))
    ]
    if left_interior:
        region = "left-interior"
        terms.insert(0, ("half-left", total, Fraction(k1 + 1, 2) + k2))
    elif right_interior:
        region = "left-edge"
    else:
        region = "both-edges"
        terms.insert(0, ("half-right", total, k1 + Fraction(k2 + 1, 2)))
    return _pick(region, terms)


def ar_uniform_m(n: int, k: int, m: int, i1: int, im: int) -> RatioFormulaResult:
    """Worst-case ratio of an equilibrium-stable placement of ``m``
    facilities of capacity ``k`` whose outer facilities sit at agents ``i1``
    and ``im``. Inner positions do not matter."""
    if k < 1 or m < 2:
        raise InvalidParams("need k >= 1 and m >= 2")
    if m * k >= n:
        raise CapacityInfeasible(f"total capacity {m * k} must be below n = {n}")
    if not (1 <= i1 < im <= n):
        raise InvalidParams("indices must satisfy 1 <= i1 < im <= n")
    if im - i1 < (m - 1) * (2 * k - 1):
        raise NotES("outer indices leave no room for gaps of 2k - 1")
    caps = (k,) * m
    # facilities 1..m-1 sit at or before the left split, facility m after
    indices = (i1,) + (im - 1,) * (m - 2) + (im,)
    half = (k + 1) // 2
    right_count = n - im + 1
    terms = []
    if i1 >= half or right_count > half:
        terms.append(("half", m * k, (m - HALF) * k + HALF))
    terms.append(("split-left", split_optimum(n, caps, i1), min(i1, k) + min((m - 1) * k, n - i1)))
    terms.append(
        (
            "split-right",
            split_optimum(n, caps, im - 1),
            split_mechanism_welfare(n, caps, indices, im - 1),
        )
    )
    region = "interior" if i1 >= half and n - im >= half else "edge"
    return _pick(region, terms)


def _three_point_optimum(zeros: int, ones: int, capacities: Sequence[int]) -> Fraction:
    """Best welfare with ``zeros`` agents at 0, one agent at 1/2 and ``ones``
    agents at 1, over all ways to put each facility at 0, 1/2 or 1."""
    best = Fraction(0)
    for spots in itertools.product((0, 1, 2), repeat=len(capacities)):
        at = [0, 0, 0]
        for k, s in zip(capacities, spots):
            at[s] += k
        left, mid, right = at
        served_left, served_right = min(left, zeros), min(right, ones)
        value = Fraction(served_left + served_right)
        if mid >= 1:
            spare = (zeros - served_left) + (ones - served_right)
            value += 1 + HALF * min(mid - 1, spare)
        elif left > zeros or right > ones:
            value += HALF
        best = max(best, value)
    return best


def ar_aio(n: int, capacities: Sequence[int], index: int | None = None) -> RatioFormulaResult:
    """Worst-case ratio when every facility sits on agent ``index`` (the
    median agent by default). The worst instance puts the agents before it
    at 0, the agents after it at 1 and the agent itself at 0, 1/2 or 1."""
    caps = tuple(int(k) for k in capacities)
    if not caps or any(k < 1 for k in caps):
        raise InvalidParams("capacities must be positive")
    total = sum(caps)
    if total >= n:
        raise CapacityInfeasible(f"total capacity {total} must be below n = {n}")
    if index is None:
        index = (n + 1) // 2
    if not 1 <= index <= n:
        raise InvalidParams(f"index {index} outside 1..{n}")
    zeros, ones = index - 1, n - index
    terms = [
        ("half", _three_point_optimum(zeros, ones, caps), Fraction(total + 1, 2)),
        ("low", split_optimum(n, caps, zeros + 1), min(total, zeros + 1)),
        ("high", split_optimum(n, caps, zeros), min(total, ones + 1)),
    ]
    return _pick("aio", terms)


def ar_median_aio(n: int, k1: int, k2: int) -> RatioFormulaResult:
    """Closed form for two facilities on the median agent: the welfare on the
    half instance is ``(k1 + k2 + 1) / 2``; the optimum is ``k1 + k2`` unless
    the larger facility holds more than half the agents, when it is capped by
    the smaller side of the split."""
    k1, k2 = max(k1, k2), min(k1, k2)
    _check_pair(n, k1, k2)
    den = Fraction(k1 + k2 + 1, 2)
    if k1 >= n // 2 + 1:
        return RatioFormulaResult("aio:large-capacity", k2 + n // 2 + HALF, den)
    return RatioFormulaResult("aio:balanced", Fraction(k1 + k2), den)


def ar_aio_m(n: int, k: int, m: int) -> RatioFormulaResult:
    """``m`` facilities of capacity ``k`` on the median agent."""
    if k < 1 or m < 1:
        raise InvalidParams("need k >= 1 and m >= 1")
    return ar_aio(n, (k,) * m)


def ar_all_aside(n: int, k: int, m: int, a: int, b: int) -> RatioFormulaResult:
    """Ratio of the two-group placement: ``ceil(m/2)`` facilities at agent
    ``a`` and ``floor(m/2)`` at agent ``b``, while the optimum may place the
    ``m`` facilities separately."""
    big, small = (m + 1) // 2 * k, m // 2 * k
    if small == 0:
        return ar_aio(n, (k,) * m, index=a)
    return ar_wg(n, big, small, a, b, optimum_capacities=(k,) * m)
