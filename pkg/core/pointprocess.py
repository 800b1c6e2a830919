"""Uniform m-point processes on finite unions of intervals.

``IntervalSet`` doubles as the support B of a process and as the cells A_j of a
partition. Endpoints may be ``Fraction`` (exact pmf arithmetic) or ``float``.
"""

from fractions import Fraction
from itertools import product
from math import comb, factorial
from numbers import Number
from typing import Any, Iterator, List, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.stats import binom

from core.errors import ConditioningError, PartitionError, RearrangementError

MAX_CONDITIONING_ATTEMPTS = 10_000_000
OVERLAP_TOLERANCE = 1e-12


def as_number(value: Any) -> Number:
    """Keep floats as floats; ints, strings like '1/3' and Fractions become Fractions"""
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    raise TypeError(f"unsupported number {value!r}")


def render_number(value: Number) -> Any:
    """JSON-friendly form: integral Fractions as int, other Fractions as 'p/q'"""
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else str(value)
    return value


class IntervalSet(BaseModel):
    """Sorted, pairwise disjoint closed intervals inside [0, 1]"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    intervals: Tuple[Tuple[Any, Any], ...] = ()

    @field_validator("intervals", mode="before")
    @classmethod
    def _normalize(cls, value):
        pieces = sorted((as_number(a), as_number(b)) for a, b in value)
        merged: List[Tuple[Any, Any]] = []
        for a, b in pieces:
            if a < 0 or b > 1 or a > b:
                raise ValueError(f"interval [{a}, {b}] is not inside [0, 1]")
            if a == b:
                continue
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        return tuple(merged)

    @classmethod
    def of(cls, *intervals: Tuple[Any, Any]) -> "IntervalSet":
        return cls(intervals=intervals)

    @classmethod
    def unit(cls) -> "IntervalSet":
        return cls(intervals=((0, 1),))

    def measure(self) -> Number:
        return sum((b - a for a, b in self.intervals), Fraction(0))

    def is_empty(self) -> bool:
        return not self.intervals

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if lo < hi:
                    out.append((lo, hi))
        return IntervalSet(intervals=out)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(intervals=self.intervals + other.intervals)

    def complement(self) -> "IntervalSet":
        out = []
        cursor = Fraction(0)
        for a, b in self.intervals:
            if cursor < a:
                out.append((cursor, a))
            cursor = b
        if cursor < 1:
            out.append((cursor, Fraction(1)))
        return IntervalSet(intervals=out)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        return self.intersect(other.complement())

    def symmetric_difference(self, other: "IntervalSet") -> "IntervalSet":
        return self.difference(other).union(other.difference(self))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        inside = np.zeros(points.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (points >= float(a)) & (points <= float(b))
        return inside

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return self.sample_many(1, m, rng)[0]

    def sample_many(self, trials: int, m: int, rng: np.random.Generator) -> np.ndarray:
        """(trials, m) points uniform on the set, by inverting its distribution function"""
        total = float(self.measure())
        if total <= 0:
            raise RearrangementError("cannot sample uniformly from a set of measure zero")
        starts = np.array([float(a) for a, _ in self.intervals])
        lengths = np.array([float(b - a) for a, b in self.intervals])
        cumulative = np.concatenate(([0.0], np.cumsum(lengths)))
        u = rng.random((trials, m)) * total
        piece = np.clip(np.searchsorted(cumulative, u, side="right") - 1, 0, len(lengths) - 1)
        return starts[piece] + (u - cumulative[piece])

    def to_json(self) -> List[List[Any]]:
        return [[render_number(a), render_number(b)] for a, b in self.intervals]


def symmetric_difference_measure(first: IntervalSet, second: IntervalSet) -> Number:
    return first.symmetric_difference(second).measure()


def check_partition(partition: Sequence[IntervalSet]) -> None:
    """Cells must be pairwise disjoint up to null sets and cover [0, 1]"""
    for i, first in enumerate(partition):
        for second in partition[i + 1:]:
            if float(first.intersect(second).measure()) > OVERLAP_TOLERANCE:
                raise PartitionError("partition cells overlap")
    covered = float(sum((cell.measure() for cell in partition), Fraction(0)))
    if abs(covered - 1.0) > OVERLAP_TOLERANCE:
        raise PartitionError(f"partition cells cover measure {covered}, not 1")


def count_in(points: np.ndarray, cell: IntervalSet) -> np.ndarray:
    """N(A) along the last axis"""
    return cell.contains(points).sum(axis=-1)


def sample_point_process(m: int, B: IntervalSet, rng: np.random.Generator) -> np.ndarray:
    """m independent points uniform on B"""
    if m < 0:
        raise RearrangementError("a point process needs m >= 0 points")
    return B.sample(m, rng)


def compositions(m: int, k: int) -> Iterator[Tuple[int, ...]]:
    """All k-tuples of nonnegative integers summing to m"""
    for head in product(range(m + 1), repeat=k - 1):
        rest = m - sum(head)
        if rest >= 0:
            yield head + (rest,)


def multinomial_pmf(m: int, B: IntervalSet, partition: Sequence[IntervalSet],
                    counts: Sequence[int]) -> Number:
    """P(N(A_1) = i_1, ..., N(A_k) = i_k) for the uniform m-point process on B"""
    if len(counts) != len(partition):
        raise RearrangementError("one count per partition cell is required")
    if any(c < 0 for c in counts) or sum(counts) != m:
        raise RearrangementError(f"counts {tuple(counts)} do not sum to m={m}")
    check_partition(partition)
    total = B.measure()
    if total <= 0:
        raise RearrangementError("support B has measure zero")
    coefficient = factorial(m)
    for c in counts:
        coefficient //= factorial(c)
    probability = Fraction(coefficient)
    for cell, c in zip(partition, counts):
        probability *= (cell.intersect(B).measure() / total) ** c
    return probability


def order_statistic_tail(n: int, r: int, y: float) -> float:
    """P(X_(r) > y) for the r-th largest of n i.u.d. points: P(Bin(n, 1 - y) >= r)"""
    if not 1 <= r <= n:
        raise RearrangementError(f"order statistic index r={r} is outside 1..{n}")
    if not 0 <= y <= 1:
        raise RearrangementError(f"y={y} is outside [0, 1]")
    return float(binom.sf(r - 1, n, 1 - y))


def order_statistic_leading_term(n: int, r: int, y: float) -> float:
    """C(n, r) y^(n-r) (1-y)^r, the dominant part of the tail as y -> 1"""
    if not 1 <= r <= n:
        raise RearrangementError(f"order statistic index r={r} is outside 1..{n}")
    return comb(n, r) * y ** (n - r) * (1 - y) ** r


def restrict_process(m: int, B: IntervalSet, A1: IntervalSet, observed: int) -> Tuple[int, IntervalSet]:
    """Given N(A_1) = observed, the points in A_2 = A_1^c form N_{m - observed, B ∩ A_2}"""
    if observed < 0 or observed > m:
        raise RearrangementError(f"observed count {observed} is outside 0..{m}")
    return m - observed, B.intersect(A1.complement())


def sample_conditioned(m: int, B: IntervalSet, A: IntervalSet, count: int, trials: int,
                       rng: np.random.Generator,
                       max_attempts: int = MAX_CONDITIONING_ATTEMPTS) -> np.ndarray:
    """(trials, m) draws of N_{m,B} conditioned on N(A) = count, by rejection"""
    accepted: List[np.ndarray] = []
    have = 0
    attempts = 0
    batch = max(1024, trials)
    while have < trials:
        if attempts >= max_attempts:
            logger.error(f"conditioning on N(A)={count} accepted {have}/{trials} after {attempts} attempts")
            raise ConditioningError(f"rejection sampling exceeded {max_attempts} attempts")
        size = min(batch, max_attempts - attempts)
        draws = B.sample_many(size, m, rng)
        attempts += size
        keep = draws[count_in(draws, A) == count]
        accepted.append(keep)
        have += len(keep)
    logger.debug(f"conditioned sampling used {attempts} attempts for {trials} trials")
    return np.concatenate(accepted)[:trials]
