"""Permutations, rank arrays and the partial-rank recurrences.

All interfaces are 1-indexed: ``images[i - 1]`` holds s_i, ``RankArray.entry(j, k)``
holds rho_{j,k}.
"""

from itertools import permutations as _permutations
from typing import Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from core.errors import InvalidPermutationError, InvalidRankTupleError, TieError


def _check_bijection(images: Sequence[int]) -> None:
    n = len(images)
    if n < 1:
        raise InvalidPermutationError("a permutation needs at least one element")
    if sorted(images) != list(range(1, n + 1)):
        raise InvalidPermutationError(f"{tuple(images)} is not a bijection of 1..{n}")


def _check_rank_tuple(ranks: Sequence[int]) -> None:
    if len(ranks) < 1:
        raise InvalidRankTupleError("a rank tuple needs at least one entry")
    for k, r in enumerate(ranks, start=1):
        if not 1 <= r <= k:
            raise InvalidRankTupleError(f"rank {r} at position {k} is outside 1..{k}")


def _check_distinct(values: Sequence[float]) -> None:
    if len(set(values)) != len(values):
        raise TieError(f"values contain ties: {tuple(values)}")


class Permutation(BaseModel):
    """A bijection of {1..n}, stored as its images s_1..s_n"""

    model_config = ConfigDict(frozen=True)

    images: Tuple[int, ...]

    @model_validator(mode="after")
    def _validate(self) -> "Permutation":
        _check_bijection(self.images)
        return self

    @classmethod
    def of(cls, images: Sequence[int]) -> "Permutation":
        images = tuple(int(i) for i in images)
        _check_bijection(images)
        return cls(images=images)

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i - 1]


class RankTuple(BaseModel):
    """Initial ranks (R_1..R_n) with 1 <= R_k <= k"""

    model_config = ConfigDict(frozen=True)

    ranks: Tuple[int, ...]

    @model_validator(mode="after")
    def _validate(self) -> "RankTuple":
        _check_rank_tuple(self.ranks)
        return self

    @classmethod
    def of(cls, ranks: Sequence[int]) -> "RankTuple":
        ranks = tuple(int(r) for r in ranks)
        _check_rank_tuple(ranks)
        return cls(ranks=ranks)

    @property
    def n(self) -> int:
        return len(self.ranks)


class RankArray(BaseModel):
    """The full n x n array of partial ranks rho_{j,k}, below-diagonal entries included"""

    model_config = ConfigDict(frozen=True)

    entries: Tuple[Tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return len(self.entries)

    def entry(self, j: int, k: int) -> int:
        return self.entries[j - 1][k - 1]

    def column(self, k: int) -> Tuple[int, ...]:
        return tuple(row[k - 1] for row in self.entries)

    def current_ranks(self, k: int) -> Tuple[int, ...]:
        """Upper entries of column k: rho_{1,k}..rho_{k,k}"""
        return self.column(k)[:k]

    def diagonal(self) -> RankTuple:
        return RankTuple.of(self.entries[i][i] for i in range(self.n))


def identity(n: int) -> Permutation:
    return Permutation.of(range(1, n + 1))


def inverse(s: Permutation) -> Permutation:
    inv = [0] * s.n
    for i, v in enumerate(s.images, start=1):
        inv[v - 1] = i
    return Permutation.of(inv)


def compose(s: Permutation, t: Permutation) -> Permutation:
    """(s o t)_i = s_{t_i}"""
    if s.n != t.n:
        raise InvalidPermutationError("cannot compose permutations of different sizes")
    return Permutation.of(s(t(i)) for i in range(1, s.n + 1))


def apply_permutation(values: Sequence, s: Permutation) -> Tuple:
    """values^s: the tuple whose i-th entry is values[s_i]"""
    if len(values) != s.n:
        raise InvalidPermutationError(f"permutation of size {s.n} applied to {len(values)} values")
    return tuple(values[v - 1] for v in s.images)


def all_permutations(n: int) -> Iterator[Permutation]:
    for images in _permutations(range(1, n + 1)):
        yield Permutation(images=images)


def initial_ranks(y: Sequence[float]) -> RankTuple:
    """R_k = 1 + #{i < k : y_i > y_k}"""
    _check_distinct(y)
    return RankTuple.of(1 + sum(1 for i in range(k) if y[i] > y[k]) for k in range(len(y)))


def rank_array(s: Permutation) -> RankArray:
    """rho_{j,k} = 1 + #{i <= k : s_i < s_j}"""
    n = s.n
    entries = []
    for j in range(n):
        row = []
        count = 0
        for k in range(n):
            if s.images[k] < s.images[j]:
                count += 1
            row.append(1 + count)
        entries.append(tuple(row))
    return RankArray(entries=tuple(entries))


def extend_row(rho_jk: int, diagonal: Sequence[int], k: Optional[int] = None) -> int:
    """Carry a current rank rho_{j,k} forward across the diagonal entries
    rho_{k+1,k+1}..rho_{k',k'}; the value moves down one place exactly when the
    newcomer ranks at or above it.

    When ``k`` is given, every input is range-checked against its column.
    """
    if rho_jk < 1 or (k is not None and rho_jk > k):
        raise InvalidRankTupleError(f"current rank {rho_jk} is outside 1..{k}")
    current = rho_jk
    for offset, r in enumerate(diagonal, start=1):
        if r < 1 or (k is not None and r > k + offset):
            raise InvalidRankTupleError(f"diagonal rank {r} is out of range at offset {offset}")
        if r <= current:
            current += 1
    return current


def column_restrict(column_kprime: Sequence[int], j: int, k: int) -> int:
    """rho_{j,k} recovered from column k': 1 + #{i <= k : rho_{i,k'} < rho_{j,k'}}.

    ``column_kprime`` lists rho_{1,k'}, rho_{2,k'}, ... and must reach row max(j, k).
    """
    if j < 1 or k < 1:
        raise InvalidRankTupleError("row and column indices start at 1")
    if len(column_kprime) < max(j, k):
        raise InvalidRankTupleError(f"column prefix of length {len(column_kprime)} does not reach row {max(j, k)}")
    head = list(column_kprime[:max(j, k)])
    if len(set(head)) != len(head):
        raise InvalidRankTupleError(f"column entries are not distinct: {tuple(head)}")
    target = column_kprime[j - 1]
    return 1 + sum(1 for i in range(k) if column_kprime[i] < target)


def permutation_from_initial_ranks(r: RankTuple) -> Permutation:
    """The unique mu whose rank array has diagonal r.

    Arrivals are inserted one at a time into the running descending order at
    position R_k; the final position of arrival j is mu_j.
    """
    order: List[int] = []
    for k, rank in enumerate(r.ranks, start=1):
        order.insert(rank - 1, k)
    mu = [0] * r.n
    for position, arrival in enumerate(order, start=1):
        mu[arrival - 1] = position
    return Permutation.of(mu)


def descending_permutation(a: Sequence[float]) -> Tuple[Tuple[float, ...], Permutation]:
    """Sort ``a`` descending; delta satisfies sorted[i] = a[delta_i]"""
    _check_distinct(a)
    delta = sorted(range(1, len(a) + 1), key=lambda i: a[i - 1], reverse=True)
    delta = Permutation.of(delta)
    return apply_permutation(a, delta), delta


def check_rank_array_lemma(rho: RankArray) -> List[str]:
    """Return the partial-rank lemma items that ``rho`` violates (empty when all hold)"""
    n = rho.n
    problems = []
    for k in range(1, n + 1):
        for j in range(1, n + 1):
            value = rho.entry(j, k)
            if not 1 <= value <= k + 1:
                problems.append(f"(i) rho[{j},{k}]={value} outside 1..{k + 1}")
            if j <= k and value > k:
                problems.append(f"(i) upper entry rho[{j},{k}]={value} exceeds {k}")
        upper = rho.current_ranks(k)
        if len(set(upper)) != k:
            problems.append(f"(ii) column {k} upper entries repeat: {upper}")
    if sorted(rho.column(n)) != list(range(1, n + 1)):
        problems.append("(i) last column is not a permutation")
    for k in range(2, n + 1):
        diag = rho.entry(k, k)
        for j in range(1, k):
            if (diag < rho.entry(j, k)) != (diag <= rho.entry(j, k - 1)):
                problems.append(f"(iii) fails at j={j}, k={k}")
    for k in range(1, n + 1):
        for kp in range(k + 1, n + 1):
            for j in range(1, k + 1):
                jumps = sum(1 for ell in range(k + 1, kp + 1)
                            if rho.entry(ell, ell) <= rho.entry(j, ell - 1))
                if rho.entry(j, kp) != rho.entry(j, k) + jumps:
                    problems.append(f"(iv) fails at j={j}, k={k}, k'={kp}")
    return problems
