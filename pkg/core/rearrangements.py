"""Rearrangement constructions.

Every kind produces arrival data mu from the descending value data x_desc, and
the rearranged tuple is y_k = x_desc[mu_k]. ``apply_batch`` works on a whole
(trials, n) array at once; ``apply`` is the single-trial view of the same code.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product
from numbers import Number
from typing import Dict, List, Optional

import numpy as np
from loguru import logger

from core.directing import canonicalize, evaluate_many, v_shape
from core.errors import InvalidSpecError, NoClosedFormError, TieError
from core.rankcore import Permutation, rank_array
from schemas.rearrangement import (
    BinarySpec,
    ConstantSpec,
    FixedAssignment,
    GeneralConstructionSpec,
    RandomizedBlockSpec,
    ShuffledBlock,
    SwitchingBlock,
    TravellersSpec,
    TrialRecord,
    TrivialSpec,
)


@dataclass(frozen=True)
class TrialBatch:
    """Column-aligned arrays for a run of trials; mu and ranks are 1-indexed"""

    x_desc: np.ndarray
    mu: np.ndarray
    y: np.ndarray
    ranks: np.ndarray
    jumps: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.mu.shape[0]


def sample_iud(n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent uniforms on [0, 1]"""
    if n < 1:
        raise InvalidSpecError("n must be at least 1")
    return rng.random(n)


def sample_iud_many(trials: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random((trials, n))


def block_values(spec: GeneralConstructionSpec, i: int) -> List[int]:
    """N_i = {n_{i-1}+1, ..., n_i - 1} with n_0 = 0 and n_{d+1} = n + 1 (i is 1-based)"""
    bounds = [0] + list(spec.fixed_values) + [spec.n + 1]
    return list(range(bounds[i - 1] + 1, bounds[i]))


def validate_general(spec: GeneralConstructionSpec) -> List[str]:
    """Every structural rule the spec breaks; empty when the spec is usable"""
    violations: List[str] = []
    n, d = spec.n, spec.d
    if len(spec.fixed_positions) != d:
        violations.append(f"{d} fixed values but {len(spec.fixed_positions)} fixed positions")
    if list(spec.fixed_values) != sorted(set(spec.fixed_values)):
        violations.append("fixed values must be strictly increasing")
    if any(not 1 <= v <= n for v in spec.fixed_values):
        violations.append(f"fixed values must lie in 1..{n}")
    if len(set(spec.fixed_positions)) != len(spec.fixed_positions):
        violations.append("fixed positions must be distinct")
    if any(not 1 <= p <= n for p in spec.fixed_positions):
        violations.append(f"fixed positions must lie in 1..{n}")
    bounds = [0] + list(spec.fixed_values) + [n + 1]
    for i in range(len(bounds) - 1):
        if bounds[i + 1] - bounds[i] == 2:
            violations.append(f"n_{{i+1}} - n_i = 2 between {bounds[i]} and {bounds[i + 1]}")
    if len(spec.blocks) != d + 1:
        violations.append(f"expected {d + 1} switching blocks, got {len(spec.blocks)}")
        return violations
    for i, block in enumerate(spec.blocks, start=1):
        expected = block_values(spec, i)
        if sorted(block.values) != expected:
            violations.append(f"block {i} values {sorted(block.values)} differ from N_{i} = {expected}")
        if len(block.positions) != len(expected):
            violations.append(f"#M_{i} = {len(block.positions)} but #N_{i} = {len(expected)}")
        if len(expected) == 1:
            violations.append(f"N_{i} has a single value")
        if expected and (block.theta is None or not 0 < block.theta < 1):
            violations.append(f"block {i} needs theta in (0, 1), got {block.theta}")
    positions = list(spec.fixed_positions) + [p for b in spec.blocks for p in b.positions]
    if sorted(positions) != list(range(1, n + 1)):
        violations.append(f"fixed positions and blocks M_i do not partition 1..{n}")
    return violations


def validate_randomized_block(spec: RandomizedBlockSpec) -> List[str]:
    violations: List[str] = []
    positions = [f.position for f in spec.fixed] + [p for b in spec.blocks for p in b.positions]
    values = [f.value for f in spec.fixed] + [v for b in spec.blocks for v in b.values]
    target = list(range(1, spec.n + 1))
    if sorted(positions) != target:
        violations.append(f"positions do not partition 1..{spec.n}")
    if sorted(values) != target:
        violations.append(f"values do not partition 1..{spec.n}")
    for i, block in enumerate(spec.blocks, start=1):
        if len(block.positions) != len(block.values):
            violations.append(f"block {i} has {len(block.positions)} positions for {len(block.values)} values")
    return violations


def validate(spec) -> None:
    """Raise InvalidSpecError for a spec that cannot be sampled"""
    if isinstance(spec, GeneralConstructionSpec):
        problems = validate_general(spec)
    elif isinstance(spec, RandomizedBlockSpec):
        problems = validate_randomized_block(spec)
    elif isinstance(spec, ConstantSpec) and len(spec.permutation) != spec.n:
        problems = [f"permutation has length {len(spec.permutation)}, expected {spec.n}"]
    else:
        problems = []
    if problems:
        raise InvalidSpecError("; ".join(problems))


def _ranks_from_mu(mu: np.ndarray) -> np.ndarray:
    """R_k = 1 + #{i < k : mu_i < mu_k}, a smaller mu meaning a larger value"""
    n = mu.shape[1]
    earlier = np.triu(np.ones((n, n), dtype=bool), k=1)
    above = (mu[:, :, None] < mu[:, None, :]) & earlier
    return 1 + above.sum(axis=1)


def _order_by(fn_values: np.ndarray) -> np.ndarray:
    return np.argsort(fn_values, axis=1, kind="stable")


def _general_mu(spec: GeneralConstructionSpec, x_desc: np.ndarray) -> np.ndarray:
    trials, n = x_desc.shape
    mu = np.zeros((trials, n), dtype=np.int64)
    for position, value in zip(spec.fixed_positions, spec.fixed_values):
        mu[:, position - 1] = value
    # a_0 = 1, a_{n+1} = 0
    padded = np.concatenate([np.ones((trials, 1)), x_desc, np.zeros((trials, 1))], axis=1)
    bounds = [0] + list(spec.fixed_values) + [n + 1]
    for i, block in enumerate(spec.blocks, start=1):
        values = np.array(block_values(spec, i), dtype=np.int64)
        if values.size == 0:
            continue
        hi = padded[:, bounds[i - 1]][:, None]
        lo = padded[:, bounds[i]][:, None]
        gamma = np.clip((x_desc[:, values - 1] - lo) / (hi - lo), 0.0, 1.0)
        order = _order_by(evaluate_many(v_shape(block.theta), gamma))
        mu[:, np.array(sorted(block.positions)) - 1] = values[order]
    return mu


def _randomized_block_mu(spec: RandomizedBlockSpec, trials: int, rng: np.random.Generator) -> np.ndarray:
    mu = np.zeros((trials, spec.n), dtype=np.int64)
    for fixed in spec.fixed:
        mu[:, fixed.position - 1] = fixed.value
    for block in spec.blocks:
        shuffled = rng.permuted(np.tile(np.array(block.values, dtype=np.int64), (trials, 1)), axis=1)
        mu[:, np.array(sorted(block.positions)) - 1] = shuffled
    return mu


def apply_batch(spec, x: np.ndarray, rng: np.random.Generator) -> TrialBatch:
    """Rearrange every row of ``x`` (shape (trials, n)) according to ``spec``"""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    trials, n = x.shape
    if n != spec.n:
        raise InvalidSpecError(f"spec is for n={spec.n}, input rows have {n} values")
    validate(spec)
    x_desc = -np.sort(-x, axis=1)
    if n > 1 and np.any(x_desc[:, :-1] == x_desc[:, 1:]):
        raise TieError("input rows contain tied values")

    jumps = None
    if isinstance(spec, TrivialSpec):
        mu = rng.permuted(np.tile(np.arange(1, n + 1), (trials, 1)), axis=1)
    elif isinstance(spec, ConstantSpec):
        mu = np.tile(np.array(spec.permutation, dtype=np.int64), (trials, 1))
    elif isinstance(spec, TravellersSpec):
        mu = _order_by(evaluate_many(v_shape(spec.theta), x_desc)) + 1
    elif isinstance(spec, BinarySpec):
        mu = _order_by(evaluate_many(canonicalize(spec.directing), x_desc)) + 1
    elif isinstance(spec, GeneralConstructionSpec):
        mu = _general_mu(spec, x_desc)
    elif isinstance(spec, RandomizedBlockSpec):
        mu = _randomized_block_mu(spec, trials, rng)
    else:
        raise InvalidSpecError(f"unknown rearrangement kind {type(spec).__name__}")

    y = np.take_along_axis(x_desc, mu - 1, axis=1)
    if isinstance(spec, TravellersSpec):
        jumps = travellers_jumps(y, spec.theta)
    return TrialBatch(x_desc=x_desc, mu=mu, y=y, ranks=_ranks_from_mu(mu), jumps=jumps)


def apply(spec, x, rng: np.random.Generator) -> TrialRecord:
    """Rearrange a single n-tuple"""
    return trial_records(apply_batch(spec, np.asarray(x, dtype=float)[None, :], rng))[0]


def trial_records(batch: TrialBatch, first_index: Optional[int] = None) -> List[TrialRecord]:
    records = []
    for t in range(len(batch)):
        records.append(TrialRecord(
            trial=None if first_index is None else first_index + t,
            x_desc=batch.x_desc[t].tolist(),
            mu=batch.mu[t].tolist(),
            y=batch.y[t].tolist(),
            ranks=batch.ranks[t].tolist(),
            jump_indicators=None if batch.jumps is None else batch.jumps[t].tolist(),
        ))
    return records


def travellers_jumps(y: np.ndarray, theta: float) -> np.ndarray:
    """J_k = 1[Y_k >= theta]; R_k = 1 exactly when J_k = 1 (k >= 2)"""
    return np.asarray(y) >= theta


def _two_point(low: int, high: int, p_high: Number) -> Dict[int, Number]:
    if low == high:
        return {low: 1}
    law = {low: 1 - p_high, high: p_high}
    return {rank: p for rank, p in law.items() if p != 0}


def fixed_position_rank(spec: GeneralConstructionSpec, i: int) -> int:
    """R_{m_i} = 1 + #{j < i : m_j < m_i} + #({1..m_i} ∩ (M_1 ∪ ... ∪ M_i))"""
    m_i = spec.fixed_positions[i - 1]
    earlier_fixed = sum(1 for j in range(1, i) if spec.fixed_positions[j - 1] < m_i)
    above = sum(1 for p in range(1, i + 1) for h in spec.blocks[p - 1].positions if h <= m_i)
    return 1 + earlier_fixed + above


def predicted_rank_distribution(spec, k: int) -> Dict[int, Number]:
    """Closed-form law of the initial rank R_k"""
    if not 1 <= k <= spec.n:
        raise InvalidSpecError(f"k={k} is outside 1..{spec.n}")
    if isinstance(spec, ConstantSpec):
        return {rank_array(Permutation.of(spec.permutation)).entry(k, k): 1}
    if isinstance(spec, TravellersSpec):
        return {1: 1} if k == 1 else _two_point(1, k, spec.theta)
    if isinstance(spec, GeneralConstructionSpec):
        validate(spec)
        if k in spec.fixed_positions:
            return {fixed_position_rank(spec, spec.fixed_positions.index(k) + 1): 1}
        i = next(p for p, block in enumerate(spec.blocks, start=1) if k in block.positions)
        block = spec.blocks[i - 1]
        above_fixed = sum(1 for p, m in enumerate(spec.fixed_positions, start=1) if m < k and p < i)
        above_blocks = sum(1 for p in range(1, i) for h in spec.blocks[p - 1].positions if h < k)
        s = 1 + above_fixed + above_blocks
        r = sum(1 for h in block.positions if h < k)
        return _two_point(s, s + r, block.theta)
    if isinstance(spec, RandomizedBlockSpec):
        return _enumerate_randomized_block(spec, k)
    raise NoClosedFormError(f"no closed-form rank law for kind '{spec.kind}'")


def _enumerate_randomized_block(spec: RandomizedBlockSpec, k: int) -> Dict[int, Fraction]:
    validate(spec)
    orders = [list(permutations(block.values)) for block in spec.blocks]
    total = 0
    counts: Dict[int, int] = {}
    for choice in product(*orders):
        mu = [0] * spec.n
        for fixed in spec.fixed:
            mu[fixed.position - 1] = fixed.value
        for block, arrangement in zip(spec.blocks, choice):
            for position, value in zip(sorted(block.positions), arrangement):
                mu[position - 1] = value
        rank = rank_array(Permutation.of(mu)).entry(k, k)
        counts[rank] = counts.get(rank, 0) + 1
        total += 1
    return {rank: Fraction(c, total) for rank, c in sorted(counts.items())}


def random_general_spec(n: int, rng: np.random.Generator, max_tries: int = 10_000) -> GeneralConstructionSpec:
    """A uniformly chosen valid general construction on n observations"""
    for _ in range(max_tries):
        d = int(rng.integers(0, n + 1))
        fixed_values = sorted(int(v) for v in rng.choice(np.arange(1, n + 1), size=d, replace=False))
        bounds = [0] + fixed_values + [n + 1]
        if any(b - a == 2 for a, b in zip(bounds, bounds[1:])):
            continue
        positions = [int(p) for p in rng.permutation(np.arange(1, n + 1))]
        fixed_positions, rest = positions[:d], positions[d:]
        blocks = []
        for i in range(1, d + 2):
            values = list(range(bounds[i - 1] + 1, bounds[i]))
            taken, rest = rest[:len(values)], rest[len(values):]
            theta = float(rng.uniform(0.1, 0.9)) if values else None
            blocks.append(SwitchingBlock(positions=sorted(taken), values=values, theta=theta))
        spec = GeneralConstructionSpec(n=n, fixed_values=fixed_values,
                                       fixed_positions=fixed_positions, blocks=blocks)
        logger.debug(f"generated general spec with d={d} for n={n}")
        return spec
    raise InvalidSpecError(f"no valid general construction found for n={n}")


def example2(theta: float) -> GeneralConstructionSpec:
    """Y_1 = X_1; (Y_2, Y_3) ordered by the travellers' rule below X_1"""
    return GeneralConstructionSpec(
        n=3, fixed_values=[1], fixed_positions=[1],
        blocks=[SwitchingBlock(), SwitchingBlock(positions=[2, 3], values=[2, 3], theta=theta)],
    )


def example3(theta1: float, theta2: float) -> GeneralConstructionSpec:
    """Y_3 = X_3; {Y_1, Y_2} = {X_4, X_5} by theta1; {Y_4, Y_5} = {X_1, X_2} by theta2"""
    return GeneralConstructionSpec(
        n=5, fixed_values=[3], fixed_positions=[3],
        blocks=[SwitchingBlock(positions=[4, 5], values=[1, 2], theta=theta2),
                SwitchingBlock(positions=[1, 2], values=[4, 5], theta=theta1)],
    )


def example3_variant(theta1: float, theta2: float) -> GeneralConstructionSpec:
    """Y_2 = X_3; {Y_1, Y_4} = {X_4, X_5} by theta1; {Y_3, Y_5} = {X_1, X_2} by theta2"""
    return GeneralConstructionSpec(
        n=5, fixed_values=[3], fixed_positions=[2],
        blocks=[SwitchingBlock(positions=[3, 5], values=[1, 2], theta=theta2),
                SwitchingBlock(positions=[1, 4], values=[4, 5], theta=theta1)],
    )


def example4() -> RandomizedBlockSpec:
    """(Y_1, Y_2, Y_3) = (X_1, X_3, X_5); {Y_4, Y_5, Y_6} = {X_2, X_4, X_6} shuffled"""
    return RandomizedBlockSpec(
        n=6,
        fixed=[FixedAssignment(position=p, value=v) for p, v in ((1, 1), (2, 3), (3, 5))],
        blocks=[ShuffledBlock(positions=[4, 5, 6], values=[2, 4, 6])],
    )
