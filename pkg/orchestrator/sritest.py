"""Strong rank independence tester.

For each tested k the trials are cross-tabulated as (cell holding
(Y_1, ..., Y_{k-1})) x R_k and checked for homogeneity with Pearson's
chi-square. Independence for every k means the rows share one rank law p_k.
"""

from itertools import product
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.stats import chi2_contingency

from core.directing import filtration_set, v_shape
from core.errors import PartitionError, UnderpoweredError
from orchestrator.trial_runner import TrialRunner
from schemas.experiment import PartitionConfig
from schemas.rearrangement import BinarySpec, TravellersSpec
from schemas.report import ChiSquareResult, ContingencyTable, RankTestResult, SriReport

MIN_TRIALS_PER_CELL_RANK = 10
DYADIC_MAX_AXES = 3
VOLUME_TOLERANCE = 1e-12


class ConditioningPartition(BaseModel):
    """Axis-aligned boxes partitioning [0, 1]^(k-1); a box is one (lo, hi) per coordinate"""

    model_config = ConfigDict(frozen=True)

    k: int
    cells: List[Tuple[Tuple[float, float], ...]]
    labels: List[str] = []

    @model_validator(mode="after")
    def _validate(self) -> "ConditioningPartition":
        if self.k < 2:
            raise PartitionError("conditioning needs k >= 2")
        if not self.cells:
            raise PartitionError("a partition needs at least one cell")
        if self.labels and len(self.labels) != len(self.cells):
            raise PartitionError("one label per cell is required")
        for box in self.cells:
            if len(box) != self.k - 1:
                raise PartitionError(f"box {box} does not have {self.k - 1} sides")
            if any(not 0 <= lo <= hi <= 1 for lo, hi in box):
                raise PartitionError(f"box {box} leaves [0, 1]")
        for i, first in enumerate(self.cells):
            for second in self.cells[i + 1:]:
                if _overlap_volume(first, second) > VOLUME_TOLERANCE:
                    raise PartitionError(f"boxes {first} and {second} overlap")
        covered = sum(_volume(box) for box in self.cells)
        if abs(covered - 1.0) > VOLUME_TOLERANCE:
            raise PartitionError(f"boxes cover volume {covered}, not 1")
        return self

    @property
    def names(self) -> List[str]:
        return self.labels or [f"cell{i}" for i in range(len(self.cells))]

    def assign(self, points: np.ndarray) -> np.ndarray:
        """Index of the box holding each row; sides are half-open except at 1"""
        points = np.atleast_2d(points)
        index = np.full(points.shape[0], -1, dtype=np.int64)
        for i, box in enumerate(self.cells):
            inside = np.ones(points.shape[0], dtype=bool)
            for axis, (lo, hi) in enumerate(box):
                column = points[:, axis]
                upper = column <= hi if hi == 1 else column < hi
                inside &= (column >= lo) & upper
            index[(index < 0) & inside] = i
        if np.any(index < 0):
            raise PartitionError(f"{int((index < 0).sum())} points fall outside every box")
        return index


def _volume(box) -> float:
    return float(np.prod([hi - lo for lo, hi in box]))


def _overlap_volume(first, second) -> float:
    sides = [max(0.0, min(b, d) - max(a, c)) for (a, b), (c, d) in zip(first, second)]
    return float(np.prod(sides))


def dyadic_partition(k: int, axes: Optional[int] = None) -> ConditioningPartition:
    """2^a boxes halving the first a = min(k - 1, 3) coordinates"""
    axes = min(k - 1, DYADIC_MAX_AXES) if axes is None else axes
    if not 1 <= axes <= k - 1:
        raise PartitionError(f"cannot halve {axes} of {k - 1} coordinates")
    halves = ((0.0, 0.5), (0.5, 1.0))
    cells, labels = [], []
    for choice in product((0, 1), repeat=axes):
        box = tuple(halves[c] for c in choice) + ((0.0, 1.0),) * (k - 1 - axes)
        cells.append(box)
        labels.append("|".join(f"y{i + 1}:{'hi' if c else 'lo'}" for i, c in enumerate(choice)))
    return ConditioningPartition(k=k, cells=cells, labels=labels)


def sublevel_partition(k: int, theta: float, c: float) -> ConditioningPartition:
    """Split Y_{k-1} into I_1, I_2 = {f_theta <= c} and I_3"""
    level = filtration_set(v_shape(theta), c)
    if len(level.intervals) > 1:
        raise PartitionError(f"sublevel set at c={c} is not a single interval")
    if level.intervals:
        lo, hi = (float(v) for v in level.intervals[0])
    else:
        # c = 0: I_2 is the single point theta and only I_1, I_3 remain
        lo = hi = float(theta)
    free = ((0.0, 1.0),) * (k - 2)
    pieces = [("I1", (0.0, lo)), ("I2", (lo, hi)), ("I3", (hi, 1.0))]
    pieces = [(name, side) for name, side in pieces if side[1] > side[0]]
    return ConditioningPartition(k=k, cells=[free + (side,) for _, side in pieces],
                                 labels=[name for name, _ in pieces])


def partition_from_config(config: PartitionConfig, k: int) -> ConditioningPartition:
    if config.kind == "dyadic":
        return dyadic_partition(k)
    if config.kind == "sublevel":
        if config.theta is None or config.c is None:
            raise PartitionError("sublevel partitions need theta and c")
        return sublevel_partition(k, config.theta, config.c)
    return ConditioningPartition(k=k, cells=[tuple(tuple(side) for side in box) for box in config.boxes])


def pearson_homogeneity(counts: np.ndarray, cells: List[str], ranks: List[int]) -> ChiSquareResult:
    """Pearson chi-square across rows, after dropping empty rows and zero rank columns"""
    counts = np.asarray(counts, dtype=np.int64)
    keep_cols = counts.sum(axis=0) > 0
    keep_rows = counts.sum(axis=1) > 0
    dropped_ranks = [r for r, keep in zip(ranks, keep_cols) if not keep]
    dropped_cells = [name for name, keep in zip(cells, keep_rows) if not keep]
    if dropped_cells:
        logger.warning(f"dropping empty cells {dropped_cells}")
    if dropped_ranks:
        logger.debug(f"dropping never-observed ranks {dropped_ranks}")
    reduced = counts[keep_rows][:, keep_cols]
    if reduced.shape[0] < 2 or reduced.shape[1] < 2:
        return ChiSquareResult(statistic=0.0, dof=0, p_value=1.0,
                               dropped_ranks=dropped_ranks, dropped_cells=dropped_cells)
    statistic, p_value, dof, _ = chi2_contingency(reduced, correction=False)
    return ChiSquareResult(statistic=float(statistic), dof=int(dof), p_value=float(p_value),
                           dropped_ranks=dropped_ranks, dropped_cells=dropped_cells)


def check_power(trials: int, partitions: Dict[int, ConditioningPartition]) -> None:
    """Raise UnderpoweredError unless trials >= 10 * cells * k for every tested k"""
    for k, partition in sorted(partitions.items()):
        needed = MIN_TRIALS_PER_CELL_RANK * len(partition.cells) * k
        if trials < needed:
            logger.error(f"k={k} needs {needed} trials, got {trials}")
            raise UnderpoweredError(f"k={k} with {len(partition.cells)} cells needs at least "
                                    f"{needed} trials, got {trials}")


def _rank_result(k: int, counts: np.ndarray, partition: ConditioningPartition,
                 alpha: float) -> RankTestResult:
    ranks = list(range(1, k + 1))
    table = ContingencyTable(k=k, cells=partition.names, ranks=ranks, counts=counts.tolist())
    chi = pearson_homogeneity(counts, partition.names, ranks)
    marginal = counts.sum(axis=0)
    total = int(marginal.sum())
    p_hat = {r: float(c) / total for r, c in zip(ranks, marginal)}
    cell_p_hat = {}
    for name, row in zip(partition.names, counts):
        if row.sum() > 0:
            cell_p_hat[name] = {r: float(c) / float(row.sum()) for r, c in zip(ranks, row)}
    passed = chi.p_value >= alpha
    logger.info(f"k={k}: chi2={chi.statistic:.4f} dof={chi.dof} p={chi.p_value:.4g} "
                f"-> {'pass' if passed else 'fail'}")
    return RankTestResult(k=k, p_hat=p_hat, cell_p_hat=cell_p_hat, chi_square=chi,
                          alpha=alpha, passed=passed, table=table)


def default_partitions(n: int, ks: Optional[List[int]] = None) -> Dict[int, ConditioningPartition]:
    return {k: dyadic_partition(k) for k in (ks or range(2, n + 1))}


def _supports_extreme_check(spec) -> bool:
    return isinstance(spec, (TravellersSpec, BinarySpec)) and spec.n >= 3


def _with_extreme_check(result: RankTestResult) -> RankTestResult:
    """Attach the extreme-rank verdict to a binary rank test"""
    extreme = _extreme_table(result)
    contradiction = result.passed and not extreme
    if contradiction:
        logger.error(f"R_{result.k} passed independence but took interior values")
    return result.model_copy(update={"extreme_ranks_only": extreme,
                                     "extreme_rank_contradiction": contradiction})


def run_sri_test(spec, partitions: Optional[Dict[int, ConditioningPartition]] = None,
                 trials: int = 1_000_000, alpha: float = 0.01, master_seed: int = 0,
                 workers: int = 1) -> SriReport:
    """Test R_k against (Y_1, ..., Y_{k-1}) for every k in 2..n, Bonferroni-corrected"""
    partitions = partitions or default_partitions(spec.n)
    for k, partition in partitions.items():
        if partition.k != k or not 2 <= k <= spec.n:
            raise PartitionError(f"partition for k={k} does not fit n={spec.n}")
    check_power(trials, partitions)
    tests = max(1, len(partitions))
    alpha_per_test = alpha / tests

    runner = TrialRunner(spec, master_seed, trials, workers=workers)
    tables = runner.count_tables(partitions)
    results = {k: _rank_result(k, tables[k], partitions[k], alpha_per_test) for k in sorted(tables)}
    binary = _supports_extreme_check(spec)
    if binary:
        results = {k: _with_extreme_check(result) for k, result in results.items()}
    report = SriReport(spec_kind=spec.kind, n=spec.n, trials=trials, seed=master_seed,
                       alpha=alpha, alpha_per_test=alpha_per_test, results=results,
                       passed=all(r.passed for r in results.values()))
    if binary:
        extreme = extreme_rank_check(report)
        contradiction = any(r.extreme_rank_contradiction for r in results.values())
        report = report.model_copy(update={"extreme_ranks_only": extreme,
                                           "extreme_rank_contradiction": contradiction})
    logger.info(f"SRI test for '{spec.kind}' with n={spec.n}: {'pass' if report.passed else 'fail'}")
    return report


def run_single_rank_test(spec, k: int, partition: Optional[ConditioningPartition] = None,
                         trials: int = 1_000_000, alpha: float = 0.01, master_seed: int = 0,
                         workers: int = 1) -> RankTestResult:
    """Test R_k alone against (Y_1, ..., Y_{k-1}) at level alpha"""
    if not 2 <= k <= spec.n:
        raise PartitionError(f"k={k} is outside 2..{spec.n}")
    partition = partition or dyadic_partition(k)
    if partition.k != k:
        raise PartitionError(f"partition is for k={partition.k}, not k={k}")
    check_power(trials, {k: partition})
    runner = TrialRunner(spec, master_seed, trials, workers=workers)
    result = _rank_result(k, runner.count_tables({k: partition})[k], partition, alpha)
    if _supports_extreme_check(spec):
        result = _with_extreme_check(result)
    return result


def _extreme_table(result: RankTestResult) -> bool:
    totals = np.asarray(result.table.counts).sum(axis=0)
    return all(c == 0 for r, c in zip(result.table.ranks, totals) if r not in (1, result.k))


def extreme_rank_check(source) -> bool:
    """True when no observed R_k leaves {1, k}.

    ``source`` is an SriReport, a single RankTestResult or a (trials, n) array of ranks.
    """
    if isinstance(source, SriReport):
        return all(_extreme_table(result) for result in source.results.values())
    if isinstance(source, RankTestResult):
        return _extreme_table(source)
    ranks = np.atleast_2d(np.asarray(source))
    k = np.arange(1, ranks.shape[1] + 1)[None, :]
    return bool(np.all((ranks == 1) | (ranks == k)))


def compare_reports(first: SriReport, second: SriReport) -> Dict[int, Dict[str, object]]:
    """Side-by-side rank-law estimates of two reports and their largest gap per k"""
    comparison: Dict[int, Dict[str, object]] = {}
    for k in sorted(set(first.p_hat) | set(second.p_hat)):
        a, b = first.p_hat.get(k, {}), second.p_hat.get(k, {})
        ranks = sorted(set(a) | set(b))
        pairs = {r: (a.get(r, 0.0), b.get(r, 0.0)) for r in ranks}
        comparison[k] = {"p_hat": pairs,
                         "max_gap": max((abs(x - y) for x, y in pairs.values()), default=0.0)}
    return comparison
