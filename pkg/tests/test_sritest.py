#!/usr/bin/env python3
"""
Tests for the strong rank independence tester
"""

import os
import sys
from fractions import Fraction as F
from math import sqrt

import numpy as np
import pytest
from scipy.stats import chi2

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.directing import PiecewiseLinearFn, canonicalize, evaluate_many
from core.errors import PartitionError, UnderpoweredError
from core.rearrangements import example2, example3, example3_variant, example4, random_general_spec
from orchestrator.sritest import (
    ConditioningPartition,
    compare_reports,
    dyadic_partition,
    extreme_rank_check,
    partition_from_config,
    pearson_homogeneity,
    run_single_rank_test,
    run_sri_test,
    sublevel_partition,
)
from orchestrator.trial_runner import TrialRunner
from schemas.experiment import PartitionConfig
from schemas.rearrangement import BinarySpec, ConstantSpec, TravellersSpec, TrivialSpec


def four_sigma(p, trials):
    return 4 * sqrt(p * (1 - p) / trials)


def binary_rank_three_conditionals(f, grid=64):
    """P(R_3 = 2 | half of Y_1, half of Y_2) by midpoint integration over [0, 1]^3.

    Y is x reordered by increasing f; every grid triple carries equal weight.
    """
    u = (np.arange(grid) + 0.381966) / grid
    x = np.stack(np.meshgrid(u, u, u, indexing="ij"), axis=-1).reshape(-1, 3)
    fx = evaluate_many(f, x)
    keep = np.all(np.abs(fx[:, [0, 0, 1]] - fx[:, [1, 2, 2]]) > 1e-12, axis=1)
    x, fx = x[keep], fx[keep]
    y = np.take_along_axis(x, np.argsort(fx, axis=1), axis=1)
    rank_two = (y[:, 0] > y[:, 2]) != (y[:, 1] > y[:, 2])
    out = {}
    for lo1 in (True, False):
        for lo2 in (True, False):
            cell = ((y[:, 0] < 0.5) == lo1) & ((y[:, 1] < 0.5) == lo2)
            label = f"y1:{'lo' if lo1 else 'hi'}|y2:{'lo' if lo2 else 'hi'}"
            out[label] = float(rank_two[cell].mean())
    return out


@pytest.fixture
def w_shape_spec():
    directing = PiecewiseLinearFn.of([0, F(1, 4), F(1, 2), F(3, 4), 1], [2, 0, 2, 0, 2])
    return BinarySpec(n=3, directing=directing)


class TestPartitions:
    def test_dyadic_cells(self):
        partition = dyadic_partition(5)
        assert len(partition.cells) == 8
        assert partition.names[0] == "y1:lo|y2:lo|y3:lo"
        assert partition.cells[0][3] == (0.0, 1.0)

    def test_assign_covers_the_cube(self):
        partition = dyadic_partition(3)
        points = np.array([[0.1, 0.2], [0.1, 0.9], [0.7, 0.2], [1.0, 1.0], [0.5, 0.5]])
        assert partition.assign(points).tolist() == [0, 1, 2, 3, 3]

    def test_sublevel_cells(self):
        partition = sublevel_partition(3, 0.5, 0.5)
        assert partition.names == ["I1", "I2", "I3"]
        assert [box[1] for box in partition.cells] == [(0.0, 0.25), (0.25, 0.75), (0.75, 1.0)]
        assert partition.cells[0][0] == (0.0, 1.0)

    def test_rejects_overlap_and_gaps(self):
        with pytest.raises(ValueError):
            ConditioningPartition(k=2, cells=[((0.0, 0.6),), ((0.4, 1.0),)])
        with pytest.raises(ValueError):
            ConditioningPartition(k=2, cells=[((0.0, 0.5),)])

    def test_sublevel_at_level_zero(self):
        partition = sublevel_partition(3, 0.5, 0.0)
        assert partition.names == ["I1", "I3"]
        assert [box[1] for box in partition.cells] == [(0.0, 0.5), (0.5, 1.0)]
        configured = partition_from_config(PartitionConfig(kind="sublevel", theta=0.3, c=0.0), 4)
        assert configured.names == ["I1", "I3"]
        assert configured.cells[0][2] == (0.0, 0.3)

    def test_partition_must_fit_spec(self):
        with pytest.raises(PartitionError):
            run_sri_test(TrivialSpec(n=3), {4: dyadic_partition(4)}, trials=1000, master_seed=0)


class TestPearson:
    def test_statistic_by_hand(self):
        counts = np.array([[30, 10], [20, 40]])
        result = pearson_homogeneity(counts, ["a", "b"], [1, 2])
        # expected counts: 20, 20 / 30, 30
        statistic = 10 ** 2 / 20 + 10 ** 2 / 20 + 10 ** 2 / 30 + 10 ** 2 / 30
        assert result.statistic == pytest.approx(statistic)
        assert result.dof == 1
        assert result.p_value == pytest.approx(chi2.sf(statistic, 1))

    def test_zero_columns_and_empty_cells_are_dropped(self):
        counts = np.array([[5, 0, 7], [0, 0, 0], [6, 0, 6]])
        result = pearson_homogeneity(counts, ["a", "b", "c"], [1, 2, 3])
        assert result.dropped_ranks == [2]
        assert result.dropped_cells == ["b"]
        assert result.dof == 1

    def test_single_rank_column_passes(self):
        result = pearson_homogeneity(np.array([[4, 0], [9, 0]]), ["a", "b"], [1, 2])
        assert result.dof == 0 and result.p_value == 1.0

    def test_p_value_matches_exact_tail_under_null(self):
        # two cells, equal rank laws: p-values must be close to uniform
        rng = np.random.default_rng(77)
        p_values = []
        for _ in range(2000):
            rows = rng.multinomial(100, [0.3, 0.7], size=2)
            p_values.append(pearson_homogeneity(rows, ["a", "b"], [1, 2]).p_value)
        assert abs(np.mean(np.array(p_values) < 0.05) - 0.05) <= 4 * sqrt(0.05 * 0.95 / 2000)


class TestSri:
    @pytest.mark.parametrize("theta", [0.25, 0.5, 0.8])
    def test_travellers_n5_pass(self, theta):
        trials = 1_000_000
        report = run_sri_test(TravellersSpec(n=5, theta=theta), trials=trials, alpha=0.01,
                              master_seed=13)
        assert report.passed
        for k in range(2, 6):
            assert abs(report.p_hat[k][1] - (1 - theta)) <= four_sigma(theta, trials)
            assert abs(report.p_hat[k][k] - theta) <= four_sigma(theta, trials)
        assert report.extreme_ranks_only is True

    def test_travellers_pass(self):
        trials = 400_000
        report = run_sri_test(TravellersSpec(n=4, theta=0.3), trials=trials, alpha=0.01, master_seed=1)
        assert report.passed
        assert report.alpha_per_test == pytest.approx(0.01 / 3)
        assert abs(report.p_hat[3][1] - 0.7) <= four_sigma(0.7, trials)
        assert report.p_hat[3][2] == 0
        assert abs(report.p_hat[3][3] - 0.3) <= four_sigma(0.3, trials)
        assert report.p_hat[1] == {1: 1.0}
        assert report.extreme_ranks_only is True
        assert report.extreme_rank_contradiction is False
        for k, estimate in report.p_hat.items():
            assert sum(estimate.values()) == pytest.approx(1, abs=1e-12)

    def test_trivial_fails(self):
        trials = 100_000
        result = run_single_rank_test(TrivialSpec(n=3), 2, dyadic_partition(2), trials=trials,
                                      alpha=0.01, master_seed=2)
        assert not result.passed
        assert result.chi_square.p_value < 1e-6
        lower, upper = result.cell_p_hat["y1:lo"][2], result.cell_p_hat["y1:hi"][2]
        assert abs(lower - 0.25) <= four_sigma(0.25, trials * 0.49)
        assert abs(upper - 0.75) <= four_sigma(0.75, trials * 0.49)

    def test_constant_passes_with_point_masses(self):
        report = run_sri_test(ConstantSpec(n=4, permutation=[2, 4, 1, 3]), trials=20_000, master_seed=3)
        assert report.passed
        assert report.p_hat[2] == {1: 0.0, 2: 1.0}
        assert report.p_hat[4][3] == 1.0

    def test_example4_rank4(self):
        trials = 100_000
        result = run_single_rank_test(example4(), 4, trials=trials, alpha=0.01, master_seed=4)
        assert result.passed
        for r in (2, 3, 4):
            assert abs(result.p_hat[r] - 1 / 3) <= four_sigma(1 / 3, trials)

    @pytest.mark.parametrize("spec", [example2(0.3), example3(0.4, 0.7), example3_variant(0.25, 0.6)])
    def test_general_examples_pass(self, spec):
        report = run_sri_test(spec, trials=200_000, master_seed=5)
        assert report.passed
        assert report.extreme_ranks_only is None

    def test_random_general_specs_pass(self):
        rng = np.random.default_rng(8)
        for index in range(5):
            spec = random_general_spec(int(rng.integers(3, 7)), rng)
            assert run_sri_test(spec, trials=100_000, master_seed=index).passed

    def test_sublevel_partition_on_travellers(self):
        partitions = {k: sublevel_partition(k, 0.4, 0.3) for k in range(2, 5)}
        report = run_sri_test(TravellersSpec(n=4, theta=0.4), partitions, trials=200_000, master_seed=6)
        assert report.passed

    def test_w_shape_gap_by_integration(self, w_shape_spec):
        f = canonicalize(w_shape_spec.directing)
        conditionals = binary_rank_three_conditionals(f)
        assert conditionals["y1:lo|y2:lo"] == 0.0
        assert conditionals["y1:hi|y2:hi"] == 0.0
        gap = conditionals["y1:lo|y2:hi"] - conditionals["y1:lo|y2:lo"]
        assert gap > 0.02

    def test_w_shape_fails_at_rank_three(self, w_shape_spec):
        result = run_single_rank_test(w_shape_spec, 3, trials=200_000, alpha=0.01, master_seed=7)
        assert not result.passed
        same_side = result.cell_p_hat["y1:lo|y2:lo"][2]
        split = result.cell_p_hat["y1:lo|y2:hi"][2]
        assert same_side == 0.0
        assert split > 0.02
        assert result.extreme_ranks_only is False
        assert result.extreme_rank_contradiction is False

    def test_underpowered(self):
        with pytest.raises(UnderpoweredError):
            run_sri_test(TravellersSpec(n=5, theta=0.5), trials=100, master_seed=0)


class TestExtremeRanks:
    def test_single_rank_travellers(self):
        result = run_single_rank_test(TravellersSpec(n=4, theta=0.4), 3, trials=50_000, master_seed=14)
        assert result.passed
        assert result.extreme_ranks_only is True
        assert result.extreme_rank_contradiction is False

    def test_single_rank_not_binary(self):
        result = run_single_rank_test(example4(), 4, trials=20_000, master_seed=15)
        assert result.extreme_ranks_only is None

    def test_travellers_n5(self):
        report = run_sri_test(TravellersSpec(n=5, theta=0.6), trials=100_000, master_seed=9)
        assert extreme_rank_check(report)

    def test_identity_order_is_extreme(self):
        runner = TrialRunner(ConstantSpec(n=4, permutation=[4, 3, 2, 1]), 0, 100)
        ranks = np.concatenate([batch.ranks for batch in runner.batches()])
        assert extreme_rank_check(ranks)

    def test_example2_has_interior_ranks_without_flag(self):
        report = run_sri_test(example2(0.5), trials=20_000, master_seed=10)
        assert not extreme_rank_check(report)
        assert report.extreme_rank_contradiction is False


class TestDeterminism:
    def test_same_report_for_any_worker_count(self):
        spec = TravellersSpec(n=4, theta=0.35)
        reports = [run_sri_test(spec, trials=30_000, master_seed=11, workers=w) for w in (1, 4, 8)]
        dumps = {r.model_dump_json() for r in reports}
        assert len(dumps) == 1

    def test_shorter_run_is_prefix_of_longer(self):
        spec = TravellersSpec(n=3, theta=0.5)
        short = TrialRunner(spec, 21, 9_000).records()
        long = TrialRunner(spec, 21, 20_000, workers=4).records()
        assert [r.model_dump() for r in short] == [r.model_dump() for r in long[:9_000]]

    def test_compare_reports(self):
        a = run_sri_test(TravellersSpec(n=3, theta=0.5), trials=20_000, master_seed=12)
        b = run_sri_test(ConstantSpec(n=3, permutation=[3, 2, 1]), trials=20_000, master_seed=12)
        comparison = compare_reports(a, b)
        assert comparison[1]["max_gap"] == 0.0
        assert comparison[3]["p_hat"][3][1] == 1.0
        assert comparison[3]["max_gap"] > 0.4
