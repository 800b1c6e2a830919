#!/usr/bin/env python3
"""
Tests for interval sets, uniform point processes and order-statistic tails
"""

import os
import sys
from fractions import Fraction as F
from itertools import permutations
from math import comb, sqrt

import numpy as np
import pytest
from scipy.stats import chi2_contingency, kstest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.errors import ConditioningError, PartitionError
from core.pointprocess import (
    IntervalSet,
    check_partition,
    compositions,
    count_in,
    multinomial_pmf,
    order_statistic_leading_term,
    order_statistic_tail,
    restrict_process,
    sample_conditioned,
    sample_point_process,
    symmetric_difference_measure,
)
from core.streams import substream


def cells(*cuts):
    """Partition of [0, 1] into consecutive intervals at the given cuts"""
    edges = [F(0)] + [F(c) for c in cuts] + [F(1)]
    return [IntervalSet.of((a, b)) for a, b in zip(edges, edges[1:])]


def histogram(points, support, bins=4):
    """Counts of pooled points in equal-width bins spanning the support's hull"""
    lo, hi = float(support.intervals[0][0]), float(support.intervals[-1][1])
    return np.histogram(np.ravel(points), bins=bins, range=(lo, hi))[0]


def same_law(first, second, support):
    """Two-sample chi-square on 4-bin histograms, alpha = 0.01"""
    table = np.array([histogram(first, support), histogram(second, support)])
    table = table[:, table.sum(axis=0) > 0]
    return chi2_contingency(table, correction=False)[1] >= 0.01


class TestIntervalSet:
    def test_normalizes_and_merges(self):
        s = IntervalSet.of(("1/2", "3/4"), (0, "1/4"), ("1/4", "1/3"))
        assert s.intervals == ((0, F(1, 3)), (F(1, 2), F(3, 4)))
        assert s.measure() == F(7, 12)

    def test_algebra(self):
        a = IntervalSet.of((0, "1/2"))
        b = IntervalSet.of(("1/4", "3/4"))
        assert a.intersect(b).intervals == ((F(1, 4), F(1, 2)),)
        assert a.union(b).measure() == F(3, 4)
        assert a.complement().intervals == ((F(1, 2), F(1)),)
        assert a.symmetric_difference(b).measure() == F(1, 2)
        assert symmetric_difference_measure(a, a) == 0

    def test_contains_is_vectorized(self):
        s = IntervalSet.of((0, "1/4"), ("1/2", 1))
        assert s.contains(np.array([0.1, 0.3, 0.75])).tolist() == [True, False, True]

    def test_sample_stays_inside(self):
        s = IntervalSet.of(("1/10", "2/10"), ("7/10", "9/10"))
        points = s.sample_many(1000, 3, substream(1, 0))
        assert s.contains(points).all()

    def test_rejects_bad_intervals(self):
        with pytest.raises(ValueError):
            IntervalSet.of(("1/2", "1/4"))

    def test_partition_check(self):
        check_partition(cells("1/3", "2/3"))
        with pytest.raises(PartitionError):
            check_partition([IntervalSet.of((0, "2/3")), IntervalSet.of(("1/3", 1))])
        with pytest.raises(PartitionError):
            check_partition([IntervalSet.of((0, "1/3"))])


class TestMultinomial:
    def test_compositions_count(self):
        for m in range(5):
            for k in range(1, 4):
                assert len(list(compositions(m, k))) == comb(m + k - 1, k - 1)

    @pytest.mark.parametrize("m", range(0, 7))
    @pytest.mark.parametrize("k", range(1, 5))
    def test_pmf_sums_to_one(self, m, k):
        partition = cells(*[F(i, k + 1) for i in range(1, k)])
        support = IntervalSet.of((0, "1/2"), ("3/5", 1))
        total = sum(multinomial_pmf(m, support, partition, counts) for counts in compositions(m, k))
        assert total == 1

    def test_pmf_value(self):
        # three points on [0, 1], one in [0, 1/3]
        p = multinomial_pmf(3, IntervalSet.unit(), cells("1/3"), (1, 2))
        assert p == 3 * F(1, 3) * F(2, 3) ** 2

    def test_sampler_matches_pmf(self):
        m, trials = 3, 200_000
        partition = cells("1/3")
        points = IntervalSet.unit().sample_many(trials, m, substream(99, 0))
        inside = count_in(points, partition[0])
        for i in range(m + 1):
            p = float(multinomial_pmf(m, IntervalSet.unit(), partition, (i, m - i)))
            observed = float(np.mean(inside == i))
            assert abs(observed - p) <= 4 * sqrt(p * (1 - p) / trials)

    def test_pmf_is_exchangeable(self):
        partition = cells("1/5", "1/2", "4/5")
        support = IntervalSet.of((0, "1/3"), ("1/2", "9/10"))
        counts = (2, 0, 1, 1)
        base = multinomial_pmf(4, support, partition, counts)
        for order in permutations(range(4)):
            shuffled = [partition[i] for i in order]
            assert multinomial_pmf(4, support, shuffled, [counts[i] for i in order]) == base

    def test_two_interval_support_splits_evenly(self):
        support = IntervalSet.of((0, "1/4"), ("3/4", 1))
        points = support.sample_many(250_000, 4, substream(5, 0))
        share = float(np.mean(points <= 0.25))
        assert abs(share - 0.5) <= 4 * sqrt(0.25 / 1_000_000)

    def test_shrinking_supports_converge(self):
        # B_i = [0, 1/2 + d] decreases to B = [0, 1/2]
        m, trials = 2, 100_000
        unit = IntervalSet.unit()
        limit = histogram(IntervalSet.of((0, "1/2")).sample_many(trials, m, substream(6, 0)), unit)
        limit = limit / limit.sum()
        distances = []
        for index, d in enumerate(("1/5", "1/20", "1/1000")):
            shrunk = IntervalSet.of((0, F(1, 2) + F(d)))
            counts = histogram(shrunk.sample_many(trials, m, substream(6, index + 1)), unit)
            distances.append(float(np.abs(counts / counts.sum() - limit).max()))
        assert distances[0] > distances[1] > distances[2]
        assert distances[2] <= 5 / sqrt(m * trials)

    def test_single_process_draw(self):
        points = sample_point_process(4, IntervalSet.of(("1/2", 1)), substream(3, 0))
        assert points.shape == (4,)
        assert (points >= 0.5).all()


class TestConditioning:
    def test_restriction(self):
        remaining, support = restrict_process(4, IntervalSet.unit(), IntervalSet.of((0, "1/2")), 1)
        assert remaining == 3
        assert support.intervals == ((F(1, 2), F(1)),)

    @pytest.mark.parametrize("observed", [0, 1, 2])
    def test_restricted_points_match_direct_sampling(self, observed):
        m, trials = 4, 100_000
        B, A1 = IntervalSet.unit(), IntervalSet.of((0, "3/10"))
        draws = sample_conditioned(m, B, A1, observed, trials, substream(10, observed))
        in_a2 = draws[~A1.contains(draws)]
        remaining, support = restrict_process(m, B, A1, observed)
        assert len(in_a2) == remaining * trials
        direct = support.sample_many(trials, remaining, substream(11, observed))
        assert same_law(in_a2, direct, support)

    def test_conditioning_on_all_points_in_subset(self):
        # N_{m,B} given N(B') = m is N_{m,B'}
        m, trials = 2, 50_000
        inner = IntervalSet.of(("1/5", "7/10"))
        draws = sample_conditioned(m, IntervalSet.unit(), inner, m, trials, substream(12, 0))
        assert inner.contains(draws).all()
        direct = inner.sample_many(trials, m, substream(12, 1))
        assert same_law(draws, direct, inner)

    def test_points_outside_conditioning_set_are_uniform(self):
        A = IntervalSet.of((0, "1/2"))
        draws = sample_conditioned(3, IntervalSet.unit(), A, 1, 20_000, substream(8, 0))
        assert draws.shape == (20_000, 3)
        assert (count_in(draws, A) == 1).all()
        outside = draws[~A.contains(draws)]
        assert len(outside) == 40_000
        assert kstest((outside - 0.5) / 0.5, "uniform").pvalue > 0.001

    def test_conditioned_counts_inside_subcell(self):
        # given N([0, 1/2]) = 2, the count in [0, 1/4] is Bin(2, 1/2)
        A, sub = IntervalSet.of((0, "1/2")), IntervalSet.of((0, "1/4"))
        trials = 50_000
        draws = sample_conditioned(3, IntervalSet.unit(), A, 2, trials, substream(9, 0))
        inner = count_in(draws, sub)
        for i, p in enumerate((0.25, 0.5, 0.25)):
            assert abs(np.mean(inner == i) - p) <= 4 * sqrt(p * (1 - p) / trials)

    def test_impossible_condition_gives_up(self):
        with pytest.raises(ConditioningError):
            sample_conditioned(2, IntervalSet.unit(), IntervalSet.of((0, "1/2")), 3, 10,
                               substream(0, 0), max_attempts=5_000)


class TestOrderStatistics:
    def test_tail_against_monte_carlo(self):
        n, r, y, trials = 5, 2, 0.9, 200_000
        exact = order_statistic_tail(n, r, y)
        assert exact == pytest.approx(1 - 0.9 ** 5 - 5 * 0.1 * 0.9 ** 4)
        x = np.sort(substream(17, 0).random((trials, n)), axis=1)[:, ::-1]
        observed = float(np.mean(x[:, r - 1] > y))
        assert abs(observed - exact) <= 4 * sqrt(exact * (1 - exact) / trials)

    def test_leading_term_dominates_near_one(self):
        tail = order_statistic_tail(5, 2, 0.999)
        lead = order_statistic_leading_term(5, 2, 0.999)
        assert tail == pytest.approx(lead, rel=0.01)
