"""Offline knapsack machinery against hand-worked and exhaustive oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdsel.knapsack import (brute_force_bkp, density_greedy, density_order,
                               greedy_counts, greedy_counts_reference,
                               round_down, solve_fbkp)


class TestDensityOrder:
    def test_basic_order(self):
        # densities: 0.8, 0.3, 0.5 -> order 0, 2, 1
        order = density_order([0.8, 0.6, 0.5], [1.0, 2.0, 1.0])
        assert list(order.permutation) == [0, 2, 1]

    def test_density_tie_broken_by_cost(self):
        # equal densities 0.5; costs 2.0 vs 1.0 -> cheaper first
        order = density_order([1.0, 0.5], [2.0, 1.0])
        assert list(order.permutation) == [1, 0]

    def test_full_tie_broken_by_id(self):
        order = density_order([0.5, 0.5, 0.5], [1.0, 1.0, 1.0])
        assert list(order.permutation) == [0, 1, 2]

    def test_nonpositive_cost_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            density_order([1.0], [0.0])


class TestSolveFbkp:
    def test_worked_example_with_split(self):
        # densities 0.8, 0.6; fill x0 = 2 (cost 2), remainder 2.5 of worker 1
        frac = solve_fbkp([0.8, 0.6], [1.0, 1.0], [2, 3], 4.5)
        assert np.allclose(frac.counts, [2.0, 2.5])
        assert frac.split_worker == 1
        assert frac.value == pytest.approx(0.8 * 2 + 0.6 * 2.5)  # 3.1
        assert frac.cost == pytest.approx(4.5)

    def test_integral_remainder_has_no_split(self):
        # remainder 2/1 = 2 units of worker 1: exactly integral
        frac = solve_fbkp([0.8, 0.6], [1.0, 1.0], [2, 3], 4.0)
        assert np.allclose(frac.counts, [2.0, 2.0])
        assert frac.split_worker is None

    def test_budget_covers_everything(self):
        frac = solve_fbkp([0.8, 0.6], [1.0, 1.0], [2, 3], 50.0)
        assert np.allclose(frac.counts, [2.0, 3.0])
        assert frac.split_worker is None

    def test_zero_budget(self):
        frac = solve_fbkp([0.8, 0.6], [1.0, 1.0], [2, 3], 0.0)
        assert np.allclose(frac.counts, [0.0, 0.0])
        assert frac.value == 0.0

    def test_negative_budget_rejected(self):
        with pytest.raises(ValueError, match="budget"):
            solve_fbkp([0.5], [1.0], [1], -1.0)


class TestRoundDown:
    def test_floors_the_split_worker(self):
        frac = solve_fbkp([0.8, 0.6], [1.0, 1.0], [2, 3], 4.5)
        alloc = round_down(frac, [0.8, 0.6], [1.0, 1.0])
        assert np.array_equal(alloc.counts, [2, 2])
        assert alloc.expected_value == pytest.approx(2.8)
        assert alloc.total_cost == pytest.approx(4.0)


class TestBruteForce:
    def test_hand_optimum(self):
        # feasible maxima: (0,2) value 1.6 vs (1,0) value 0.9
        alloc = brute_force_bkp([0.9, 0.8], [3.0, 2.0], [1, 2], 4.0)
        assert np.array_equal(alloc.counts, [0, 2])
        assert alloc.expected_value == pytest.approx(1.6)

    def test_tie_returns_lexicographically_smallest(self):
        # (1,0) and (0,1) both give value 0.5 at cost 1
        alloc = brute_force_bkp([0.5, 0.5], [1.0, 1.0], [1, 1], 1.0)
        assert np.array_equal(alloc.counts, [0, 1])

    def test_oversized_instance_rejected(self):
        caps = [100] * 8
        with pytest.raises(ValueError, match="too large"):
            brute_force_bkp([0.5] * 8, [1.0] * 8, caps, 10.0)


class TestGreedy:
    def test_strictly_suboptimal_case(self):
        # greedy takes the denser worker 0 (0.5/1) and starves worker 1;
        # the optimum is worker 1 alone (0.6 > 0.5)
        greedy = density_greedy([0.5, 0.6], [1.0, 2.0], [1, 1], 2.0)
        brute = brute_force_bkp([0.5, 0.6], [1.0, 2.0], [1, 1], 2.0)
        assert greedy.expected_value == pytest.approx(0.5)
        assert brute.expected_value == pytest.approx(0.6)
        assert greedy.expected_value >= 0.5 * brute.expected_value

    def test_restricted_ids(self):
        values = np.array([0.9, 0.8, 0.7])
        costs = np.array([1.0, 1.0, 1.0])
        caps = np.array([5, 5, 5])
        counts = greedy_counts(values, costs, caps, 3.0,
                               ids=np.array([1, 2]))
        assert np.array_equal(counts, [0, 3, 0])

    def test_empty_ids(self):
        counts = greedy_counts(np.array([0.5]), np.array([1.0]),
                               np.array([2]), 5.0, ids=np.array([], dtype=int))
        assert np.array_equal(counts, [0])


def random_bkp_instances(seed, trials, n_max=6, cap_max=3):
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        n = int(rng.integers(1, n_max + 1))
        values = rng.random(n)
        costs = rng.uniform(1.0, 3.0, n)
        caps = rng.integers(0, cap_max + 1, n)
        budget = float(rng.uniform(0.0, 1.2 * float(costs @ caps) + 1.0))
        yield values, costs, caps, budget


class TestAgainstExhaustiveOracle:
    def test_two_approximation_and_sandwich(self):
        for values, costs, caps, budget in random_bkp_instances(11, 200):
            brute = brute_force_bkp(values, costs, caps, budget)
            greedy = density_greedy(values, costs, caps, budget)
            frac = solve_fbkp(values, costs, caps, budget)
            floor = round_down(frac, values, costs)
            split = (values[frac.split_worker]
                     if frac.split_worker is not None else 0.0)
            assert greedy.expected_value >= 0.5 * brute.expected_value - 1e-9
            assert floor.expected_value <= brute.expected_value + 1e-9
            assert brute.expected_value <= frac.value + 1e-9
            assert frac.value <= floor.expected_value + split + 1e-9

    def test_feasibility(self):
        for values, costs, caps, budget in random_bkp_instances(13, 200):
            for alloc in (density_greedy(values, costs, caps, budget),
                          brute_force_bkp(values, costs, caps, budget)):
                assert alloc.total_cost <= budget + 1e-9
                assert np.all(alloc.counts >= 0)
                assert np.all(alloc.counts <= caps)
            frac = solve_fbkp(values, costs, caps, budget)
            assert frac.cost <= budget + 1e-9
            assert np.all(frac.counts <= caps + 1e-12)


class TestFastGreedyEquivalence:
    def test_matches_reference_exactly(self):
        rng = np.random.default_rng(29)
        for _ in range(400):
            n = int(rng.integers(1, 300))
            values = rng.uniform(0.0, 1.5, n)
            if rng.random() < 0.3:
                values[rng.random(n) < 0.3] = 0.0
            costs = rng.uniform(0.5, 2.0, n)
            caps = rng.integers(0, 12, n)
            budget = float(rng.uniform(0.0, 1.2 * float(costs @ caps) + 1.0))
            ids = None
            if rng.random() < 0.5:
                k = int(rng.integers(0, n + 1))
                ids = np.sort(rng.choice(n, size=k, replace=False))
            hint = int(rng.integers(1, 64))
            fast = greedy_counts(values, costs, caps, budget, ids=ids,
                                 hint=hint)
            slow = greedy_counts_reference(values, costs, caps, budget,
                                           ids=ids)
            assert np.array_equal(fast, slow)

    def test_matches_reference_with_heavy_ties(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            n = int(rng.integers(2, 100))
            # few distinct densities -> many exact ties across the prefix cut
            values = rng.choice([0.2, 0.4, 0.8], n)
            costs = rng.choice([1.0, 2.0], n)
            caps = rng.integers(0, 5, n)
            budget = float(rng.uniform(0.0, float(costs @ caps)))
            fast = greedy_counts(values, costs, caps, budget, hint=2)
            slow = greedy_counts_reference(values, costs, caps, budget)
            assert np.array_equal(fast, slow)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_greedy_never_overspends(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 50))
    values = rng.random(n)
    costs = rng.uniform(0.5, 2.0, n)
    caps = rng.integers(0, 10, n)
    budget = float(rng.uniform(0.0, 40.0))
    counts = greedy_counts(values, costs, caps, budget)
    assert float(costs @ counts) <= budget + 1e-9
    assert np.all(counts <= caps)
