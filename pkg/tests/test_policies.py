"""Policy behaviour: feasibility, determinism, planning, degeneration."""

import numpy as np
import pytest

from crowdsel.environment import CoordinateMeanMap, RewardModel, gen_synthetic
from crowdsel.evaluation import run_episode
from crowdsel.knapsack import greedy_counts
from crowdsel.policies import (POLICY_NAMES, CawsPolicy, EpsilonFirstPolicy,
                               make_policy)


def small_instance(n=40, budget=25.0, seed=1):
    return gen_synthetic(n, 2, (1.0, 1.5), (2, 5), CoordinateMeanMap(2),
                         seed=seed, budget=budget)


def run_one(name, inst, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    policy = make_policy(name, inst, inst.budget, rng, **kwargs)
    return run_episode(inst, policy, RewardModel(), rng)


class TestFeasibility:
    @pytest.mark.parametrize("name", POLICY_NAMES)
    def test_never_overspends_or_oversamples(self, name):
        inst = small_instance()
        result = run_one(name, inst)
        assert result.budget_spent <= inst.budget + 1e-9
        assert np.all(result.final_counts <= inst.capacities)
        assert result.iterations == result.final_counts.sum()

    @pytest.mark.parametrize("name", POLICY_NAMES)
    def test_stops_only_when_nothing_affordable(self, name):
        inst = small_instance()
        result = run_one(name, inst)
        leftover = inst.budget - result.budget_spent
        available = result.final_counts < inst.capacities
        assert not np.any(available & (inst.costs <= leftover - 1e-9))


class TestDeterminism:
    @pytest.mark.parametrize("name", POLICY_NAMES)
    def test_same_seed_same_steps(self, name):
        inst = small_instance()
        assert run_one(name, inst, seed=5).steps == \
            run_one(name, inst, seed=5).steps


class TestOracle:
    def test_replays_the_greedy_plan(self):
        inst = small_instance(budget=15.0)
        planned = greedy_counts(inst.true_means, inst.costs,
                                inst.capacities, inst.budget)
        result = run_one("oracle", inst)
        assert np.array_equal(result.final_counts, planned)
        assert result.expected_revenue == pytest.approx(
            float(inst.true_means @ planned))


class TestEpsilonFirst:
    def test_exploration_spend_is_capped(self):
        inst = small_instance(budget=30.0)
        rng = np.random.default_rng(3)
        policy = make_policy("epsilon_first", inst, inst.budget, rng,
                             epsilon=0.2)
        run_episode(inst, policy, RewardModel(), rng)
        assert policy.explore_spent <= 0.2 * inst.budget + 1e-9

    def test_bad_epsilon_rejected(self):
        inst = small_instance()
        with pytest.raises(ValueError, match="epsilon"):
            EpsilonFirstPolicy(inst.view(), inst.budget,
                               np.random.default_rng(0), epsilon=1.5)


class TestCaws:
    def test_init_sweep_covers_cells_before_repeats(self):
        inst = small_instance(n=60, budget=200.0)
        rng = np.random.default_rng(9)
        policy = CawsPolicy(inst.view(), inst.budget, rng, granularity=3)
        occupied = len(set(policy.cell_of.tolist()))
        cells = []
        for t in range(1, occupied + 1):
            w = policy.select(t)
            cells.append(policy.cell_of_worker(w))
            policy.observe(w, 0.5)
        # the first pass touches every occupied cell exactly once
        assert len(set(cells)) == occupied

    def test_singleton_partition_is_per_worker(self):
        inst = small_instance(n=15)
        policy = CawsPolicy(inst.view(), inst.budget,
                            np.random.default_rng(0),
                            granularity="singleton")
        assert policy.grid is None
        assert policy.n_cells == 15
        assert np.array_equal(policy.cell_of, np.arange(15))

    def test_fast_and_reference_subroutines_agree_mid_episode(self):
        inst = small_instance(n=80, budget=60.0)
        rng = np.random.default_rng(21)
        policy = make_policy("caws", inst, inst.budget, rng)
        model = RewardModel()
        t = 1
        while policy.can_continue():
            if t % 7 == 0:
                fast = policy.subroutine_weights(t, fast=True)
                slow = policy.subroutine_weights(t, fast=False)
                assert np.array_equal(fast, slow)
            w = policy.select(t)
            policy.observe(w, model.draw(float(inst.true_means[w]), rng))
            t += 1

    def test_can_continue_tracks_cheapest_available(self):
        inst = small_instance(n=10, budget=1000.0)
        rng = np.random.default_rng(4)
        policy = make_policy("caws", inst, inst.budget, rng)
        policy.residual_budget = float(inst.costs.min()) - 1e-6
        assert not policy.can_continue()
        policy.residual_budget = float(inst.costs.min())
        assert policy.can_continue()
        policy.residual_capacities[:] = 0
        assert not policy.can_continue()

    def test_bkube_equals_singleton_caws(self):
        inst = small_instance(n=30, budget=40.0)
        a = run_one("bkube", inst, seed=11)
        rng = np.random.default_rng(11)
        policy = CawsPolicy(inst.view(), inst.budget, rng,
                            granularity="singleton")
        b = run_episode(inst, policy, RewardModel(), rng)
        assert a.steps == b.steps


class TestFactory:
    def test_unknown_name_rejected(self):
        inst = small_instance()
        with pytest.raises(ValueError, match="unknown policy"):
            make_policy("ucb1", inst, inst.budget, np.random.default_rng(0))
