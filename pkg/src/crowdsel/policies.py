"""Sequential worker-selection policies behind one interface.

Every policy sees a `PolicyView` (no true means), owns its residual budget
and residual capacities, and exposes:

    select(t)          -> worker id to recruit in iteration t
    observe(worker, r) -> consume the observed reward and charge the cost
    refresh_contexts(contexts) -> per-round context update (time-varying runs)

The context-partitioned policy ("caws") explores cells of a uniform context
grid once each, then repeatedly runs the density-ordered greedy scan over
optimistic cell indices and samples a worker proportionally to the greedy
weights. The per-worker bandit ("bkube") is the same machinery with one
cell per worker.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .knapsack import greedy_counts, greedy_counts_reference, _density_permutation
from .model import PolicyView, TaskInstance
from .partition import PartitionGrid, choose_granularity, ucb_indices

POLICY_NAMES = ("caws", "oracle", "epsilon_first", "bkube", "random")


class Policy:
    """Base: residual-state bookkeeping shared by all policies."""

    def __init__(self, view: PolicyView, budget: float, rng: np.random.Generator):
        self.view = view
        self.rng = rng
        self.residual_budget = float(budget)
        self.residual_capacities = view.capacities.astype(np.int64).copy()
        # cheapest available worker via a pointer over the cost order;
        # capacities never grow, so the pointer only advances
        self._cost_order = np.lexsort((np.arange(view.n_workers), view.costs))
        self._cheapest_pos = 0

    def can_continue(self) -> bool:
        """True while some available worker is affordable."""
        order = self._cost_order
        pos = self._cheapest_pos
        n = len(order)
        while pos < n and self.residual_capacities[order[pos]] == 0:
            pos += 1
        self._cheapest_pos = pos
        if pos == n:
            return False
        return float(self.view.costs[order[pos]]) <= self.residual_budget

    def _affordable_available(self) -> np.ndarray:
        return ((self.residual_capacities >= 1)
                & (self.view.costs <= self.residual_budget))

    def select(self, t: int) -> int:
        raise NotImplementedError

    def observe(self, worker: int, reward: float) -> None:
        self.residual_capacities[worker] -= 1
        self.residual_budget -= float(self.view.costs[worker])

    def refresh_contexts(self, contexts: np.ndarray) -> None:
        pass

    def cell_of_worker(self, worker: int) -> int:
        """Cell index logged for a selection; -1 when the policy has none."""
        return -1


class CawsPolicy(Policy):
    """Cell-level optimism with a density-ordered greedy selection rule.

    granularity: cells per axis; None derives it from the budget and the
    smoothness exponent; "singleton" gives every worker its own cell.
    """

    def __init__(self, view: PolicyView, budget: float, rng: np.random.Generator,
                 alpha: float = 1.0, granularity: int | str | None = None,
                 fast_subroutine: bool = True):
        super().__init__(view, budget, rng)
        self.alpha = float(alpha)
        self.fast_subroutine = fast_subroutine
        if granularity == "singleton":
            self.grid: Optional[PartitionGrid] = None
            self.n_cells = view.n_workers
            self.cell_of = np.arange(view.n_workers, dtype=np.int64)
        else:
            d = (int(granularity) if granularity is not None
                 else choose_granularity(max(budget, 1.0), self.alpha,
                                         view.dimension))
            self.grid = PartitionGrid(d=d, dimension=view.dimension)
            self.n_cells = self.grid.cube_count
            self.cell_of = self.grid.assign(view.contexts)
        self.pulls = np.zeros(self.n_cells, dtype=np.int64)
        self.means = np.zeros(self.n_cells, dtype=np.float64)
        self._cell_done = np.zeros(self.n_cells, dtype=bool)
        self._init_exhausted = False
        self._last_cell: int = -1
        self._hint = 32
        self._eligible_ids: Optional[np.ndarray] = None  # rebuilt lazily

    # -- initialization sweep -------------------------------------------

    def _init_cell(self) -> Optional[int]:
        """Lowest unvisited cell that currently holds an affordable,
        available worker; None once the sweep is over."""
        if self._init_exhausted:
            return None
        mask = self._affordable_available()
        cand = self.cell_of[mask]
        cand = cand[~self._cell_done[cand]]
        if cand.size == 0:
            # with static contexts nothing can become affordable later
            self._init_exhausted = True
            return None
        return int(cand.min())

    # -- greedy subroutine ------------------------------------------------

    def _eligible(self) -> np.ndarray:
        """Workers with residual capacity whose current cell has stats."""
        if self._eligible_ids is None:
            mask = ((self.residual_capacities >= 1)
                    & (self.pulls[self.cell_of] > 0))
            self._eligible_ids = np.flatnonzero(mask)
        return self._eligible_ids

    def subroutine_weights(self, t: int, fast: bool | None = None) -> np.ndarray:
        """Greedy weights over optimistic cell indices (integral, per worker)."""
        ids = self._eligible()
        values = ucb_indices(self.means, self.pulls, t)[self.cell_of]
        if fast is None:
            fast = self.fast_subroutine
        if fast:
            counts = greedy_counts(values, self.view.costs,
                                   self.residual_capacities,
                                   self.residual_budget, ids=ids,
                                   hint=self._hint)
        else:
            counts = greedy_counts_reference(values, self.view.costs,
                                             self.residual_capacities,
                                             self.residual_budget, ids=ids)
        return counts

    # -- policy interface --------------------------------------------------

    def select(self, t: int) -> int:
        cell = self._init_cell()
        if cell is not None:
            mask = self._affordable_available() & (self.cell_of == cell)
            members = np.flatnonzero(mask)
            worker = int(self.rng.choice(members))
            self._cell_done[cell] = True
        else:
            counts = self.subroutine_weights(t)
            support = np.flatnonzero(counts)
            if support.size == 0:
                # every affordable worker sits in a never-initialized cell
                members = np.flatnonzero(self._affordable_available())
                worker = int(self.rng.choice(members))
            else:
                self._hint = int(support.size) + 16
                weights = counts[support].astype(np.float64)
                worker = int(self.rng.choice(support, p=weights / weights.sum()))
        self._last_cell = int(self.cell_of[worker])
        return worker

    def observe(self, worker: int, reward: float) -> None:
        cell = int(self.cell_of[worker])
        first_pull = self.pulls[cell] == 0
        n = self.pulls[cell] + 1
        self.means[cell] = (self.means[cell] * self.pulls[cell] + reward) / n
        self.pulls[cell] = n
        super().observe(worker, reward)
        if first_pull:
            self._eligible_ids = None
        elif (self._eligible_ids is not None
              and self.residual_capacities[worker] == 0):
            keep = self._eligible_ids != worker
            self._eligible_ids = self._eligible_ids[keep]

    def refresh_contexts(self, contexts: np.ndarray) -> None:
        if self.grid is not None:
            self.cell_of = self.grid.assign(contexts)
            self._init_exhausted = False
            self._eligible_ids = None

    def cell_of_worker(self, worker: int) -> int:
        return int(self.cell_of[worker])


class EpsilonFirstPolicy(Policy):
    """Uniform exploration on an epsilon fraction of the budget, then greedy
    exploitation of the empirical means, re-planning when a plan runs out."""

    def __init__(self, view: PolicyView, budget: float, rng: np.random.Generator,
                 epsilon: float = 0.1):
        super().__init__(view, budget, rng)
        if not (0.0 < epsilon < 1.0):
            raise ValueError("epsilon must be in (0,1)")
        self.explore_budget = epsilon * budget
        self.explore_spent = 0.0
        self._exploring = True
        self.reward_sum = np.zeros(view.n_workers)
        self.pull_count = np.zeros(view.n_workers, dtype=np.int64)
        self._plan: list[list] = []  # [worker, remaining] in density order

    def _estimates(self) -> np.ndarray:
        est = np.zeros(self.view.n_workers)
        seen = self.pull_count > 0
        est[seen] = self.reward_sum[seen] / self.pull_count[seen]
        return est

    def _replan(self) -> None:
        est = self._estimates()
        counts = greedy_counts(est, self.view.costs, self.residual_capacities,
                               self.residual_budget)
        support = np.flatnonzero(counts)
        order = _density_permutation(est[support], self.view.costs[support],
                                     ids=support)
        self._plan = [[int(i), int(counts[i])] for i in order]

    def select(self, t: int) -> int:
        if self._exploring:
            remaining = self.explore_budget - self.explore_spent
            mask = ((self.residual_capacities >= 1)
                    & (self.view.costs <= min(self.residual_budget, remaining)))
            cand = np.flatnonzero(mask)
            if cand.size:
                return int(self.rng.choice(cand))
            self._exploring = False
        while self._plan and self._plan[0][1] == 0:
            self._plan.pop(0)
        if not self._plan:
            self._replan()
            while self._plan and self._plan[0][1] == 0:
                self._plan.pop(0)
            if not self._plan:
                raise RuntimeError("no affordable worker; caller must check "
                                   "can_continue() first")
        self._plan[0][1] -= 1
        return self._plan[0][0]

    def observe(self, worker: int, reward: float) -> None:
        self.reward_sum[worker] += reward
        self.pull_count[worker] += 1
        if self._exploring:
            self.explore_spent += float(self.view.costs[worker])
        super().observe(worker, reward)


class RandomPolicy(Policy):
    """Uniform over affordable available workers in every iteration."""

    def select(self, t: int) -> int:
        cand = np.flatnonzero(self._affordable_available())
        return int(self.rng.choice(cand))


class OraclePolicy(Policy):
    """Plans once with the true means and replays the plan in density order."""

    def __init__(self, instance: TaskInstance, budget: float,
                 rng: np.random.Generator):
        super().__init__(instance.view(), budget, rng)
        counts = greedy_counts(instance.true_means, instance.costs,
                               instance.capacities, budget)
        support = np.flatnonzero(counts)
        order = _density_permutation(instance.true_means[support],
                                     instance.costs[support], ids=support)
        self._plan = [[int(i), int(counts[i])] for i in order]
        self.plan_counts = counts

    def select(self, t: int) -> int:
        while self._plan and self._plan[0][1] == 0:
            self._plan.pop(0)
        if not self._plan:
            raise RuntimeError("plan exhausted; caller must check can_continue()")
        self._plan[0][1] -= 1
        return self._plan[0][0]


def caws_init(view: PolicyView, budget: float, rng: np.random.Generator,
              alpha: float = 1.0,
              granularity: int | str | None = None) -> CawsPolicy:
    return CawsPolicy(view, budget, rng, alpha=alpha, granularity=granularity)


def bkube_init(view: PolicyView, budget: float,
               rng: np.random.Generator) -> CawsPolicy:
    """Per-worker bandit: the cell policy with a one-worker-per-cell partition."""
    return CawsPolicy(view, budget, rng, granularity="singleton")


def epsilon_first_policy(view: PolicyView, budget: float,
                         rng: np.random.Generator,
                         epsilon: float = 0.1) -> EpsilonFirstPolicy:
    return EpsilonFirstPolicy(view, budget, rng, epsilon=epsilon)


def random_policy(view: PolicyView, budget: float,
                  rng: np.random.Generator) -> RandomPolicy:
    return RandomPolicy(view, budget, rng)


def oracle_policy(instance: TaskInstance, budget: float,
                  rng: np.random.Generator) -> OraclePolicy:
    return OraclePolicy(instance, budget, rng)


def make_policy(name: str, instance: TaskInstance, budget: float,
                rng: np.random.Generator, epsilon: float = 0.1,
                granularity: int | str | None = None,
                fast_subroutine: bool = True) -> Policy:
    """Build a fresh policy for one episode; learners get a blind view."""
    if name == "caws":
        return CawsPolicy(instance.view(), budget, rng,
                          alpha=instance.holder_alpha, granularity=granularity,
                          fast_subroutine=fast_subroutine)
    if name == "bkube":
        return bkube_init(instance.view(), budget, rng)
    if name == "epsilon_first":
        return epsilon_first_policy(instance.view(), budget, rng, epsilon)
    if name == "random":
        return random_policy(instance.view(), budget, rng)
    if name == "oracle":
        return oracle_policy(instance, budget, rng)
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
