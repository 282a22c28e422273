"""Episode runner, regret estimation, closed-form regret bound, sweeps.

Regret is measured against the floored optimum of the fractional knapsack
relaxation solved with the true means; replications estimate its expectation
by Monte Carlo over seeded episodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from . import environment as env
from .environment import ContextTrace, MuMap, RewardModel
from .knapsack import round_down, solve_fbkp, _density_permutation
from .model import Allocation, RunResult, StepRecord, TaskInstance
from .partition import PartitionGrid, choose_granularity
from .policies import Policy, make_policy


def run_episode(instance: TaskInstance, policy: Policy, model: RewardModel,
                rng: np.random.Generator, trace: Optional[ContextTrace] = None,
                mu_map: Optional[MuMap] = None,
                record_steps: bool = True) -> RunResult:
    """One full simulation: select / observe until no affordable worker is left.

    With a trace, every worker's context (and hence its instant true mean via
    `mu_map`) is refreshed at the start of each round.
    """
    if trace is not None and mu_map is None:
        raise ValueError("a trace needs a mean map to derive instant means")
    means = instance.true_means
    costs = instance.costs
    steps: list[StepRecord] = []
    final_counts = np.zeros(instance.n_workers, dtype=np.int64)
    realized = 0.0
    expected = 0.0
    spent = 0.0
    t = 1
    while policy.can_continue():
        if trace is not None:
            contexts = trace.at(t)
            means = mu_map(contexts)
            policy.refresh_contexts(contexts)
        worker = policy.select(t)
        reward = model.draw(float(means[worker]), rng)
        policy.observe(worker, reward)
        final_counts[worker] += 1
        realized += reward
        expected += float(means[worker])
        spent += float(costs[worker])
        if record_steps:
            steps.append(StepRecord(t=t, worker=worker,
                                    cube=policy.cell_of_worker(worker),
                                    cost=float(costs[worker]), reward=reward))
        t += 1
    return RunResult(steps=tuple(steps), realized_revenue=realized,
                     expected_revenue=expected, final_counts=final_counts,
                     budget_spent=spent, iterations=t - 1)


def baseline_allocation(instance: TaskInstance,
                        trace: Optional[ContextTrace] = None,
                        mu_map: Optional[MuMap] = None) -> Allocation:
    """Floored fractional-knapsack optimum under the true means.

    With a trace, worker-rounds become unit-capacity pseudo-workers with
    their instant means; the greedy scan respects each worker's total
    capacity and the budget.
    """
    if trace is None:
        frac = solve_fbkp(instance.true_means, instance.costs,
                          instance.capacities, instance.budget)
        return round_down(frac, instance.true_means, instance.costs)
    if mu_map is None:
        raise ValueError("a trace needs a mean map to derive instant means")
    n = instance.n_workers
    rounds = trace.rounds
    mu_rt = np.stack([mu_map(trace.at(t)) for t in range(1, rounds + 1)])
    values = mu_rt.ravel()                       # (rounds * n,)
    costs = np.tile(instance.costs, rounds)
    worker_of = np.tile(np.arange(n), rounds)
    order = np.argsort(-(values / costs), kind="stable")
    remaining_cap = instance.capacities.astype(np.int64).copy()
    budget = instance.budget
    b = 0.0
    counts = np.zeros(n, dtype=np.int64)
    value = 0.0
    for j in order:
        w = worker_of[j]
        if remaining_cap[w] >= 1 and b + costs[j] <= budget:
            counts[w] += 1
            remaining_cap[w] -= 1
            b += costs[j]
            value += values[j]
    return Allocation(counts=counts, total_cost=b, expected_value=value)


def empirical_regret(results: Sequence[RunResult], baseline: Allocation,
                     means: Optional[np.ndarray] = None) -> float:
    """Baseline expected value minus the Monte Carlo mean expected revenue."""
    if not results:
        raise ValueError("empty result list")
    if means is not None:
        achieved = [float(np.dot(means, r.final_counts)) for r in results]
    else:
        achieved = [r.expected_revenue for r in results]
    return baseline.expected_value - float(np.mean(achieved))


# -- closed-form regret bound ----------------------------------------------

@dataclass(frozen=True)
class BoundInputs:
    B: float
    M: int
    alpha: float
    L: float
    c_min: float
    c_max: float
    tau_max: int
    delta_min: Optional[float] = None


def delta_min(instance: TaskInstance, grid: PartitionGrid) -> Optional[float]:
    """Smallest density separation between unselected and selected cells.

    Cell means estimate the workers' true means; the floored fractional
    optimum under those estimates splits each cell's workers into selected
    and unselected sides. Returns None when no (unselected, selected) pair
    exists or the minimum separation degenerates to zero.
    """
    cell_of = grid.assign(instance.contexts)
    n_cells = grid.cube_count
    mu_sum = np.bincount(cell_of, weights=instance.true_means,
                         minlength=n_cells)
    occupancy = np.bincount(cell_of, minlength=n_cells)
    occupied = occupancy > 0
    mu_cell = np.zeros(n_cells)
    mu_cell[occupied] = mu_sum[occupied] / occupancy[occupied]

    estimates = mu_cell[cell_of]
    frac = solve_fbkp(estimates, instance.costs, instance.capacities,
                      instance.budget)
    selected = np.floor(frac.counts) >= 1

    big = np.inf
    c_min_unsel = np.full(n_cells, big)
    c_max_sel = np.full(n_cells, -big)
    np.minimum.at(c_min_unsel, cell_of[~selected],
                  instance.costs[~selected])
    np.maximum.at(c_max_sel, cell_of[selected], instance.costs[selected])

    has_unsel = np.isfinite(c_min_unsel)
    has_sel = np.isfinite(c_max_sel)
    if not has_unsel.any() or not has_sel.any():
        return None
    a = mu_cell[has_unsel] / c_min_unsel[has_unsel]
    b = mu_cell[has_sel] / c_max_sel[has_sel]
    b_sorted = np.sort(b)
    pos = np.searchsorted(b_sorted, a)
    left = np.clip(pos - 1, 0, len(b_sorted) - 1)
    right = np.clip(pos, 0, len(b_sorted) - 1)
    gaps = np.minimum(np.abs(a - b_sorted[left]), np.abs(a - b_sorted[right]))
    result = float(gaps.min())
    if result <= 0.0:
        return None
    return result


def theorem1_bound(inputs: BoundInputs) -> Optional[float]:
    """Closed-form regret ceiling; None when the separation is degenerate."""
    if inputs.delta_min is None or inputs.delta_min <= 0:
        return None
    xi = (8.0 / (inputs.c_min ** 2 * inputs.delta_min ** 2)
          + (inputs.c_max / inputs.c_min) ** 2)
    h = xi * math.log(inputs.B / inputs.c_min) + math.pi ** 2 / 3.0 + 1.0
    growth = inputs.B ** (inputs.M / (inputs.alpha + inputs.M))
    return ((inputs.tau_max + 2 ** inputs.M * growth * h + 1)
            * inputs.c_max / inputs.c_min
            + 4.0 * inputs.L * inputs.M ** (inputs.alpha / 2.0) * growth
            / inputs.c_min
            + 1.0)


def bound_for_instance(instance: TaskInstance) -> tuple[Optional[float],
                                                        Optional[float], int]:
    """(bound, separation, granularity) for an instance with known means."""
    d = choose_granularity(max(instance.budget, 1.0), instance.holder_alpha,
                           instance.dimension)
    grid = PartitionGrid(d=d, dimension=instance.dimension)
    dmin = delta_min(instance, grid)
    inputs = BoundInputs(B=instance.budget, M=instance.dimension,
                         alpha=instance.holder_alpha, L=instance.holder_L,
                         c_min=instance.c_min, c_max=instance.c_max,
                         tau_max=instance.tau_max, delta_min=dmin)
    return theorem1_bound(inputs), dmin, d


# -- sweeps -----------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One sweep: instance source, grids, policies, replication plan."""

    n_workers: list[int] = field(default_factory=lambda: [1000])
    dimension: int = 2
    cost_range: tuple[float, float] = (1.0, 1.5)
    capacity_range: tuple[int, int] = (20, 40)
    mu_map: str = "coordinate_mean"
    sigma: float = 1.0
    instance_seed: int = 0
    instance_path: Optional[str] = None
    budgets: list[float] = field(default_factory=lambda: [1000.0])
    policies: list[str] = field(default_factory=lambda: ["caws"])
    epsilon: float = 0.1
    granularity: Optional[int | str] = None
    replications: int = 10
    base_seed: int = 0
    reward_model: str = "bernoulli"
    drift: bool = False
    drift_rounds: int = 1300
    drift_decay: float = 0.05
    drift_step: float = 0.05
    trace_path: Optional[str] = None
    trace_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.cost_range = tuple(cfg.cost_range)
        cfg.capacity_range = tuple(cfg.capacity_range)
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def digest(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def episode_seed(base_seed: int, n: int, budget: float,
                 rep: int) -> np.random.SeedSequence:
    """Stable stream per (population size, budget, replication): adding grid
    points never perturbs existing ones."""
    return np.random.SeedSequence(
        entropy=[base_seed, n, int(round(budget * 10**6)), rep])


def _build_instances(config: ExperimentConfig) -> dict[int, TaskInstance]:
    mu_map = env.make_mu_map(config.mu_map, config.dimension, config.sigma)
    instances: dict[int, TaskInstance] = {}
    if config.instance_path is not None:
        from .model import read_workers_csv
        inst = read_workers_csv(config.instance_path, config.dimension,
                                budget=1.0, holder_L=mu_map.holder_L,
                                holder_alpha=mu_map.holder_alpha,
                                mu_of_context=lambda c: mu_map(c)[0])
        for n in config.n_workers:
            if n > inst.n_workers:
                raise ValueError(f"instance file holds {inst.n_workers} "
                                 f"workers, grid asks for {n}")
            instances[n] = inst.subset(n)
        return instances
    n_max = max(config.n_workers)
    master = env.gen_synthetic(n_max, config.dimension, config.cost_range,
                               config.capacity_range, mu_map,
                               config.instance_seed)
    for n in config.n_workers:
        instances[n] = master.subset(n)
    return instances


def _build_trace(config: ExperimentConfig, n: int,
                 instance: TaskInstance) -> Optional[ContextTrace]:
    if config.trace_path is not None:
        return env.read_trace_csv(config.trace_path, n, config.dimension,
                                  initial_contexts=instance.contexts)
    if config.drift:
        return env.gen_drift_trace(n, config.drift_rounds, config.drift_decay,
                                   config.trace_seed, config.drift_step)
    return None


def run_sweep(config: ExperimentConfig,
              collect_steps: bool = False) -> tuple[list[dict], list[dict]]:
    """All grid points x policies x replications; one summary row per
    (policy, grid point). Optionally also returns per-step log rows."""
    if not config.budgets or not config.n_workers:
        raise ValueError("grids must be non-empty")
    if config.replications < 1:
        raise ValueError("replications must be >= 1")
    mu_map = env.make_mu_map(config.mu_map, config.dimension, config.sigma)
    model = RewardModel(kind=config.reward_model)
    instances = _build_instances(config)
    rows: list[dict] = []
    step_rows: list[dict] = []
    for n in config.n_workers:
        base_inst = instances[n]
        trace = _build_trace(config, n, base_inst)
        for budget in config.budgets:
            inst = base_inst.with_budget(float(budget))
            baseline = baseline_allocation(inst, trace, mu_map)
            if trace is None:
                bound, _, _ = bound_for_instance(inst)
            else:
                bound = None
            for policy_name in config.policies:
                revenues, expectations = [], []
                for rep in range(config.replications):
                    rng = np.random.default_rng(
                        episode_seed(config.base_seed, n, budget, rep))
                    policy = make_policy(policy_name, inst, float(budget), rng,
                                         epsilon=config.epsilon,
                                         granularity=config.granularity)
                    result = run_episode(inst, policy, model, rng, trace,
                                         mu_map, record_steps=collect_steps)
                    revenues.append(result.realized_revenue)
                    expectations.append(result.expected_revenue)
                    if collect_steps:
                        for s in result.steps:
                            step_rows.append({
                                "policy": policy_name, "seed": rep,
                                "t": s.t, "worker_id": s.worker,
                                "cube": s.cube, "cost": s.cost,
                                "reward": s.reward,
                            })
                regrets = [baseline.expected_value - e for e in expectations]
                rows.append({
                    "policy": policy_name,
                    "B": float(budget),
                    "N": n,
                    "M": config.dimension,
                    "alpha": inst.holder_alpha,
                    "replications": config.replications,
                    "mean_revenue": float(np.mean(revenues)),
                    "std_revenue": _sample_std(revenues),
                    "mean_expected_revenue": float(np.mean(expectations)),
                    "mean_regret": float(np.mean(regrets)),
                    "std_regret": _sample_std(regrets),
                    "theorem1_bound": bound,
                })
    return rows, step_rows


def _sample_std(xs: Sequence[float]) -> float:
    if len(xs) < 2:
        return 0.0
    return float(np.std(xs, ddof=1))
