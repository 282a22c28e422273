"""Shared domain types: workers, task instances, allocations, episode logs.

All types are immutable value objects after construction. Policies never see
true mean rewards; they operate on a `PolicyView` which strips them off.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class WorkerSpec:
    """One worker: public attributes plus the hidden mean reward.

    `true_mean` is visible only to the environment, the oracle baseline and
    the evaluator; learning policies receive a view without it.
    """

    id: int
    context: tuple[float, ...]
    cost: float
    capacity: int
    true_mean: float


@dataclass(frozen=True)
class TaskInstance:
    """A full selection problem: workers, budget and smoothness parameters."""

    workers: tuple[WorkerSpec, ...]
    budget: float
    dimension: int
    holder_L: float = 1.0
    holder_alpha: float = 1.0

    @property
    def n_workers(self) -> int:
        return len(self.workers)

    @cached_property
    def costs(self) -> np.ndarray:
        return np.array([w.cost for w in self.workers], dtype=np.float64)

    @cached_property
    def capacities(self) -> np.ndarray:
        return np.array([w.capacity for w in self.workers], dtype=np.int64)

    @cached_property
    def contexts(self) -> np.ndarray:
        return np.array([w.context for w in self.workers], dtype=np.float64)

    @cached_property
    def true_means(self) -> np.ndarray:
        return np.array([w.true_mean for w in self.workers], dtype=np.float64)

    @property
    def c_min(self) -> float:
        return float(self.costs.min())

    @property
    def c_max(self) -> float:
        return float(self.costs.max())

    @property
    def tau_max(self) -> int:
        return int(self.capacities.max())

    def view(self) -> "PolicyView":
        """Policy-facing view: everything except the true means."""
        return PolicyView(
            costs=self.costs,
            capacities=self.capacities,
            contexts=self.contexts,
            dimension=self.dimension,
        )

    def with_budget(self, budget: float) -> "TaskInstance":
        return replace(self, budget=budget)

    def subset(self, n: int) -> "TaskInstance":
        """First `n` workers as a standalone instance (nested populations)."""
        return replace(self, workers=self.workers[:n])


@dataclass(frozen=True)
class PolicyView:
    """What a learning policy is allowed to observe about the workers."""

    costs: np.ndarray
    capacities: np.ndarray
    contexts: np.ndarray
    dimension: int

    @property
    def n_workers(self) -> int:
        return len(self.costs)


@dataclass(frozen=True)
class Allocation:
    """Per-worker selection counts with their cost and expected value."""

    counts: np.ndarray
    total_cost: float
    expected_value: float


class StepRecord(NamedTuple):
    t: int
    worker: int
    cube: int
    cost: float
    reward: float


@dataclass(frozen=True)
class RunResult:
    """Full log of one simulated episode plus summary totals."""

    steps: tuple[StepRecord, ...]
    realized_revenue: float
    expected_revenue: float
    final_counts: np.ndarray
    budget_spent: float
    iterations: int


def allocation_value(counts: Sequence[float] | np.ndarray,
                     means: Sequence[float] | np.ndarray) -> float:
    """Expected cumulative revenue of an allocation: sum of mean * count."""
    counts = np.asarray(counts, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    if counts.shape != means.shape:
        raise ValueError(
            f"length mismatch: {counts.shape} counts vs {means.shape} means")
    return float(np.dot(means, counts))


def validate_instance(instance: TaskInstance) -> TaskInstance:
    """Check all instance invariants; return the instance unchanged.

    Raises ValueError naming the first violated invariant.
    """
    if instance.n_workers < 1:
        raise ValueError("instance has no workers")
    if not (instance.budget > 0):
        raise ValueError(f"budget must be positive, got {instance.budget}")
    if instance.dimension < 1:
        raise ValueError(f"dimension must be positive, got {instance.dimension}")
    if not (instance.holder_L > 0 and instance.holder_alpha > 0):
        raise ValueError("smoothness parameters must be positive")
    seen: set[int] = set()
    for pos, w in enumerate(instance.workers):
        if w.id in seen:
            raise ValueError(f"duplicate id {w.id}")
        seen.add(w.id)
        if w.id != pos:
            raise ValueError(f"ids must be contiguous from 0, got {w.id} at {pos}")
        if len(w.context) != instance.dimension:
            raise ValueError(
                f"worker {w.id}: context length {len(w.context)} != "
                f"dimension {instance.dimension}")
        for x in w.context:
            if not (0.0 <= x <= 1.0) or not math.isfinite(x):
                raise ValueError(f"worker {w.id}: context out of range: {x}")
        if not (w.cost > 0 and math.isfinite(w.cost)):
            raise ValueError(f"worker {w.id}: non-positive cost {w.cost}")
        if w.capacity < 0:
            raise ValueError(f"worker {w.id}: negative capacity {w.capacity}")
        if not (0.0 <= w.true_mean <= 1.0):
            raise ValueError(f"worker {w.id}: mean out of [0,1]: {w.true_mean}")
    return instance


# -- worker CSV format ------------------------------------------------------
# Header: id,cost,capacity,mu,ctx_0,...,ctx_{M-1}
# The mu column may be empty when a context-to-mean map supplies the means.

def worker_csv_header(dimension: int) -> list[str]:
    return ["id", "cost", "capacity", "mu"] + [f"ctx_{j}" for j in range(dimension)]


def write_workers_csv(path, instance: TaskInstance) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(worker_csv_header(instance.dimension))
        for w in instance.workers:
            writer.writerow([w.id, repr(w.cost), w.capacity, repr(w.true_mean)]
                            + [repr(x) for x in w.context])


def read_workers_csv(path, dimension: int, budget: float,
                     holder_L: float = 1.0, holder_alpha: float = 1.0,
                     mu_of_context=None) -> TaskInstance:
    """Parse a worker CSV into a validated TaskInstance.

    `mu_of_context` fills in means for rows with an empty mu column.
    """
    expected = worker_csv_header(dimension)
    workers: list[WorkerSpec] = []
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != expected:
            raise ValueError(
                f"unknown header {header!r}, expected {expected!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise ValueError(
                    f"line {lineno}: expected {len(expected)} fields, got {len(row)}")
            try:
                wid = int(row[0])
                cost = float(row[1])
                cap = int(row[2])
                ctx = tuple(float(x) for x in row[4:])
                if row[3] == "":
                    if mu_of_context is None:
                        raise ValueError("mu column empty and no mean map given")
                    mu = float(mu_of_context(np.array(ctx)))
                else:
                    mu = float(row[3])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            workers.append(WorkerSpec(wid, ctx, cost, cap, mu))
    instance = TaskInstance(tuple(workers), budget, dimension,
                            holder_L, holder_alpha)
    return validate_instance(instance)


def result_from_steps(steps: Iterable[StepRecord], n_workers: int) -> RunResult:
    """Rebuild a RunResult's summary fields from its step log."""
    steps = tuple(steps)
    counts = np.zeros(n_workers, dtype=np.int64)
    realized = 0.0
    spent = 0.0
    for s in steps:
        counts[s.worker] += 1
        realized += s.reward
        spent += s.cost
    return RunResult(steps=steps, realized_revenue=realized,
                     expected_revenue=float("nan"), final_counts=counts,
                     budget_spent=spent, iterations=len(steps))
