"""Uniform discretization of the context space and per-cell statistics.

The unit hypercube [0,1]^M is split into d^M congruent cells. Each cell
carries a pull count and a running mean reward; the optimistic index of a
cell combines its mean with an exploration bonus shrinking in the pulls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def choose_granularity(budget: float, alpha: float, dimension: int) -> int:
    """Cells per axis: ceil(budget ** (1 / (alpha + dimension)))."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    exp = 1.0 / (alpha + dimension)
    d = math.ceil(budget ** exp)
    # guard against float noise pushing an exact root over the ceiling
    if d > 1 and (d - 1) ** (alpha + dimension) >= budget * (1 - 1e-12):
        d -= 1
    return d


def holder_delta(L: float, alpha: float, dimension: int, d: int) -> float:
    """Largest possible mean-reward gap between two contexts in one cell."""
    return L * (math.sqrt(dimension) / d) ** alpha


@dataclass(frozen=True)
class PartitionGrid:
    """d cells per axis over [0,1]^M with an axis-0-fastest linear index."""

    d: int
    dimension: int

    def __post_init__(self):
        if self.d < 1 or self.dimension < 1:
            raise ValueError("d and dimension must be positive")

    @property
    def cube_count(self) -> int:
        return self.d ** self.dimension

    def index_of(self, context) -> int:
        context = np.asarray(context, dtype=np.float64)
        return int(self.assign(context.reshape(1, -1))[0])

    def assign(self, contexts: np.ndarray) -> np.ndarray:
        """Map an (n, M) array of contexts to their linear cell indices.

        Coordinates equal to 1.0 clamp into the last cell along their axis.
        """
        contexts = np.asarray(contexts, dtype=np.float64)
        if contexts.ndim != 2 or contexts.shape[1] != self.dimension:
            raise ValueError(
                f"expected (n, {self.dimension}) contexts, got {contexts.shape}")
        if np.any(contexts < 0.0) or np.any(contexts > 1.0):
            raise ValueError("context coordinate out of [0,1]")
        cells = np.minimum((contexts * self.d).astype(np.int64), self.d - 1)
        radix = self.d ** np.arange(self.dimension, dtype=np.int64)
        return cells @ radix


def cube_index(context, grid: PartitionGrid) -> int:
    return grid.index_of(context)


@dataclass(frozen=True)
class CubeStats:
    """Selection count and running mean reward of one cell."""

    pulls: int = 0
    mean_reward: float = 0.0


def update_cube_stats(stats: CubeStats, reward: float) -> CubeStats:
    """Incremental count/mean update after one observation."""
    if not (0.0 <= reward <= 1.0):
        raise ValueError(f"reward out of [0,1]: {reward}")
    pulls = stats.pulls + 1
    mean = (stats.mean_reward * stats.pulls + reward) / pulls
    return CubeStats(pulls=pulls, mean_reward=mean)


def ucb_index(stats: CubeStats, t: int) -> float:
    """Optimistic estimate: mean + sqrt(2 ln t / pulls)."""
    if stats.pulls < 1:
        raise ValueError("cell was never sampled; no index defined")
    if t < 1:
        raise ValueError("t must be >= 1")
    return stats.mean_reward + math.sqrt(2.0 * math.log(t) / stats.pulls)


def ucb_indices(means: np.ndarray, pulls: np.ndarray, t: int) -> np.ndarray:
    """Vectorized `ucb_index` over cells; cells with zero pulls yield nan."""
    with np.errstate(divide="ignore", invalid="ignore"):
        bonus = np.sqrt(2.0 * math.log(t) / pulls)
    return np.where(pulls > 0, means + bonus, np.nan)
