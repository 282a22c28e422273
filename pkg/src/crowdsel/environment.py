"""Reward generation, synthetic instances, and time-varying context traces.

Mean-reward maps turn a context vector into a hidden mean in [0,1]. Each map
declares a smoothness certificate (L, alpha) such that
|mu(s) - mu(s')| <= L * ||s - s'||^alpha, which is what makes cell-level
estimation sound.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .model import TaskInstance, WorkerSpec, validate_instance


# -- context-to-mean maps ---------------------------------------------------

class MuMap:
    """Base class: vectorized context-to-mean map with a (L, alpha) certificate."""

    name: str
    holder_L: float
    holder_alpha: float

    def __call__(self, contexts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class CoordinateMeanMap(MuMap):
    """Mean of the context coordinates.

    Satisfies the smoothness certificate with alpha = 1 and L = 1/sqrt(M)
    (tightest constant, by Cauchy-Schwarz on the coordinate differences).
    """

    name = "coordinate_mean"
    holder_alpha = 1.0

    def __init__(self, dimension: int):
        self.dimension = dimension
        self.holder_L = 1.0 / math.sqrt(dimension)

    def __call__(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        return contexts.mean(axis=1)


class GaussianDistanceBatteryMap(MuMap):
    """Sensing ability from (distance to task spot, battery state), M = 2.

    raw(phi) = (1 / (sigma sqrt(2 pi))) * exp(-phi_0^2 / (2 sigma^2)) * sqrt(phi_1),
    normalized by its supremum at phi = (0, 1) so the image is exactly [0,1].

    The sqrt factor in the battery coordinate is only 1/2-smooth near zero,
    so the certificate uses alpha = 1/2; with sigma = 1 the normalized
    distance factor has slope at most exp(-1/2), giving
    L = exp(-1/2) * 2^(1/4) + 1 as a global constant
    (|f - f'| <= e^{-1/2}|d - d'| + sqrt(|b - b'|) and ||s-s'|| <= 2^(1/2)).
    """

    name = "gaussian_distance_battery"

    def __init__(self, sigma: float = 1.0):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = sigma
        self.holder_alpha = 0.5
        self.holder_L = math.exp(-0.5) / sigma * 2 ** 0.25 + 1.0

    def __call__(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        if contexts.shape[1] != 2:
            raise ValueError("this map requires a 2-dimensional context")
        dist, battery = contexts[:, 0], contexts[:, 1]
        return np.exp(-(dist ** 2) / (2.0 * self.sigma ** 2)) * np.sqrt(battery)


class TableMap(MuMap):
    """Nearest-neighbour lookup over explicit (context, mean) rows."""

    name = "custom_table"

    def __init__(self, contexts: np.ndarray, means: np.ndarray,
                 holder_L: float = 1.0, holder_alpha: float = 1.0):
        self.table_contexts = np.asarray(contexts, dtype=np.float64)
        self.table_means = np.asarray(means, dtype=np.float64)
        self.holder_L = holder_L
        self.holder_alpha = holder_alpha

    def __call__(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        d2 = ((contexts[:, None, :] - self.table_contexts[None, :, :]) ** 2).sum(-1)
        return self.table_means[np.argmin(d2, axis=1)]


def make_mu_map(kind: str, dimension: int, sigma: float = 1.0) -> MuMap:
    if kind == "coordinate_mean":
        return CoordinateMeanMap(dimension)
    if kind == "gaussian_distance_battery":
        if dimension != 2:
            raise ValueError("gaussian_distance_battery requires M = 2")
        return GaussianDistanceBatteryMap(sigma)
    raise ValueError(f"unknown mean map kind: {kind}")


def eval_mu_map(mu_map: MuMap, context) -> float:
    value = float(mu_map(np.asarray(context, dtype=np.float64))[0])
    return value


# -- reward models ----------------------------------------------------------

@dataclass(frozen=True)
class RewardModel:
    """How observed rewards are drawn around a worker's true mean.

    bernoulli: {0,1} with the mean as success probability.
    bounded_continuous: Beta-distributed in [0,1] with the given mean.
    """

    kind: str = "bernoulli"
    concentration: float = 4.0

    def __post_init__(self):
        if self.kind not in ("bernoulli", "bounded_continuous"):
            raise ValueError(f"unknown reward model kind: {self.kind}")

    def draw(self, mean: float, rng: np.random.Generator) -> float:
        if self.kind == "bernoulli":
            return float(rng.random() < mean)
        if mean <= 0.0:
            return 0.0
        if mean >= 1.0:
            return 1.0
        a = self.concentration * mean
        b = self.concentration * (1.0 - mean)
        return float(rng.beta(a, b))


def sample_reward(worker: WorkerSpec, model: RewardModel,
                  rng: np.random.Generator) -> float:
    return model.draw(worker.true_mean, rng)


# -- synthetic instance generation ------------------------------------------

def gen_synthetic(n: int, dimension: int, cost_range: tuple[float, float],
                  capacity_range: tuple[int, int], mu_map: MuMap, seed: int,
                  budget: float = 1.0) -> TaskInstance:
    """i.i.d. uniform contexts, costs and integer capacities; means via the map."""
    if n < 1:
        raise ValueError("need at least one worker")
    lo_c, hi_c = cost_range
    lo_t, hi_t = capacity_range
    if lo_c <= 0 or hi_c < lo_c or lo_t < 0 or hi_t < lo_t:
        raise ValueError("invalid cost or capacity range")
    rng = np.random.default_rng(seed)
    contexts = rng.uniform(0.0, 1.0, size=(n, dimension))
    costs = rng.uniform(lo_c, hi_c, size=n)
    caps = rng.integers(lo_t, hi_t + 1, size=n)
    means = mu_map(contexts)
    workers = tuple(
        WorkerSpec(i, tuple(float(x) for x in contexts[i]), float(costs[i]),
                   int(caps[i]), float(means[i]))
        for i in range(n)
    )
    return validate_instance(TaskInstance(
        workers=workers, budget=budget, dimension=dimension,
        holder_L=mu_map.holder_L, holder_alpha=mu_map.holder_alpha))


# -- time-varying context traces --------------------------------------------

@dataclass(frozen=True)
class ContextTrace:
    """Per-round contexts, dense: contexts[t - 1, i] is worker i's context
    at round t. Rounds past the end hold the last row."""

    contexts: np.ndarray  # (rounds, n, M)

    @property
    def rounds(self) -> int:
        return self.contexts.shape[0]

    @property
    def n_workers(self) -> int:
        return self.contexts.shape[1]

    def at(self, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError("rounds start at 1")
        return self.contexts[min(t, self.rounds) - 1]


def gen_drift_trace(n: int, rounds: int, decay_rate: float, seed: int,
                    step_size: float = 0.05,
                    initial_battery: float | None = None) -> ContextTrace:
    """Distance / battery drift: coordinate 0 performs a reflected random
    walk on [0,1]; coordinate 1 loses `decay_rate` per round and resets to
    1.0 when it would drop below zero.

    `initial_battery` fixes every worker's starting charge; by default it is
    uniform at random per worker.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if not (0.0 < decay_rate < 1.0):
        raise ValueError("decay_rate must be in (0,1)")
    rng = np.random.default_rng(seed)
    dist = rng.uniform(0.0, 1.0, size=n)
    if initial_battery is None:
        battery = rng.uniform(0.0, 1.0, size=n)
    else:
        battery = np.full(n, float(initial_battery))
    out = np.empty((rounds, n, 2), dtype=np.float64)
    for t in range(rounds):
        out[t, :, 0] = dist
        out[t, :, 1] = battery
        steps = rng.uniform(-step_size, step_size, size=n)
        dist = np.abs(dist + steps)
        dist = 1.0 - np.abs(1.0 - dist)  # reflect at both walls
        np.clip(dist, 0.0, 1.0, out=dist)
        nxt = battery - decay_rate
        battery = np.where(nxt < 0.0, 1.0, nxt)
    return ContextTrace(contexts=out)


def trace_csv_header(dimension: int) -> list[str]:
    return ["t", "id"] + [f"ctx_{j}" for j in range(dimension)]


def write_trace_csv(path, trace: ContextTrace) -> None:
    dim = trace.contexts.shape[2]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(trace_csv_header(dim))
        for t in range(trace.rounds):
            for i in range(trace.n_workers):
                writer.writerow([t + 1, i]
                                + [repr(float(x)) for x in trace.contexts[t, i]])


def read_trace_csv(path, n: int, dimension: int,
                   initial_contexts: np.ndarray | None = None) -> ContextTrace:
    """Parse a `t,id,ctx_*` trace; absent (round, worker) pairs keep the
    worker's previous context."""
    expected = trace_csv_header(dimension)
    rows: list[tuple[int, int, np.ndarray]] = []
    max_t = 0
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != expected:
            raise ValueError(f"unknown header {header!r}, expected {expected!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise ValueError(
                    f"line {lineno}: expected {len(expected)} fields, got {len(row)}")
            try:
                t = int(row[0])
                wid = int(row[1])
                ctx = np.array([float(x) for x in row[2:]])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            if t < 1:
                raise ValueError(f"line {lineno}: rounds start at 1")
            if not (0 <= wid < n):
                raise ValueError(f"line {lineno}: worker id {wid} out of range")
            if np.any(ctx < 0.0) or np.any(ctx > 1.0):
                raise ValueError(f"line {lineno}: context coordinate out of [0,1]")
            rows.append((t, wid, ctx))
            max_t = max(max_t, t)
    if max_t == 0:
        raise ValueError("trace file holds no rows")
    if initial_contexts is None:
        initial_contexts = np.zeros((n, dimension))
    out = np.empty((max_t, n, dimension), dtype=np.float64)
    current = np.array(initial_contexts, dtype=np.float64, copy=True)
    by_round: dict[int, list[tuple[int, np.ndarray]]] = {}
    for t, wid, ctx in rows:
        by_round.setdefault(t, []).append((wid, ctx))
    for t in range(1, max_t + 1):
        for wid, ctx in by_round.get(t, ()):
            current[wid] = ctx
        out[t - 1] = current
    return ContextTrace(contexts=out)


def load_worker_trace(path, n: int, dimension: int,
                      initial_contexts: np.ndarray | None = None) -> ContextTrace:
    return read_trace_csv(path, n, dimension, initial_contexts)
