"""Offline bounded-knapsack machinery.

The selection problem with known mean rewards is a bounded knapsack:
maximize sum(v_i * x_i) subject to sum(c_i * x_i) <= B and 0 <= x_i <= tau_i
integral. This module provides the LP relaxation's closed-form solution, the
floor rounding used as the regret baseline, the density-ordered greedy
2-approximation, and an exhaustive test oracle.

Density order is canonical throughout the package: decreasing v_i/c_i
(IEEE double quotient), ties broken by ascending cost then ascending id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import Allocation

BRUTE_FORCE_LIMIT = 10**7


@dataclass(frozen=True)
class DensityOrder:
    """Worker ids sorted by decreasing value/cost density."""

    permutation: np.ndarray


@dataclass(frozen=True)
class FractionalAllocation:
    """LP-relaxation optimum: full capacities up to a single split worker."""

    counts: np.ndarray
    split_worker: Optional[int]
    value: float
    cost: float


def _as_arrays(values, costs) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.float64)
    if values.shape != costs.shape:
        raise ValueError(f"length mismatch: {values.shape} vs {costs.shape}")
    if np.any(costs <= 0):
        raise ValueError("costs must be positive")
    return values, costs


def density_order(values: Sequence[float], costs: Sequence[float]) -> DensityOrder:
    """Sort worker ids by decreasing density value/cost, deterministically."""
    values, costs = _as_arrays(values, costs)
    return DensityOrder(permutation=_density_permutation(values, costs))


def _density_permutation(values: np.ndarray, costs: np.ndarray,
                         ids: np.ndarray | None = None) -> np.ndarray:
    """Canonical order: density desc, then cost asc, then id asc."""
    if ids is None:
        ids = np.arange(len(values))
    dens = values / costs
    # np.lexsort sorts by the last key first
    order = np.lexsort((ids, costs, -dens))
    return ids[order] if ids is not None else order


def solve_fbkp(values, costs, capacities, budget: float) -> FractionalAllocation:
    """Closed-form optimum of the fractional relaxation.

    Fills full capacities in density order; the first worker that would
    overflow the budget receives the fractional remainder; the rest get zero.
    """
    values, costs = _as_arrays(values, costs)
    capacities = np.asarray(capacities, dtype=np.int64)
    if budget < 0:
        raise ValueError("budget must be non-negative")
    perm = _density_permutation(values, costs)
    counts = np.zeros(len(values), dtype=np.float64)
    csum = np.cumsum(costs[perm] * capacities[perm])
    k = int(np.searchsorted(csum, budget, side="right"))
    counts[perm[:k]] = capacities[perm[:k]]
    split: Optional[int] = None
    if k < len(perm):
        spent = float(csum[k - 1]) if k > 0 else 0.0
        i = int(perm[k])
        frac = (budget - spent) / costs[i]
        counts[i] = frac
        if frac != math.floor(frac):
            split = i
    return FractionalAllocation(
        counts=counts,
        split_worker=split,
        value=float(np.dot(values, counts)),
        cost=float(np.dot(costs, counts)),
    )


def round_down(frac: FractionalAllocation, values, costs) -> Allocation:
    """Floor the fractional optimum into a feasible integral allocation."""
    values, costs = _as_arrays(values, costs)
    counts = np.floor(frac.counts).astype(np.int64)
    return Allocation(
        counts=counts,
        total_cost=float(np.dot(costs, counts)),
        expected_value=float(np.dot(values, counts)),
    )


def greedy_counts(values: np.ndarray, costs: np.ndarray,
                  capacities: np.ndarray, budget: float,
                  ids: np.ndarray | None = None,
                  hint: int = 0) -> np.ndarray:
    """Density-ordered greedy counts, vectorized.

    Scans workers in canonical density order; each worker that still fits
    gets min(capacity, floor(remaining/cost)) units. Equivalent bit-for-bit
    to `greedy_counts_reference` but avoids sorting the full population: it
    sorts only a density-top prefix large enough to exhaust the budget, then
    finishes the scan by repeatedly extracting the densest affordable worker
    from the remainder.

    `ids` restricts the scan to a subset of workers (global indices); counts
    are returned for the full array either way. `hint` presizes the sorted
    prefix (e.g. from the previous iteration's support size).
    """
    n_total = len(values)
    if ids is None:
        ids = np.arange(n_total)
    counts = np.zeros(n_total, dtype=np.int64)
    n = len(ids)
    if n == 0 or budget <= 0:
        return counts

    v = values[ids]
    c = costs[ids]
    cap = capacities[ids]
    dens = v / c

    # Grow a candidate set S = {densest k} until its full-capacity cost
    # overflows the budget (or S is everything). S always contains every
    # worker tied with its lowest density, so the canonical order of S is a
    # true prefix of the canonical order of all workers.
    k = min(n, max(32, hint))
    while True:
        if k >= n:
            sel = np.arange(n)
        else:
            part = np.argpartition(-dens, k - 1)[:k]
            v_k = dens[part].min()
            sel = np.flatnonzero(dens >= v_k)
        weight = float((c[sel] * cap[sel]).sum())
        if weight > budget or k >= n:
            break
        k = min(n, k * 2)

    order = sel[np.lexsort((ids[sel], c[sel], -dens[sel]))]
    c_s, cap_s = c[order], cap[order]
    csum = np.cumsum(c_s * cap_s)
    split = int(np.searchsorted(csum, budget, side="right"))
    counts[ids[order[:split]]] = cap_s[:split]
    b = float(csum[split - 1]) if split > 0 else 0.0

    # Scalar tail inside the sorted prefix: a handful of workers at most,
    # since each assignment leaves a remainder below the worker's unit cost.
    pos = split
    m = len(order)
    while pos < m:
        fits = np.flatnonzero(c_s[pos:] <= budget - b)
        if fits.size == 0:
            break
        pos += int(fits[0])
        x = min(int(cap_s[pos]), int(math.floor((budget - b) / c_s[pos])))
        if x > 0:
            counts[ids[order[pos]]] = x
            b += c_s[pos] * x
        pos += 1

    # Continue the scan over workers below the sorted prefix: all of them
    # have strictly lower density, so "next in order with cost <= remaining"
    # is the densest affordable one among them.
    if k < n:
        in_sel = np.zeros(n, dtype=bool)
        in_sel[sel] = True
        rest = np.flatnonzero(~in_sel)
        while rest.size:
            afford = rest[c[rest] <= budget - b]
            if afford.size == 0:
                break
            d_a = dens[afford]
            top = afford[d_a == d_a.max()]
            if top.size > 1:
                top = top[np.lexsort((ids[top], c[top]))]
            j = int(top[0])
            x = min(int(cap[j]), int(math.floor((budget - b) / c[j])))
            if x > 0:
                counts[ids[j]] = x
                b += c[j] * x
            rest = rest[rest != j]
    return counts


def greedy_counts_reference(values: np.ndarray, costs: np.ndarray,
                            capacities: np.ndarray, budget: float,
                            ids: np.ndarray | None = None) -> np.ndarray:
    """Straight per-worker transcription of the greedy scan (test oracle)."""
    n_total = len(values)
    if ids is None:
        ids = np.arange(n_total)
    counts = np.zeros(n_total, dtype=np.int64)
    if len(ids) == 0 or budget <= 0:
        return counts
    v, c, cap = values[ids], costs[ids], capacities[ids]
    order = np.lexsort((ids, c, -(v / c)))
    b = 0.0
    for j in order:
        if b + c[j] <= budget:
            x = min(int(cap[j]), int(math.floor((budget - b) / c[j])))
            counts[ids[j]] = x
            b += c[j] * x
    return counts


def density_greedy(values, costs, capacities, budget: float) -> Allocation:
    """2-approximate integral allocation by the density-ordered greedy scan."""
    values, costs = _as_arrays(values, costs)
    capacities = np.asarray(capacities, dtype=np.int64)
    if budget < 0:
        raise ValueError("budget must be non-negative")
    counts = greedy_counts(values, costs, capacities, budget)
    return Allocation(
        counts=counts,
        total_cost=float(np.dot(costs, counts)),
        expected_value=float(np.dot(values, counts)),
    )


def brute_force_bkp(values, costs, capacities, budget: float) -> Allocation:
    """Exact optimum by enumeration; guarded against oversized instances.

    Among all optimal count vectors, returns the lexicographically smallest.
    """
    values, costs = _as_arrays(values, costs)
    capacities = np.asarray(capacities, dtype=np.int64)
    size = 1
    for tau in capacities:
        size *= int(tau) + 1
        if size > BRUTE_FORCE_LIMIT:
            raise ValueError(
                f"instance too large for enumeration (> {BRUTE_FORCE_LIMIT})")
    grids = np.meshgrid(*(np.arange(t + 1) for t in capacities), indexing="ij")
    combos = np.stack([g.ravel() for g in grids], axis=1)  # lexicographic rows
    total_cost = combos @ costs
    feasible = total_cost <= budget
    vals = combos[feasible] @ values
    best = vals.max()
    idx = int(np.flatnonzero(vals == best)[0])
    counts = combos[feasible][idx].astype(np.int64)
    return Allocation(
        counts=counts,
        total_cost=float(np.dot(costs, counts)),
        expected_value=float(best),
    )
