"""Seeded multi-start compass (coordinate pattern) search."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SearchBudget:
    """Budget for derivative-free search, counted in objective evaluations."""

    max_evals: int = 200_000
    restarts: int = 4
    seed: int = 0
    initial_step: float = 0.25
    min_step: float = 1e-10

    def child(self, offset: int) -> "SearchBudget":
        """Same budget with a deterministically derived seed."""
        return SearchBudget(self.max_evals, self.restarts, self.seed * 1009 + offset,
                            self.initial_step, self.min_step)


@dataclass
class SearchResult:
    x: np.ndarray
    value: float
    evaluations: int


def compass_search(objective: Callable[[np.ndarray], float], x0, budget: int,
                   step: float = 0.25, min_step: float = 1e-10, rng=None,
                   target: float = -np.inf) -> SearchResult:
    """Single-start compass search; step halves after an unsuccessful sweep."""
    x = np.array(x0, dtype=float)
    fx = float(objective(x))
    evals = 1
    steps = np.full(x.shape, float(step))
    order = np.arange(x.size)
    while evals < budget and fx > target and steps.max() >= min_step:
        if rng is not None:
            rng.shuffle(order)
        improved = False
        for i in order:
            if steps[i] < min_step:
                continue
            for sign in (1.0, -1.0):
                if evals >= budget:
                    break
                old = x[i]
                x[i] = old + sign * steps[i]
                ft = float(objective(x))
                evals += 1
                if ft < fx:
                    fx = ft
                    improved = True
                    # expand along a direction that keeps paying off
                    steps[i] *= 1.5
                    break
                x[i] = old
            if evals >= budget or fx <= target:
                break
        if not improved:
            steps *= 0.5
    return SearchResult(x, fx, evals)


def multistart_search(objective: Callable[[np.ndarray], float], x0, budget: SearchBudget,
                      spread: float = 0.5, target: float = -np.inf) -> SearchResult:
    """Compass search from ``x0`` plus ``restarts - 1`` seeded perturbations of it.

    The evaluation budget is split evenly; the best point over all starts wins.
    """
    rng = np.random.default_rng(budget.seed)
    x0 = np.asarray(x0, dtype=float)
    starts = max(1, budget.restarts)
    share = max(1, budget.max_evals // starts)
    best, used = None, 0
    for r in range(starts):
        start = x0 if r == 0 else x0 + spread * rng.standard_normal(x0.shape)
        res = compass_search(objective, start, share, budget.initial_step, budget.min_step, rng, target)
        used += res.evaluations
        if best is None or res.value < best.value:
            best = res
        if best.value <= target:
            break
    return SearchResult(best.x, best.value, used)
