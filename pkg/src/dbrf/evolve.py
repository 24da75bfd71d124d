"""Tree fitness and bottom-fraction elimination before easy/hard voting."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .forest import Forest
from .hem import LeafScoreTable

__all__ = ["FitnessReport", "tree_fitness", "select_survivors", "evolve"]


@dataclass(frozen=True)
class FitnessReport:
    fitness: dict[int, float]
    threshold: float
    survivors: tuple[int, ...]
    eliminated: tuple[int, ...]


def tree_fitness(f: Forest, table: LeafScoreTable) -> dict[int, float]:
    """Mean leaf score of each tree."""
    table.check_matches(f)
    out = {}
    for t in range(f.n_trees):
        s = table.tree_scores(t)
        if s.size == 0:
            raise ValueError(f"tree {t} has no score table entries")
        out[t] = math.fsum(s.tolist()) / s.size
    return out


def select_survivors(fitness: dict[int, float], ratio: float = 0.2) -> FitnessReport:
    """Drop the ``floor(ratio * n)`` least fit trees.

    Among equal fitness the larger tree index goes first, so lower indices
    survive. At least one tree always survives.
    """
    if not fitness:
        raise ValueError("fitness map is empty")
    if not 0.0 <= ratio < 1.0:
        raise ValueError("ratio must lie in [0, 1)")
    n = len(fitness)
    k = min(math.floor(ratio * n), n - 1)
    worst_first = sorted(fitness, key=lambda t: (fitness[t], -t))
    eliminated = tuple(sorted(worst_first[:k]))
    survivors = tuple(sorted(worst_first[k:]))
    threshold = min(fitness[t] for t in survivors)
    return FitnessReport(dict(fitness), threshold, survivors, eliminated)


def evolve(f: Forest, table: LeafScoreTable, ratio: float = 0.2,
           recompute_sigma: bool = True) -> tuple[Forest, LeafScoreTable, FitnessReport]:
    """Apply elimination and return the surviving forest with its rebuilt table."""
    report = select_survivors(tree_fitness(f, table), ratio)
    return (f.subset(report.survivors),
            table.subset(report.survivors, recompute_sigma=recompute_sigma),
            report)
