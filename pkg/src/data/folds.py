"""
Deterministic k-fold row assignment.
"""
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from src.errors import DataError


@dataclass(frozen=True, eq=False)
class FoldPlan:
    n_folds: int
    seed: int
    assignment: np.ndarray

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_folds)

    def split(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        """(training rows, held-out rows) for one fold."""
        held_out = self.assignment == fold
        return np.flatnonzero(~held_out), np.flatnonzero(held_out)

    def __iter__(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for fold in range(self.n_folds):
            yield self.split(fold)


def make_folds(n_rows: int, k: int, seed: int) -> FoldPlan:
    """Shuffle rows with a seeded PCG64 generator and deal them round-robin into k folds."""
    if not 2 <= k <= n_rows:
        raise DataError(f"Fold count must satisfy 2 <= k <= n_rows (k={k}, n_rows={n_rows})")
    order = np.random.default_rng(seed).permutation(n_rows)
    assignment = np.empty(n_rows, dtype=np.int64)
    assignment[order] = np.arange(n_rows) % k
    assignment.setflags(write=False)
    return FoldPlan(k, seed, assignment)
