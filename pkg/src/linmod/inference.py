"""Approximate per-coefficient p-values for the active set of a linear fit."""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import t as student_t

from src.linmod.solvers import LinearFit

OK = "ok"
INSUFFICIENT_DF = "insufficient_df"
RANK_DEFICIENT = "rank_deficient"
PERFECT_FIT = "perfect_fit"


@dataclass(frozen=True)
class LeafPValues:
    features: Tuple[int, ...]
    estimates: Tuple[float, ...]
    p_values: Optional[Tuple[float, ...]]
    flag: str = OK


def leaf_pvalues(fit: LinearFit, X, y) -> LeafPValues:
    """
    Two-sided t-test p-values from an OLS refit on the fit's active set.

    The refit ignores the penalty, so the values are approximate (they do not
    account for the selection step). Returns ``p_values=None`` with a flag
    when the degrees of freedom or the rank do not allow a test.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    active = [j for j in fit.active_set if fit.coefficients[j] != 0.0]
    n, k = len(y), len(active)
    if k == 0:
        return LeafPValues((), (), (), OK)
    if n < k + 2:
        return LeafPValues(tuple(active), tuple(float(fit.coefficients[j]) for j in active), None, INSUFFICIENT_DF)

    Z = np.column_stack([np.ones(n), X[:, active]])
    solution, _, rank, _ = linalg.lstsq(Z, y)
    estimates = tuple(float(v) for v in solution[1:])
    if rank < k + 1:
        return LeafPValues(tuple(active), estimates, None, RANK_DEFICIENT)

    df = n - k - 1
    residual = y - Z @ solution
    sse = float(residual @ residual)
    if sse <= 1e-24 * max(1.0, float(y @ y)):
        return LeafPValues(tuple(active), estimates, tuple(0.0 for _ in active), PERFECT_FIT)
    covariance = (sse / df) * linalg.pinvh(Z.T @ Z)
    se = np.sqrt(np.maximum(np.diag(covariance)[1:], 1e-300))
    statistics = np.abs(solution[1:]) / se
    p_values = 2.0 * student_t.sf(statistics, df)
    return LeafPValues(tuple(active), estimates, tuple(float(v) for v in p_values), OK)
