"""
k-fold cross-validated selection of (lambda, theta) for the relaxed Lasso and
of lambda for the elastic net.

Selection uses the one-standard-error rule: among grid points whose mean
validation MSE is within one standard error of the minimum, the largest
lambda wins, then the largest theta.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.data.folds import make_folds
from src.linmod.solvers import (
    CD_MAX_SWEEPS,
    CD_TOL,
    LinearFit,
    StandardizedProblem,
    elastic_net_path,
    fit_elastic_net,
    fit_relaxed_lasso,
    intercept_only,
    lambda_grid,
    relaxed_lasso_path,
)

logger = logging.getLogger(__name__)

THETA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
N_LAMBDAS = 50
LAMBDA_MIN_RATIO = 1e-3
ELASTIC_NET_L2 = 0.5


@dataclass(frozen=True, eq=False)
class CvChoice:
    lambda_grid: np.ndarray
    theta_grid: np.ndarray
    k: int
    best_lambda: float
    best_theta: float
    cv_error_table: np.ndarray
    cv_se_table: np.ndarray
    fallback: bool = False


def _validation_errors(X, y, k, seed, solve) -> np.ndarray:
    """Per-fold validation MSE tables; ``solve(problem)`` returns standardized coefficients (..., p)."""
    tables = []
    for train_rows, held_out in make_folds(len(y), k, seed):
        problem = StandardizedProblem(X[train_rows], y[train_rows])
        std = solve(problem)
        intercepts, coefficients = problem.original_coefficients(std)
        predictions = intercepts[..., None] + coefficients @ X[held_out].T
        tables.append(np.mean((predictions - y[held_out]) ** 2, axis=-1))
    return np.array(tables)


def _one_se_choice(errors: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int, int]:
    mean = errors.mean(axis=0)
    se = errors.std(axis=0, ddof=1) / np.sqrt(errors.shape[0])
    best = np.unravel_index(np.argmin(mean), mean.shape)
    eligible = mean <= mean[best] + se[best]
    lambda_index = int(np.flatnonzero(eligible.any(axis=1))[0])
    theta_index = int(np.flatnonzero(eligible[lambda_index])[-1])
    return mean, se, lambda_index, theta_index


def cv_relaxed_lasso(
    X,
    y,
    k: int = 5,
    seed: int = 123,
    *,
    theta_grid: Sequence[float] = THETA_GRID,
    n_lambdas: int = N_LAMBDAS,
    min_ratio: float = LAMBDA_MIN_RATIO,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
) -> Tuple[CvChoice, LinearFit]:
    """Pick (lambda, theta) over the full grid by k-fold CV and refit the winner on all rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    thetas = np.sort(np.asarray(theta_grid, dtype=float))
    full = StandardizedProblem(X, y)
    grid = lambda_grid(full, n_lambdas, min_ratio)
    empty = np.full((len(grid), len(thetas)), np.nan)

    if full.lambda_max == 0.0:
        return CvChoice(grid, thetas, k, 0.0, float(thetas[-1]), empty, empty), intercept_only(X, y)

    if len(y) < 2 * k:
        logger.warning("Only %d rows for %d-fold CV; using lambda_max/2 and theta=1", len(y), k)
        lam = full.lambda_max / 2.0
        choice = CvChoice(grid, thetas, k, lam, 1.0, empty, empty, fallback=True)
        return choice, fit_relaxed_lasso(X, y, lam, 1.0, tol=tol, max_sweeps=max_sweeps)

    errors = _validation_errors(
        X, y, k, seed, lambda problem: relaxed_lasso_path(problem, grid, thetas, tol=tol, max_sweeps=max_sweeps)
    )
    mean, se, li, ti = _one_se_choice(errors)
    choice = CvChoice(grid, thetas, k, float(grid[li]), float(thetas[ti]), mean, se)
    return choice, fit_relaxed_lasso(X, y, choice.best_lambda, choice.best_theta, tol=tol, max_sweeps=max_sweeps)


def cv_elastic_net(
    X,
    y,
    k: int = 5,
    seed: int = 123,
    *,
    l2_weight: float = ELASTIC_NET_L2,
    n_lambdas: int = N_LAMBDAS,
    min_ratio: float = LAMBDA_MIN_RATIO,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
) -> Tuple[CvChoice, LinearFit]:
    """Pick lambda for a fixed l2 weight by k-fold CV and refit on all rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    full = StandardizedProblem(X, y)
    grid = lambda_grid(full, n_lambdas, min_ratio)
    thetas = np.array([1.0])
    empty = np.full((len(grid), 1), np.nan)

    if full.lambda_max == 0.0:
        return CvChoice(grid, thetas, k, 0.0, 1.0, empty, empty), intercept_only(X, y)

    if len(y) < 2 * k:
        logger.warning("Only %d rows for %d-fold CV; elastic net uses lambda_max/2", len(y), k)
        lam = full.lambda_max / 2.0
        choice = CvChoice(grid, thetas, k, lam, 1.0, empty, empty, fallback=True)
        return choice, fit_elastic_net(X, y, lam, l2_weight, tol=tol, max_sweeps=max_sweeps)

    errors = _validation_errors(
        X, y, k, seed, lambda problem: elastic_net_path(problem, grid, l2_weight, tol=tol, max_sweeps=max_sweeps)[:, None, :]
    )
    mean, se, li, _ = _one_se_choice(errors)
    choice = CvChoice(grid, thetas, k, float(grid[li]), 1.0, mean, se)
    return choice, fit_elastic_net(X, y, choice.best_lambda, l2_weight, tol=tol, max_sweeps=max_sweeps)
