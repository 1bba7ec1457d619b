"""
Penalized least-squares solvers.

All penalized fits minimize, on internally standardized features
(population SD), the objective

    (1/n) * ||y - X b||^2 + lam * (||b||_1 + l2_weight * ||b||_2^2)

by cyclic coordinate descent on the Gram matrix. The intercept is never
penalized; coefficients are reported in the original feature units.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from src.errors import DataError, DegenerateSystemError

logger = logging.getLogger(__name__)

CD_TOL = 1e-7
CD_MAX_SWEEPS = 1000
_SCALE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class LinearFit:
    """Intercept plus sparse coefficient vector, with the penalty levels that produced it."""

    intercept: float
    coefficients: np.ndarray
    active_set: Tuple[int, ...]
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    std_coefficients: np.ndarray
    response_mean: float
    lam: float = 0.0
    theta: float = 0.0
    l2_weight: float = 0.0
    kind: str = "ols"

    @property
    def n_features(self) -> int:
        return len(self.coefficients)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.intercept + X @ self.coefficients

    def predict_standardized(self, X: np.ndarray) -> np.ndarray:
        scale = np.where(self.feature_scale > 0, self.feature_scale, 1.0)
        return self.response_mean + ((np.asarray(X, dtype=float) - self.feature_mean) / scale) @ self.std_coefficients

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "intercept": float(self.intercept),
            "coefficients": self.coefficients.tolist(),
            "active_set": list(self.active_set),
            "lambda": float(self.lam),
            "theta": float(self.theta),
            "l2_weight": float(self.l2_weight),
            "feature_mean": self.feature_mean.tolist(),
            "feature_scale": self.feature_scale.tolist(),
            "std_coefficients": self.std_coefficients.tolist(),
            "response_mean": float(self.response_mean),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "LinearFit":
        return cls(
            intercept=float(payload["intercept"]),
            coefficients=np.asarray(payload["coefficients"], dtype=float),
            active_set=tuple(int(k) for k in payload["active_set"]),
            feature_mean=np.asarray(payload["feature_mean"], dtype=float),
            feature_scale=np.asarray(payload["feature_scale"], dtype=float),
            std_coefficients=np.asarray(payload["std_coefficients"], dtype=float),
            response_mean=float(payload["response_mean"]),
            lam=float(payload["lambda"]),
            theta=float(payload["theta"]),
            l2_weight=float(payload["l2_weight"]),
            kind=payload["kind"],
        )


class StandardizedProblem:
    """Standardized design, centered response and their Gram statistics."""

    def __init__(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError(f"Incompatible shapes X{X.shape} and y{y.shape}")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("Linear solvers require finite inputs")
        self.n, self.p = X.shape
        self.mean = X.mean(axis=0) if self.n else np.zeros(self.p)
        scale = X.std(axis=0) if self.n else np.zeros(self.p)
        self.usable = scale > _SCALE_EPS * (1.0 + np.abs(self.mean))
        self.scale = np.where(self.usable, scale, 0.0)
        safe = np.where(self.usable, scale, 1.0)
        self.Xs = np.where(self.usable, (X - self.mean) / safe, 0.0)
        self.y_mean = float(y.mean()) if self.n else 0.0
        self.yc = y - self.y_mean
        n = max(self.n, 1)
        self.gram = self.Xs.T @ self.Xs / n
        self.corr = self.Xs.T @ self.yc / n
        self.yy = float(self.yc @ self.yc) / n

    @property
    def lambda_max(self) -> float:
        """Smallest lambda at which every Lasso coefficient is zero."""
        return float(2.0 * np.max(np.abs(self.corr))) if self.p else 0.0

    def original_coefficients(self, std_coefficients: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(intercepts, coefficients) in original units for one or many standardized vectors."""
        safe = np.where(self.usable, self.scale, 1.0)
        coefficients = np.where(self.usable, std_coefficients / safe, 0.0)
        intercepts = self.y_mean - coefficients @ self.mean
        return intercepts, coefficients

    def make_fit(
        self,
        std_coefficients: np.ndarray,
        kind: str,
        lam: float = 0.0,
        theta: float = 0.0,
        l2_weight: float = 0.0,
        active_set: Optional[Sequence[int]] = None,
    ) -> LinearFit:
        std_coefficients = np.where(self.usable, std_coefficients, 0.0)
        intercept, coefficients = self.original_coefficients(std_coefficients)
        if active_set is None:
            active_set = np.flatnonzero(std_coefficients)
        return LinearFit(
            intercept=float(intercept),
            coefficients=coefficients,
            active_set=tuple(int(k) for k in active_set),
            feature_mean=self.mean,
            feature_scale=self.scale,
            std_coefficients=std_coefficients,
            response_mean=self.y_mean,
            lam=float(lam),
            theta=float(theta),
            l2_weight=float(l2_weight),
            kind=kind,
        )


def penalized_objective(problem: StandardizedProblem, beta: np.ndarray, lam: float, l2_weight: float = 0.0) -> float:
    return (
        problem.yy
        - 2.0 * float(problem.corr @ beta)
        + float(beta @ problem.gram @ beta)
        + lam * (float(np.abs(beta).sum()) + l2_weight * float(beta @ beta))
    )


def coordinate_descent(
    problem: StandardizedProblem,
    lam: float,
    *,
    l2_weight: float = 0.0,
    start: Optional[np.ndarray] = None,
    support: Optional[Sequence[int]] = None,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
    trace: Optional[List[float]] = None,
) -> np.ndarray:
    """
    Cyclic coordinate descent on the standardized problem.

    Only coordinates in ``support`` move; the rest stay at their start value
    (zero by default). Stops when the largest coefficient change of a sweep
    is below ``tol``. If ``trace`` is given, the objective after each sweep
    is appended to it.
    """
    gram = problem.gram
    beta = np.zeros(problem.p) if start is None else np.array(start, dtype=float)
    coords = np.arange(problem.p) if support is None else np.asarray(support, dtype=int)
    coords = [int(j) for j in coords if problem.usable[j]]
    corr = problem.corr.tolist()
    denominators = {j: gram[j, j] + lam * l2_weight for j in coords}
    threshold = lam / 2.0
    g_beta = gram @ beta
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in coords:
            old = beta[j]
            z = corr[j] - g_beta[j] + gram[j, j] * old
            if z > threshold:
                new = (z - threshold) / denominators[j]
            elif z < -threshold:
                new = (z + threshold) / denominators[j]
            else:
                new = 0.0
            if new != old:
                delta = new - old
                beta[j] = new
                g_beta += delta * gram[j]
                if abs(delta) > max_change:
                    max_change = abs(delta)
        if trace is not None:
            trace.append(penalized_objective(problem, beta, lam, l2_weight))
        if max_change < tol:
            return beta
    logger.warning("Coordinate descent hit %d sweeps without reaching tol=%g", max_sweeps, tol)
    return beta


def _support_ols(problem: StandardizedProblem, support: np.ndarray) -> np.ndarray:
    beta = np.zeros(problem.p)
    if support.size:
        solution, *_ = linalg.lstsq(problem.gram[np.ix_(support, support)], problem.corr[support])
        beta[support] = solution
    return beta


def fit_ols(X, y) -> LinearFit:
    """Ordinary least squares with intercept; rank-deficient designs raise DegenerateSystemError."""
    problem = StandardizedProblem(X, y)
    beta = np.zeros(problem.p)
    usable = np.flatnonzero(problem.usable)
    if usable.size:
        if problem.n < usable.size + 1:
            raise DegenerateSystemError(f"OLS needs more rows than features (n={problem.n}, p={usable.size})")
        design = problem.Xs[:, usable]
        singular = linalg.svdvals(design)
        cutoff = max(design.shape) * np.finfo(float).eps * singular[0]
        rank = int((singular > cutoff).sum())
        if rank < usable.size:
            raise DegenerateSystemError(f"Rank-deficient design: rank {rank} < {usable.size} columns")
        solution = linalg.lstsq(design, problem.yc)[0]
        beta[usable] = solution
    return problem.make_fit(beta, kind="ols", active_set=range(problem.p))


def lambda_grid(problem: StandardizedProblem, count: int = 50, min_ratio: float = 1e-3) -> np.ndarray:
    """``count`` log-spaced penalties from lambda_max down to lambda_max * min_ratio."""
    return problem.lambda_max * np.logspace(0.0, np.log10(min_ratio), count)


def _check_descending(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or (grid < 0).any() or (np.diff(grid) > 0).any():
        raise ValueError("Lambda grid must be a non-increasing vector of nonnegative values")
    return grid


def _path(problem, grid, l2_weight, tol, max_sweeps) -> List[np.ndarray]:
    betas = []
    beta = np.zeros(problem.p)
    for lam in grid:
        beta = coordinate_descent(problem, lam, l2_weight=l2_weight, start=beta, tol=tol, max_sweeps=max_sweeps)
        betas.append(beta.copy())
    return betas


def lasso_path(X, y, lambda_grid: Sequence[float], *, tol: float = CD_TOL, max_sweeps: int = CD_MAX_SWEEPS) -> List[LinearFit]:
    """Lasso fits along a descending lambda grid, warm-started from the previous solution."""
    grid = _check_descending(lambda_grid)
    problem = StandardizedProblem(X, y)
    return [
        problem.make_fit(beta, kind="lasso", lam=lam, theta=1.0)
        for lam, beta in zip(grid, _path(problem, grid, 0.0, tol, max_sweeps))
    ]


def _relax(problem, lasso_beta, lam, theta, tol, max_sweeps, start=None) -> np.ndarray:
    support = np.flatnonzero(lasso_beta)
    if theta >= 1.0 or support.size == 0:
        return lasso_beta.copy()
    if theta <= 0.0:
        return _support_ols(problem, support)
    return coordinate_descent(
        problem,
        theta * lam,
        start=lasso_beta if start is None else start,
        support=support,
        tol=tol,
        max_sweeps=max_sweeps,
    )


def fit_relaxed_lasso(X, y, lam: float, theta: float, *, tol: float = CD_TOL, max_sweeps: int = CD_MAX_SWEEPS) -> LinearFit:
    """
    Two-stage relaxed Lasso.

    Stage 1 selects the support with a Lasso at ``lam``; stage 2 refits on that
    support with penalty ``theta * lam``. ``theta = 1`` returns the Lasso fit,
    ``theta = 0`` OLS on the support, ``lam = 0`` OLS on all features.
    """
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if lam == 0:
        ols = fit_ols(X, y)
        return LinearFit(**{**ols.__dict__, "kind": "relaxed_lasso", "theta": float(theta)})
    problem = StandardizedProblem(X, y)
    lasso_beta = coordinate_descent(problem, lam, tol=tol, max_sweeps=max_sweeps)
    beta = _relax(problem, lasso_beta, lam, theta, tol, max_sweeps)
    return problem.make_fit(beta, kind="relaxed_lasso", lam=lam, theta=theta, active_set=np.flatnonzero(lasso_beta))


def relaxed_lasso_path(
    problem: StandardizedProblem,
    grid: Sequence[float],
    thetas: Sequence[float],
    *,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
) -> np.ndarray:
    """Standardized coefficients for every (lambda, theta) pair, shape (len(grid), len(thetas), p)."""
    thetas = np.asarray(thetas, dtype=float)
    out = np.zeros((len(grid), len(thetas), problem.p))
    order = np.argsort(-thetas, kind="stable")
    for li, (lam, lasso_beta) in enumerate(zip(grid, _path(problem, grid, 0.0, tol, max_sweeps))):
        previous = None
        for ti in order:
            beta = _relax(problem, lasso_beta, lam, thetas[ti], tol, max_sweeps, start=previous)
            if 0.0 < thetas[ti] < 1.0:
                previous = beta
            out[li, ti] = beta
    return out


def elastic_net_path(
    problem: StandardizedProblem,
    grid: Sequence[float],
    l2_weight: float,
    *,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
) -> np.ndarray:
    """Standardized elastic-net coefficients along a descending grid, shape (len(grid), p)."""
    betas = _path(problem, _check_descending(grid), l2_weight, tol, max_sweeps)
    return np.array(betas).reshape(len(grid), problem.p)


def fit_elastic_net(X, y, lam: float, l2_weight: float = 0.5, *, tol: float = CD_TOL, max_sweeps: int = CD_MAX_SWEEPS) -> LinearFit:
    """Elastic net: strictly convex for ``l2_weight > 0`` and ``lam > 0``, so the fit is unique even when p > n."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if l2_weight <= 0:
        raise ValueError(f"l2_weight must be positive, got {l2_weight}")
    problem = StandardizedProblem(X, y)
    beta = coordinate_descent(problem, lam, l2_weight=l2_weight, tol=tol, max_sweeps=max_sweeps)
    return problem.make_fit(beta, kind="elastic_net", lam=lam, theta=1.0, l2_weight=l2_weight)


def intercept_only(X, y) -> LinearFit:
    problem = StandardizedProblem(X, y)
    return problem.make_fit(np.zeros(problem.p), kind="intercept")
