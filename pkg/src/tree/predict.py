"""
Routing, truncation and prediction for a trained TrustModel.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.data.dataset import MISSING_TOKENS, Dataset, design_matrix
from src.errors import DataError
from src.robust.ood import OodReport, assess_rows
from src.tree.model import LeafStats, SplitRule, TrustModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PredictionResult:
    values: np.ndarray
    raw: np.ndarray
    leaf_ids: np.ndarray
    reports: Optional[List[OodReport]] = None

    def warnings(self, row: int) -> List[str]:
        if self.reports is None:
            return []
        report = self.reports[row]
        messages = [f"range breach {breach.describe()}" for breach in report.breaches]
        if report.is_ood:
            messages.insert(0, f"OOD distance {report.distance:.3f}")
        return messages


def _is_missing(value) -> bool:
    if value is None:
        return True
    if isinstance(value, str):
        return value.strip().lower() in MISSING_TOKENS
    try:
        return bool(math.isnan(value))
    except TypeError:
        return False


def route(row: Sequence, rule: SplitRule) -> str:
    """'left' or 'right' for one row given as per-feature values (None or NaN marks a missing value)."""
    value = row[rule.feature]
    return rule.route_value(value, _is_missing(value))


def truncate(raw, stats: LeafStats, t: float):
    """Clamp to [y_min - t*s_lower, y_max + t*s_upper]; t = +inf disables truncation."""
    if math.isinf(t) and t > 0:
        return raw
    upper = stats.y_max + t * stats.s_upper
    lower = stats.y_min - t * stats.s_lower
    clamped = np.maximum(np.minimum(raw, upper), lower)
    return float(clamped) if np.ndim(clamped) == 0 else clamped


def _check_schema(model: TrustModel, rows: Dataset) -> None:
    expected = model.schema
    if rows.feature_names != expected.names:
        raise DataError(f"Features {list(rows.feature_names)} do not match model features {list(expected.names)}")
    for feature, column in zip(expected.features, rows.columns):
        if feature.kind != column.kind:
            raise DataError(f"Feature '{feature.name}' must be {feature.kind}, got {column.kind}")


def assign_leaves(model: TrustModel, rows: Dataset) -> np.ndarray:
    """Leaf node id of every row."""
    _check_schema(model, rows)
    leaf_ids = np.empty(rows.n_rows, dtype=int)
    stack = [(model.root, np.arange(rows.n_rows))]
    while stack:
        node, subset = stack.pop()
        if node.is_leaf:
            leaf_ids[subset] = node.node_id
            continue
        left = node.rule.goes_left(rows.columns[node.rule.feature].take(subset))
        stack.append((node.left, subset[left]))
        stack.append((node.right, subset[~left]))
    return leaf_ids


def raw_predictions(model: TrustModel, rows: Dataset) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(untruncated leaf-model outputs, leaf ids, encoded design matrix)."""
    leaf_ids = assign_leaves(model, rows)
    X = design_matrix(rows, model.schema, model.imputation)
    raw = np.empty(rows.n_rows)
    for node in model.leaves():
        mask = leaf_ids == node.node_id
        if mask.any():
            raw[mask] = node.leaf.fit.predict(X[mask])
    return raw, leaf_ids, X


def apply_truncation(model: TrustModel, raw: np.ndarray, leaf_ids: np.ndarray, t: float) -> np.ndarray:
    out = np.array(raw, dtype=float)
    for node in model.leaves():
        mask = leaf_ids == node.node_id
        if mask.any():
            out[mask] = truncate(out[mask], node.leaf.stats, t)
    return out


def calibrate_truncation(model: TrustModel, train: Dataset, t_grid: Optional[Sequence[float]] = None) -> float:
    """
    Pick the grid value of t with the lowest training MSE of truncated
    predictions and store it on the model. Ties go to the larger t.
    """
    grid = model.config.truncation_t_grid if t_grid is None else tuple(float(t) for t in t_grid)
    if not grid:
        raise ValueError("Truncation grid is empty")
    y = train.require_target()
    raw, leaf_ids, _ = raw_predictions(model, train)
    best_t, best_mse = None, math.inf
    for t in sorted(grid, reverse=True):
        mse = float(np.mean((apply_truncation(model, raw, leaf_ids, t) - y) ** 2))
        if best_t is None or mse < best_mse:
            best_t, best_mse = t, mse
    model.t = best_t
    logger.debug("Calibrated truncation t=%s (training MSE %.6g)", best_t, best_mse)
    return best_t


def predict(model: TrustModel, rows: Dataset, check_ood: bool = False) -> PredictionResult:
    raw, leaf_ids, X = raw_predictions(model, rows)
    values = apply_truncation(model, raw, leaf_ids, model.t)
    reports = assess_rows(X, model.ood_stats) if check_ood else None
    return PredictionResult(values, raw, leaf_ids, reports)
