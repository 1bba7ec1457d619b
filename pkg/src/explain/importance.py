"""
Ghost-variable feature importance.

A feature's raw score is the ratio of the model's MSE when the feature is
replaced by its best linear reconstruction from all other features (its
"ghost") to the original MSE. Raw scores are debiased by dividing by the
scores of a model retrained on a contaminated (permuted and noised)
response, and judged against a null band built by repeating the whole
pipeline on contaminated responses.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import linalg
from scipy.stats import kendalltau

from src.data.dataset import Column, Dataset, design_matrix
from src.tree.grow import grow
from src.tree.model import TrainConfig, TrustModel
from src.tree.predict import predict

logger = logging.getLogger(__name__)

MSE_FLOOR = 1e-12
QUANTILES = (0.90, 0.95, 0.99)


class ImportanceConfig(BaseModel):
    """Null-band and debiasing settings. ``replications=0`` skips the null band."""

    model_config = ConfigDict(frozen=True)

    replications: int = Field(default=100, ge=0)
    level: float = 0.95
    seed: int = 123
    contamination: float = Field(default=1.0, gt=0.0)

    @field_validator("replications")
    @classmethod
    def _check_replications(cls, value):
        if 0 < value < 20:
            raise ValueError("replications must be 0 (no null band) or at least 20")
        return value

    @field_validator("level")
    @classmethod
    def _check_level(cls, value):
        if value not in QUANTILES:
            raise ValueError(f"level must be one of {QUANTILES}")
        return value


@dataclass(frozen=True)
class KendallTau:
    value: float
    all_tied: bool = False

    @property
    def sign(self) -> str:
        return "+" if self.value > 0 else ("-" if self.value < 0 else "0")


@dataclass(frozen=True)
class FeatureImportance:
    feature: str
    raw_score: float
    debiased_score: float
    q90: float
    q95: float
    q99: float
    significant: bool
    tau: float
    tau_sign: str


@dataclass(frozen=True)
class ImportanceReport:
    features: Tuple[FeatureImportance, ...]
    level: float = 0.95
    replications: int = 0
    degenerate_fit: bool = False

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "feature": f.feature,
                    "raw": f.raw_score,
                    "debiased": f.debiased_score,
                    "q90": f.q90,
                    "q95": f.q95,
                    "q99": f.q99,
                    "significant": f.significant,
                    "tau": f.tau,
                }
                for f in self.features
            ],
            columns=["feature", "raw", "debiased", "q90", "q95", "q99", "significant", "tau"],
        )


def ghost_column(X, j: int) -> np.ndarray:
    """Fitted values of an intercept-plus-OLS regression of column ``j`` on the other columns."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    target = X[:, j]
    if p < 2:
        return np.full(n, target.mean())
    others = np.delete(X, j, axis=1)
    Z = np.column_stack([np.ones(n), others - others.mean(axis=0)])
    # lstsq returns the minimum-norm solution when the other columns are collinear
    solution, *_ = linalg.lstsq(Z, target)
    return Z @ solution


def _ghost_feature(model: TrustModel, data: Dataset, X: np.ndarray, j: int) -> Column:
    """Numeric features get their ghost directly; categorical ones are rebuilt indicator-wise and snapped to the top level."""
    layout = model.schema.encoded_layout()
    column = data.columns[j]
    block = [k for k, (index, _) in enumerate(layout) if index == j]
    if not block:
        return column
    others = np.delete(X, block, axis=1)
    fitted = np.column_stack([ghost_column(np.column_stack([X[:, k], others]), 0) for k in block])
    if column.is_numeric:
        return Column.numeric(fitted[:, 0], np.zeros(data.n_rows, bool))
    snapped = [layout[block[i]][1] for i in np.argmax(fitted, axis=1)]
    codes = [column.levels.index(level) for level in snapped]
    return Column.categorical(codes, column.levels, np.zeros(data.n_rows, bool))


def _mse(model: TrustModel, data: Dataset, y: np.ndarray) -> float:
    return float(np.mean((predict(model, data).values - y) ** 2))


def ghost_scores(model: TrustModel, data: Dataset) -> np.ndarray:
    """MSE with each original feature replaced by its ghost, divided by the original MSE."""
    if data.n_rows == 0:
        raise ValueError("Ghost scores need a nonempty dataset")
    y = data.require_target()
    baseline = _mse(model, data, y)
    if baseline < MSE_FLOOR:
        logger.warning("Degenerate fit: original MSE %.3g is below %.0e; scores use the floor", baseline, MSE_FLOOR)
    denominator = max(baseline, MSE_FLOOR)
    X = design_matrix(data, model.schema, model.imputation)
    scores = np.empty(data.n_features)
    for j, name in enumerate(data.feature_names):
        substituted = data.with_column(name, _ghost_feature(model, data, X, j))
        scores[j] = _mse(model, substituted, y) / denominator
    return scores


def contaminate_response(y, seed: int, contamination: float = 1.0) -> np.ndarray:
    """Permuted response plus i.i.d. N(0, contamination / var(y)) noise."""
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise ValueError("Contamination needs at least 2 responses")
    rng = np.random.default_rng(seed)
    permuted = rng.permutation(y)
    variance = float(np.var(y, ddof=1))
    if variance <= 0.0:
        logger.warning("Response has zero variance; contamination is a permutation only")
        return permuted
    return permuted + rng.normal(0.0, np.sqrt(contamination / variance), size=y.size)


def debias_scores(
    config: TrainConfig, data: Dataset, raw: np.ndarray, seed: int, contamination: float = 1.0
) -> np.ndarray:
    """Divide raw scores by the ghost scores of a model retrained on a contaminated response."""
    contaminated = data.with_target(contaminate_response(data.require_target(), seed, contamination))
    null_model = grow(contaminated, config)
    null_scores = ghost_scores(null_model, contaminated)
    return np.asarray(raw, dtype=float) / np.maximum(null_scores, MSE_FLOOR)


@dataclass(frozen=True, eq=False)
class NullBand:
    samples: np.ndarray
    q90: np.ndarray
    q95: np.ndarray
    q99: np.ndarray

    def at(self, level: float) -> np.ndarray:
        return {0.90: self.q90, 0.95: self.q95, 0.99: self.q99}[level]


def null_band(
    config: TrainConfig, data: Dataset, replications: int, seed: int, contamination: float = 1.0
) -> NullBand:
    """
    Debiased ghost scores under the null of a response independent of every
    covariate, repeated ``replications`` times; per-feature q90/q95/q99.
    Replication r draws its null response with seed + 1 + 2r and debiases with seed + 2 + 2r.
    """
    if replications < 20:
        raise ValueError(f"Null band needs at least 20 replications, got {replications}")
    logger.warning("Null band retrains the model %d times", 2 * replications)
    y = data.require_target()
    samples = np.empty((replications, data.n_features))
    for r in range(replications):
        null_data = data.with_target(contaminate_response(y, seed + 1 + 2 * r, contamination))
        null_model = grow(null_data, config)
        raw = ghost_scores(null_model, null_data)
        samples[r] = debias_scores(config, null_data, raw, seed + 2 + 2 * r, contamination)
    q90, q95, q99 = np.quantile(samples, QUANTILES, axis=0)
    return NullBand(samples, q90, q95, q99)


def kendall_tau(x, y) -> KendallTau:
    """Tie-corrected Kendall tau-b; all-tied input gives 0 with ``all_tied`` set."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("kendall_tau needs two equal-length vectors with at least 2 entries")
    result = kendalltau(x, y, variant="b")
    value = float(result.statistic if hasattr(result, "statistic") else result[0])
    if np.isnan(value):
        return KendallTau(0.0, True)
    return KendallTau(value)


def _feature_tau(column: Column, y: np.ndarray) -> KendallTau:
    # categorical levels carry no order to correlate with
    present = ~column.missing
    if not column.is_numeric or present.sum() < 2:
        return KendallTau(0.0, True)
    return kendall_tau(column.values[present], y[present])


def ghost_importance(model: TrustModel, data: Dataset, config: Optional[ImportanceConfig] = None) -> ImportanceReport:
    config = config or ImportanceConfig()
    y = data.require_target()
    raw = ghost_scores(model, data)
    degenerate = _mse(model, data, y) < MSE_FLOOR
    debiased = debias_scores(model.config, data, raw, config.seed, config.contamination)
    nan = np.full(data.n_features, np.nan)
    if config.replications:
        band = null_band(model.config, data, config.replications, config.seed, config.contamination)
        q90, q95, q99, threshold = band.q90, band.q95, band.q99, band.at(config.level)
    else:
        q90 = q95 = q99 = threshold = nan

    rows: List[FeatureImportance] = []
    for j, name in enumerate(data.feature_names):
        tau = _feature_tau(data.columns[j], y)
        rows.append(
            FeatureImportance(
                feature=name,
                raw_score=float(raw[j]),
                debiased_score=float(debiased[j]),
                q90=float(q90[j]),
                q95=float(q95[j]),
                q99=float(q99[j]),
                significant=bool(debiased[j] > threshold[j]) if config.replications else False,
                tau=tau.value,
                tau_sign=tau.sign,
            )
        )
    return ImportanceReport(tuple(rows), config.level, config.replications, degenerate)
