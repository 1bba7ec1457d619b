"""
Out-of-distribution scoring with a median-centered Mahalanobis distance and
in-sample range-breach reports.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import chi2

from src.errors import DataError

logger = logging.getLogger(__name__)

DEFAULT_QUANTILE = 0.999
DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True, eq=False)
class OodStats:
    """Training-distribution statistics on the encoded, imputed feature matrix."""

    center: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    threshold: float
    feature_min: np.ndarray
    feature_max: np.ndarray
    feature_names: Tuple[str, ...] = ()
    quantile: float = DEFAULT_QUANTILE

    @property
    def n_features(self) -> int:
        return len(self.center)

    def to_dict(self) -> Dict:
        return {
            "center": self.center.tolist(),
            "covariance": self.covariance.tolist(),
            "precision": self.precision.tolist(),
            "threshold": float(self.threshold),
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "feature_names": list(self.feature_names),
            "quantile": float(self.quantile),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "OodStats":
        p = len(payload["center"])
        return cls(
            center=np.asarray(payload["center"], dtype=float),
            covariance=np.asarray(payload["covariance"], dtype=float).reshape(p, p),
            precision=np.asarray(payload["precision"], dtype=float).reshape(p, p),
            threshold=float(payload["threshold"]),
            feature_min=np.asarray(payload["feature_min"], dtype=float),
            feature_max=np.asarray(payload["feature_max"], dtype=float),
            feature_names=tuple(payload.get("feature_names", ())),
            quantile=float(payload.get("quantile", DEFAULT_QUANTILE)),
        )


@dataclass(frozen=True)
class Breach:
    feature: str
    index: int
    direction: str  # "below" | "above"
    breach_pct: float

    def describe(self) -> str:
        return f"{self.feature}:{self.direction}:{self.breach_pct:.2f}%"


@dataclass(frozen=True)
class OodReport:
    distance: float
    is_ood: bool
    breaches: Tuple[Breach, ...] = field(default_factory=tuple)


def fit_ood_stats(
    train_X,
    quantile: float = DEFAULT_QUANTILE,
    *,
    feature_names: Optional[Sequence[str]] = None,
    ridge: float = DEFAULT_RIDGE,
) -> OodStats:
    """
    Median center, ridge-regularized sample covariance and a chi-squared
    distance cutoff (square root of the ``quantile`` at p degrees of freedom).
    """
    X = np.asarray(train_X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("OOD statistics need at least 2 training rows")
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must lie in (0, 1), got {quantile}")
    p = X.shape[1]
    covariance = np.atleast_2d(np.cov(X, rowvar=False)).reshape(p, p)
    mean_diagonal = float(np.mean(np.diag(covariance))) if p else 0.0
    epsilon = ridge * mean_diagonal if mean_diagonal > 0 else ridge
    covariance = covariance + epsilon * np.eye(p)
    precision = linalg.inv(covariance) if p else np.zeros((0, 0))
    precision = (precision + precision.T) / 2.0
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j + 1}" for j in range(p))
    return OodStats(
        center=np.median(X, axis=0),
        covariance=covariance,
        precision=precision,
        threshold=float(np.sqrt(chi2.ppf(quantile, max(p, 1)))),
        feature_min=X.min(axis=0),
        feature_max=X.max(axis=0),
        feature_names=names,
        quantile=quantile,
    )


def ood_score(x, stats: OodStats):
    """Median-centered Mahalanobis distance of one row (float) or of every row of a matrix (array)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != stats.n_features:
        raise DataError(f"Expected {stats.n_features} features, got {x.shape[-1]}")
    delta = x - stats.center
    squared = np.einsum("...i,ij,...j->...", delta, stats.precision, delta)
    distance = np.sqrt(np.maximum(squared, 0.0))
    return float(distance) if distance.ndim == 0 else distance


def range_breach(x, stats: OodStats) -> List[Breach]:
    """Features outside the in-sample range, with the overshoot as a percentage of that range."""
    x = np.asarray(x, dtype=float)
    span = stats.feature_max - stats.feature_min
    span = np.where(span > 0, span, 1.0)
    breaches = []
    for j in range(stats.n_features):
        if x[j] < stats.feature_min[j]:
            direction, excess = "below", stats.feature_min[j] - x[j]
        elif x[j] > stats.feature_max[j]:
            direction, excess = "above", x[j] - stats.feature_max[j]
        else:
            continue
        name = stats.feature_names[j] if j < len(stats.feature_names) else f"x{j + 1}"
        breaches.append(Breach(name, j, direction, float(100.0 * excess / span[j])))
    return breaches


def assess_rows(X, stats: OodStats) -> List[OodReport]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    distances = ood_score(X, stats)
    reports = []
    for row, distance in zip(X, np.atleast_1d(distances)):
        report = OodReport(float(distance), bool(distance > stats.threshold), tuple(range_breach(row, stats)))
        reports.append(report)
    flagged = sum(report.is_ood for report in reports)
    if flagged:
        logger.warning("%d of %d rows exceed the OOD distance threshold %.3f", flagged, len(reports), stats.threshold)
    return reports
