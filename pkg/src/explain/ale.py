"""First-order accumulated local effects (ALE) for numeric features."""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd

from src.data.dataset import Column, Dataset
from src.errors import DataError
from src.tree.model import TrustModel
from src.tree.predict import predict

logger = logging.getLogger(__name__)

DEFAULT_BINS = 20


@dataclass(frozen=True, eq=False)
class AleCurve:
    feature: int
    name: str
    bin_edges: np.ndarray
    accumulated_effects: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.bin_edges) - 1

    def value_at(self, x) -> np.ndarray:
        return np.interp(x, self.bin_edges, self.accumulated_effects)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"edge": self.bin_edges, "effect": self.accumulated_effects})


def _moved(model: TrustModel, rows: Dataset, name: str, value: float) -> np.ndarray:
    column = Column.numeric(np.full(rows.n_rows, value), np.zeros(rows.n_rows, bool))
    return predict(model, rows.with_column(name, column)).values


def ale_curve(model: TrustModel, data: Dataset, feature: Union[int, str], bins: int = DEFAULT_BINS) -> AleCurve:
    """
    Quantile bins over the present values of ``feature``; the local effect of a
    bin is the mean prediction change when its rows move from the lower to the
    upper edge. Effects are accumulated and centered to mean zero over the rows.
    Tied quantiles merge bins, so ``n_bins`` can be below ``bins``.
    """
    if bins < 1:
        raise ValueError(f"bins must be at least 1, got {bins}")
    j = data.index(feature) if isinstance(feature, str) else int(feature)
    if not 0 <= j < data.n_features:
        raise DataError(f"Feature index {j} out of range")
    name = data.feature_names[j]
    column = data.columns[j]
    if not column.is_numeric:
        raise DataError(f"ALE needs a numeric feature; '{name}' is categorical")

    present = np.flatnonzero(~column.missing)
    values = column.values[present]
    if values.size == 0 or np.ptp(values) == 0.0:
        anchor = float(values[0]) if values.size else 0.0
        logger.info("Feature '%s' is constant; ALE is flat", name)
        return AleCurve(j, name, np.full(bins + 1, anchor), np.zeros(bins + 1))

    edges = np.unique(np.quantile(values, np.linspace(0.0, 1.0, bins + 1)))
    assignment = np.clip(np.searchsorted(edges, values, side="left") - 1, 0, len(edges) - 2)
    local = np.zeros(len(edges) - 1)
    for k in range(len(edges) - 1):
        members = present[assignment == k]
        if members.size == 0:
            continue
        rows = data.take(members)
        local[k] = float(np.mean(_moved(model, rows, name, edges[k + 1]) - _moved(model, rows, name, edges[k])))

    effects = np.concatenate([[0.0], np.cumsum(local)])
    effects -= float(np.mean(np.interp(values, edges, effects)))
    return AleCurve(j, name, edges, effects)
