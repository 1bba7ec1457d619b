"""
Local explanations: root-to-leaf path, leaf coefficients with approximate
p-values, linear SHAP attributions and a contrast with the rows that receive
the highest and lowest predictions.
"""
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from src.data.dataset import Dataset
from src.errors import DataError
from src.linmod.solvers import LinearFit
from src.tree.model import LEFT, RIGHT, Node, SplitRule, TrustModel
from src.tree.predict import apply_truncation, raw_predictions

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ShapValues:
    attributions: np.ndarray
    base: float
    names: Tuple[str, ...] = ()

    def total(self) -> float:
        return self.base + float(np.sum(self.attributions))


@dataclass(frozen=True)
class PathStep:
    rule: SplitRule
    branch: str
    value: object  # float, level name, or None when missing


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    estimate: float
    p_value: Optional[float]


@dataclass(frozen=True)
class Extremes:
    highest_row: int
    lowest_row: int
    highest_prediction: float
    lowest_prediction: float
    highest_values: Tuple[object, ...]
    lowest_values: Tuple[object, ...]


@dataclass(frozen=True, eq=False)
class LocalExplanation:
    row_index: int
    leaf_id: int
    path: Tuple[PathStep, ...]
    leaf_coefficients: Tuple[CoefficientRow, ...]
    shap: ShapValues
    extremes: Extremes
    prediction: float
    raw_prediction: float
    row_values: Tuple[object, ...]
    feature_names: Tuple[str, ...]
    encoded_features: Tuple[int, ...]
    p_value_flag: str
    summary_text: str = ""


def shap_linear(fit: LinearFit, x, leaf_background) -> ShapValues:
    """
    Exact Shapley values of a linear model under feature independence:
    beta_j * (x_j - background mean_j). ``leaf_background`` is either the
    background rows or their column means.
    """
    background = np.asarray(leaf_background, dtype=float)
    if background.size == 0:
        raise ValueError("SHAP needs a nonempty background")
    mean = background.mean(axis=0) if background.ndim == 2 else background
    x = np.asarray(x, dtype=float)
    attributions = fit.coefficients * (x - mean)
    base = float(fit.intercept + fit.coefficients @ mean)
    return ShapValues(attributions, base)


def _row_values(data: Dataset, row: int) -> Tuple[object, ...]:
    values = []
    for column in data.columns:
        if column.missing[row]:
            values.append(None)
        elif column.is_numeric:
            values.append(float(column.values[row]))
        else:
            values.append(column.levels[int(column.values[row])])
    return tuple(values)


def root_to_leaf(model: TrustModel, data: Dataset, row: int) -> Tuple[List[PathStep], Node]:
    values = _row_values(data, row)
    single = data.take([row])
    steps: List[PathStep] = []
    node = model.root
    while not node.is_leaf:
        rule = node.rule
        left = bool(rule.goes_left(single.columns[rule.feature])[0])
        branch = LEFT if left else RIGHT
        steps.append(PathStep(rule, branch, values[rule.feature]))
        node = node.child(branch)
    return steps, node


def _format_value(value) -> str:
    if value is None:
        return "missing"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def summarize(expl: LocalExplanation, target_name: str = "y") -> str:
    """Deterministic template summary naming the leaf, the two largest |SHAP| features and both extremes."""
    names = expl.shap.names
    order = sorted(range(len(names)), key=lambda k: (-abs(expl.shap.attributions[k]), k))
    top = [k for k in order if expl.shap.attributions[k] != 0.0][:2]
    lines = [
        f"Row {expl.row_index} falls in leaf {expl.leaf_id} after {len(expl.path)} split(s); "
        f"predicted {target_name} = {expl.prediction:.6g} (leaf model {expl.raw_prediction:.6g}, base {expl.shap.base:.6g}).",
    ]
    if top:
        parts = [f"{names[k]} ({expl.shap.attributions[k]:+.4g})" for k in top]
        lines.append("Largest contributions: " + ", ".join(parts) + ".")
    else:
        lines.append("No feature moves this prediction away from the leaf base value.")

    contrasted = sorted({expl.encoded_features[k] for k in top})
    for label, row, prediction, values in (
        ("highest", expl.extremes.highest_row, expl.extremes.highest_prediction, expl.extremes.highest_values),
        ("lowest", expl.extremes.lowest_row, expl.extremes.lowest_prediction, expl.extremes.lowest_values),
    ):
        contrast = [
            f"{expl.feature_names[j]} {_format_value(expl.row_values[j])} vs {_format_value(values[j])}"
            for j in contrasted
        ]
        sentence = f"The {label}-predicted row {row} ({target_name} = {prediction:.6g})"
        lines.append(sentence + (": " + "; ".join(contrast) + "." if contrast else "."))
    return "\n".join(lines)


def local_explanation(model: TrustModel, data: Dataset, row: int) -> LocalExplanation:
    if not 0 <= row < data.n_rows:
        raise DataError(f"Row {row} out of range for {data.n_rows} rows")
    raw, leaf_ids, X = raw_predictions(model, data)
    predictions = apply_truncation(model, raw, leaf_ids, model.t)
    path, node = root_to_leaf(model, data, row)
    leaf = node.leaf
    names = tuple(model.encoded_names)

    shap = shap_linear(leaf.fit, X[row], np.asarray(leaf.stats.feature_means))
    shap = ShapValues(shap.attributions, shap.base, names)
    coefficients = tuple(
        CoefficientRow(names[j], float(leaf.fit.coefficients[j]), leaf.p_value(j))
        for j in np.flatnonzero(leaf.fit.coefficients)
    )
    highest, lowest = int(np.argmax(predictions)), int(np.argmin(predictions))
    extremes = Extremes(
        highest,
        lowest,
        float(predictions[highest]),
        float(predictions[lowest]),
        _row_values(data, highest),
        _row_values(data, lowest),
    )
    expl = LocalExplanation(
        row_index=row,
        leaf_id=node.node_id,
        path=tuple(path),
        leaf_coefficients=coefficients,
        shap=shap,
        extremes=extremes,
        prediction=float(predictions[row]),
        raw_prediction=float(raw[row]),
        row_values=_row_values(data, row),
        feature_names=tuple(data.feature_names),
        encoded_features=tuple(index for index, _ in model.schema.encoded_layout()),
        p_value_flag=leaf.p_value_flag,
    )
    return replace(expl, summary_text=summarize(expl, model.target_name))
