"""
Tree data model: split rules (including the three missing-value variants),
leaves, training configuration and the trained TrustModel.
"""
import math
from dataclasses import dataclass
from typing import ClassVar, Dict, Iterator, List, Literal, Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.data.dataset import Column, ImputationStats, Schema
from src.linmod.cv import ELASTIC_NET_L2, LAMBDA_MIN_RATIO, N_LAMBDAS, THETA_GRID
from src.linmod.solvers import LinearFit
from src.robust.ood import OodStats

LEFT = "left"
RIGHT = "right"
DEFAULT_T_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0, 8.0, math.inf)


def json_float(value: float):
    """JSON-safe float: non-finite values become the strings 'inf', '-inf', 'nan'."""
    value = float(value)
    if math.isfinite(value):
        return value
    return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")


class TrainConfig(BaseModel):
    """Growth, leaf-model and truncation settings; echoed into every model file."""

    model_config = ConfigDict(frozen=True)

    max_leaves: int = Field(default=16, ge=1)
    cv_folds: int = Field(default=5, ge=2)
    seed: int = 123
    truncation_t_grid: Tuple[float, ...] = DEFAULT_T_GRID
    min_split_gain: float = Field(default=0.01, ge=0.0)
    leaf_model: Literal["relaxed_lasso", "constant"] = "relaxed_lasso"
    theta_grid: Tuple[float, ...] = THETA_GRID
    n_lambdas: int = Field(default=N_LAMBDAS, ge=1)
    lambda_min_ratio: float = Field(default=LAMBDA_MIN_RATIO, gt=0.0, le=1.0)
    l2_weight: float = Field(default=ELASTIC_NET_L2, gt=0.0)
    max_thresholds: int = Field(default=32, ge=1)
    ols_proxy_max_features: int = Field(default=25, ge=0)
    ood_quantile: float = Field(default=0.999, gt=0.0, lt=1.0)

    @field_validator("truncation_t_grid", mode="before")
    @classmethod
    def _parse_grid(cls, value):
        grid = tuple(float(v) for v in value)
        if not grid:
            raise ValueError("truncation_t_grid must not be empty")
        if any(math.isnan(v) or v == -math.inf for v in grid):
            raise ValueError("truncation_t_grid accepts finite values and +inf only")
        return grid

    @field_validator("theta_grid")
    @classmethod
    def _check_thetas(cls, value):
        if not value or any(not 0.0 <= v <= 1.0 for v in value):
            raise ValueError("theta_grid needs values in [0, 1]")
        return value

    def to_dict(self) -> Dict:
        payload = self.model_dump()
        payload["truncation_t_grid"] = [json_float(v) for v in self.truncation_t_grid]
        payload["theta_grid"] = list(self.theta_grid)
        return payload


@dataclass(frozen=True)
class SplitRule:
    """Base split; ``default_left`` routes rows the rule cannot place."""

    feature: int
    name: str
    default_left: bool = True

    tag: ClassVar[str] = ""

    def goes_left(self, column: Column) -> np.ndarray:
        raise NotImplementedError

    def route_value(self, value, missing: bool) -> str:
        raise NotImplementedError

    def payload(self) -> Dict:
        return {}

    def to_dict(self) -> Dict:
        return {"type": self.tag, "feature": self.feature, "name": self.name, "default_left": self.default_left, **self.payload()}


@dataclass(frozen=True)
class NumericSplit(SplitRule):
    threshold: float = 0.0
    tag: ClassVar[str] = "numeric"

    def goes_left(self, column):
        return np.where(column.missing, self.default_left, column.values <= self.threshold)

    def route_value(self, value, missing):
        if missing:
            return LEFT if self.default_left else RIGHT
        return LEFT if value <= self.threshold else RIGHT

    def payload(self):
        return {"threshold": self.threshold}


@dataclass(frozen=True)
class CategoricalSplit(SplitRule):
    left_levels: Tuple[str, ...] = ()
    right_levels: Tuple[str, ...] = ()
    tag: ClassVar[str] = "categorical"

    def goes_left(self, column):
        names = column.level_names()
        left = np.isin(names, self.left_levels)
        known = left | np.isin(names, self.right_levels)
        return np.where(known, left, self.default_left)

    def route_value(self, value, missing):
        if not missing and value in self.left_levels:
            return LEFT
        if not missing and value in self.right_levels:
            return RIGHT
        return LEFT if self.default_left else RIGHT

    def payload(self):
        return {"left_levels": list(self.left_levels), "right_levels": list(self.right_levels)}


@dataclass(frozen=True)
class MissingOnlySplit(SplitRule):
    """Left iff the feature is missing."""

    tag: ClassVar[str] = "missing_only"

    def goes_left(self, column):
        return column.missing.copy()

    def route_value(self, value, missing):
        return LEFT if missing else RIGHT


@dataclass(frozen=True)
class NotMissingAndBelowSplit(SplitRule):
    """Left iff the feature is present and at most the threshold."""

    threshold: float = 0.0
    tag: ClassVar[str] = "not_missing_and_below"

    def goes_left(self, column):
        return ~column.missing & (np.nan_to_num(column.values, nan=np.inf) <= self.threshold)

    def route_value(self, value, missing):
        return LEFT if (not missing and value <= self.threshold) else RIGHT

    def payload(self):
        return {"threshold": self.threshold}


@dataclass(frozen=True)
class MissingOrBelowSplit(SplitRule):
    """Left iff the feature is missing or at most the threshold."""

    threshold: float = 0.0
    tag: ClassVar[str] = "missing_or_below"

    def goes_left(self, column):
        return column.missing | (np.nan_to_num(column.values, nan=np.inf) <= self.threshold)

    def route_value(self, value, missing):
        return LEFT if (missing or value <= self.threshold) else RIGHT

    def payload(self):
        return {"threshold": self.threshold}


RULE_TYPES = {cls.tag: cls for cls in (NumericSplit, CategoricalSplit, MissingOnlySplit, NotMissingAndBelowSplit, MissingOrBelowSplit)}


def rule_from_dict(payload: Mapping) -> SplitRule:
    cls = RULE_TYPES[payload["type"]]
    kwargs = {"feature": int(payload["feature"]), "name": payload["name"], "default_left": bool(payload["default_left"])}
    if "threshold" in payload:
        kwargs["threshold"] = float(payload["threshold"])
    if cls is CategoricalSplit:
        kwargs["left_levels"] = tuple(payload["left_levels"])
        kwargs["right_levels"] = tuple(payload["right_levels"])
    return cls(**kwargs)


@dataclass(frozen=True)
class LeafStats:
    """Response bounds and asymmetric dispersion of a leaf, plus its feature means."""

    y_min: float
    y_max: float
    s_lower: float
    s_upper: float
    n_leaf: int
    y_mean: float
    feature_means: Tuple[float, ...] = ()

    def to_dict(self) -> Dict:
        return {
            "y_min": self.y_min,
            "y_max": self.y_max,
            "s_lower": self.s_lower,
            "s_upper": self.s_upper,
            "n_leaf": self.n_leaf,
            "y_mean": self.y_mean,
            "feature_means": list(self.feature_means),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "LeafStats":
        return cls(
            float(payload["y_min"]),
            float(payload["y_max"]),
            float(payload["s_lower"]),
            float(payload["s_upper"]),
            int(payload["n_leaf"]),
            float(payload["y_mean"]),
            tuple(float(v) for v in payload.get("feature_means", ())),
        )


def leaf_stats(y: np.ndarray, X: np.ndarray) -> LeafStats:
    """S' is the SD below the leaf median, S the SD at or above it; sides with < 2 rows get 0."""
    median = np.median(y)
    lower, upper = y[y < median], y[y >= median]
    return LeafStats(
        y_min=float(y.min()),
        y_max=float(y.max()),
        s_lower=float(np.std(lower, ddof=1)) if len(lower) >= 2 else 0.0,
        s_upper=float(np.std(upper, ddof=1)) if len(upper) >= 2 else 0.0,
        n_leaf=int(len(y)),
        y_mean=float(y.mean()),
        feature_means=tuple(float(v) for v in X.mean(axis=0)),
    )


@dataclass(frozen=True)
class Leaf:
    fit: LinearFit
    stats: LeafStats
    p_values: Optional[Tuple[float, ...]] = None
    p_value_flag: str = "ok"
    p_value_features: Tuple[int, ...] = ()

    def p_value(self, feature: int) -> Optional[float]:
        if self.p_values is None or feature not in self.p_value_features:
            return None
        return self.p_values[self.p_value_features.index(feature)]

    def to_dict(self) -> Dict:
        return {
            "fit": self.fit.to_dict(),
            "stats": self.stats.to_dict(),
            "p_values": None if self.p_values is None else list(self.p_values),
            "p_value_flag": self.p_value_flag,
            "p_value_features": list(self.p_value_features),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "Leaf":
        p_values = payload.get("p_values")
        return cls(
            LinearFit.from_dict(payload["fit"]),
            LeafStats.from_dict(payload["stats"]),
            None if p_values is None else tuple(float(v) for v in p_values),
            payload.get("p_value_flag", "ok"),
            tuple(int(k) for k in payload.get("p_value_features", ())),
        )


@dataclass
class Node:
    node_id: int
    depth: int
    n_rows: int
    rule: Optional[SplitRule] = None
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    leaf: Optional[Leaf] = None

    @property
    def is_leaf(self) -> bool:
        return self.rule is None

    def child(self, branch: str) -> "Node":
        return self.left if branch == LEFT else self.right

    def walk(self) -> Iterator["Node"]:
        yield self
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()


@dataclass
class TrustModel:
    """Trained tree with per-leaf linear models, truncation constant and OOD statistics."""

    root: Node
    schema: Schema
    imputation: ImputationStats
    ood_stats: OodStats
    config: TrainConfig
    t: float = math.inf
    n_train: int = 0
    root_model: str = "relaxed_lasso"

    @property
    def target_name(self) -> str:
        return self.schema.target_name

    @property
    def encoded_names(self) -> List[str]:
        return self.schema.encoded_names()

    def leaves(self) -> List[Node]:
        return [node for node in self.root.walk() if node.is_leaf]

    @property
    def leaf_count(self) -> int:
        return len(self.leaves())

    @property
    def depth(self) -> int:
        return max(node.depth for node in self.root.walk())

    def node(self, node_id: int) -> Node:
        for node in self.root.walk():
            if node.node_id == node_id:
                return node
        raise KeyError(f"No node with id {node_id}")
