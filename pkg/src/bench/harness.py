"""
Cross-validated benchmark harness.

Every (dataset, seed) pair is split into k folds; each model is trained on
k-1 folds (imputation and encoding are fit on those rows only) and scored
by unexplained variance on the held-out fold. Models are ranked per dataset
by mean unexplained variance with midranks for ties.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import rankdata

from src.data.dataset import Dataset, load_csv
from src.data.folds import make_folds
from src.data.synthetic import SyntheticSpec, generate_synthetic, synthetic_variant
from src.errors import DataError, TrustError
from src.tree.grow import grow
from src.tree.model import TrainConfig
from src.tree.predict import predict

logger = logging.getLogger(__name__)

TRUST = "TRUST"
CART_MODE = "CartMode"
LASSO_MODE = "LassoMode"
ModelName = Literal["TRUST", "CartMode", "LassoMode"]


class DatasetEntry(BaseModel):
    """One benchmark dataset: a CSV file, a synthetic spec, a named synthetic variant, or an in-memory table."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    path: Optional[Path] = None
    target: str = "y"
    synthetic: Optional[SyntheticSpec] = None
    variant: Optional[str] = None
    data: Optional[Dataset] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def _one_source(self):
        sources = [self.path, self.synthetic, self.variant, self.data]
        if sum(source is not None for source in sources) != 1:
            raise ValueError(f"Dataset '{self.name}' needs exactly one of path, synthetic, variant or data")
        return self

    def load(self, seed: int, base_dir: Optional[Path] = None) -> Dataset:
        """Synthetic data is regenerated with the benchmark seed; files and tables are seed-independent."""
        if self.synthetic is not None:
            return generate_synthetic(self.synthetic.model_copy(update={"seed": seed}))
        if self.variant is not None:
            return generate_synthetic(synthetic_variant(self.variant, seed))
        if self.data is not None:
            return self.data
        path = self.path if self.path.is_absolute() or base_dir is None else base_dir / self.path
        return load_csv(path, self.target)


class BenchSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    datasets: List[DatasetEntry] = Field(min_length=1)
    models: List[ModelName] = Field(default_factory=lambda: [TRUST, CART_MODE, LASSO_MODE], min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [123, 321], min_length=1)
    folds: int = Field(default=10, ge=2)
    train: TrainConfig = Field(default_factory=TrainConfig)
    base_dir: Optional[Path] = Field(default=None, exclude=True)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BenchSpec":
        """Read a JSON spec file; relative CSV paths resolve against the spec's directory."""
        path = Path(path)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"Benchmark spec not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"Benchmark spec {path} is not valid JSON: {exc}") from None
        return cls.model_validate({**payload, "base_dir": path.parent})


def model_config(name: str, base: TrainConfig) -> TrainConfig:
    """TrainConfig of an internal baseline: CartMode has constant leaves, LassoMode a single theta=1 leaf."""
    if name == TRUST:
        return base
    if name == CART_MODE:
        return base.model_copy(update={"leaf_model": "constant"})
    if name == LASSO_MODE:
        return base.model_copy(update={"max_leaves": 1, "theta_grid": (1.0,)})
    raise ValueError(f"Unknown benchmark model: {name}")


def unexplained_variance(predictions, y_test) -> float:
    """Test MSE over the population variance of the test responses (1 - R^2); NaN when that variance is 0."""
    predictions = np.asarray(predictions, dtype=float)
    y_test = np.asarray(y_test, dtype=float)
    if predictions.shape != y_test.shape or y_test.size < 2:
        raise ValueError("unexplained_variance needs equal-length vectors with at least 2 entries")
    variance = float(np.var(y_test))
    if variance == 0.0:
        logger.warning("Test fold has zero response variance; unexplained variance is undefined")
        return float("nan")
    return float(np.mean((predictions - y_test) ** 2)) / variance


@dataclass(frozen=True)
class CellResult:
    dataset: str
    model: str
    mean_uv: float
    std_uv: float
    n_scores: int
    error: Optional[str] = None

    @property
    def available(self) -> bool:
        return self.error is None and np.isfinite(self.mean_uv)


@dataclass
class BenchResult:
    datasets: List[str]
    models: List[str]
    cells: Dict[Tuple[str, str], CellResult] = field(default_factory=dict)
    ranks: Dict[Tuple[str, str], float] = field(default_factory=dict)

    def cell(self, dataset: str, model: str) -> CellResult:
        return self.cells[(dataset, model)]

    def model_ranks(self, model: str) -> np.ndarray:
        return np.array([self.ranks[(d, model)] for d in self.datasets if (d, model) in self.ranks])

    def mean_rank(self, model: str) -> float:
        ranks = self.model_ranks(model)
        return float(ranks.mean()) if ranks.size else float("nan")

    def std_rank(self, model: str) -> float:
        return _sd(self.model_ranks(model))


def _sd(values: np.ndarray) -> float:
    if values.size == 0:
        return float("nan")
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def _score_model(name: str, config: TrainConfig, data: Dataset, folds: int, seed: int) -> List[float]:
    scores = []
    for fold, (train_rows, test_rows) in enumerate(make_folds(data.n_rows, folds, seed)):
        model = grow(data.take(train_rows), config)
        test = data.take(test_rows)
        uv = unexplained_variance(predict(model, test).values, test.require_target())
        if np.isnan(uv):
            logger.warning("%s: fold %d skipped (zero test variance)", name, fold)
            continue
        scores.append(uv)
    return scores


def rank_models(result: BenchResult) -> None:
    """Midrank available models per dataset by mean UV; N/A cells are left unranked."""
    for dataset in result.datasets:
        available = [m for m in result.models if result.cell(dataset, m).available]
        if not available:
            continue
        ranks = rankdata([result.cell(dataset, m).mean_uv for m in available], method="average")
        for model, rank in zip(available, ranks):
            result.ranks[(dataset, model)] = float(rank)


def run_benchmark(spec: BenchSpec) -> BenchResult:
    result = BenchResult([entry.name for entry in spec.datasets], list(spec.models))
    for entry in spec.datasets:
        scores: Dict[str, List[float]] = {model: [] for model in spec.models}
        errors: Dict[str, str] = {}
        for seed in spec.seeds:
            data = entry.load(seed, spec.base_dir)
            for model in spec.models:
                if model in errors:
                    continue
                try:
                    scores[model] += _score_model(model, model_config(model, spec.train), data, spec.folds, seed)
                except (TrustError, ValueError, np.linalg.LinAlgError) as exc:
                    logger.warning("%s failed on %s: %s", model, entry.name, exc)
                    errors[model] = str(exc)
        for model in spec.models:
            values = np.array(scores[model])
            if model in errors or not values.size:
                cell = CellResult(entry.name, model, float("nan"), float("nan"), 0, errors.get(model, "no scored folds"))
            else:
                cell = CellResult(entry.name, model, float(values.mean()), _sd(values), int(values.size))
            result.cells[(entry.name, model)] = cell
            logger.info("%s / %s: mean UV %.4f", entry.name, model, cell.mean_uv)
    rank_models(result)
    return result
