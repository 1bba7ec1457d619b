"""
Column-typed tabular dataset with explicit missing masks, CSV ingestion,
one-hot encoding and median imputation.
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import DataError

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
MISSING_TOKENS = frozenset({"", "na", "nan", "null"})
MISSING_CODE = -1


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Column:
    """One feature column; categorical values are codes into ``levels``."""

    kind: str
    values: np.ndarray
    missing: np.ndarray
    levels: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"Unknown column kind: {self.kind}")
        values = np.asarray(self.values, dtype=float if self.kind == NUMERIC else np.int64)
        missing = np.asarray(self.missing, dtype=bool)
        if values.shape != missing.shape or values.ndim != 1:
            raise DataError("Column values and missing mask must be 1-D with equal length")
        if self.kind == NUMERIC:
            values = np.where(missing, np.nan, values)
        else:
            values = np.where(missing, MISSING_CODE, values)
            present = values[~missing]
            if present.size and (present.min() < 0 or present.max() >= len(self.levels)):
                raise DataError("Categorical codes must reference the level table")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "missing", _frozen(missing))
        object.__setattr__(self, "levels", tuple(str(level) for level in self.levels))

    @classmethod
    def numeric(cls, values, missing=None) -> "Column":
        values = np.asarray(values, dtype=float)
        if missing is None:
            missing = np.isnan(values)
        return cls(NUMERIC, values, missing)

    @classmethod
    def categorical(cls, codes, levels: Sequence[str], missing=None) -> "Column":
        codes = np.asarray(codes, dtype=np.int64)
        if missing is None:
            missing = codes < 0
        return cls(CATEGORICAL, codes, missing, tuple(levels))

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def __len__(self) -> int:
        return len(self.values)

    def take(self, rows) -> "Column":
        return Column(self.kind, self.values[rows], self.missing[rows], self.levels)

    def level_names(self) -> np.ndarray:
        """Level name per row (None where missing)."""
        names = np.array(self.levels + (None,), dtype=object)
        return names[np.where(self.missing, len(self.levels), self.values)]


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    levels: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Schema:
    """Feature names, kinds and training level tables."""

    features: Tuple[FeatureSpec, ...]
    target_name: str = "y"

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(feature.name for feature in self.features)

    def encoded_layout(self) -> List[Tuple[int, Optional[str]]]:
        """(original feature index, level or None) for every column of the encoded matrix."""
        layout = []
        for index, feature in enumerate(self.features):
            if feature.kind == NUMERIC:
                layout.append((index, None))
            else:
                layout.extend((index, level) for level in feature.levels)
        return layout

    def encoded_names(self) -> List[str]:
        return [
            self.features[index].name if level is None else f"{self.features[index].name}_{level}"
            for index, level in self.encoded_layout()
        ]

    def to_dict(self) -> Dict:
        return {
            "target_name": self.target_name,
            "features": [
                {"name": f.name, "kind": f.kind, "levels": list(f.levels)} for f in self.features
            ],
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "Schema":
        return cls(
            tuple(FeatureSpec(f["name"], f["kind"], tuple(f.get("levels", ()))) for f in payload["features"]),
            payload.get("target_name", "y"),
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of typed feature columns plus a numeric target."""

    feature_names: Tuple[str, ...]
    columns: Tuple[Column, ...]
    target: Optional[np.ndarray] = None
    target_name: str = "y"

    def __post_init__(self):
        names = tuple(str(name) for name in self.feature_names)
        columns = tuple(self.columns)
        if len(names) != len(columns):
            raise DataError("Every column needs exactly one feature name")
        if any(not name for name in names):
            raise DataError("Feature names must be nonempty")
        if len(set(names)) != len(names):
            raise DataError("Feature names must be unique")
        lengths = {len(column) for column in columns}
        target = None
        if self.target is not None:
            target = _frozen(np.asarray(self.target, dtype=float))
            lengths.add(len(target))
        if len(lengths) > 1:
            raise DataError(f"Columns and target have unequal lengths: {sorted(lengths)}")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "target", target)

    @property
    def n_rows(self) -> int:
        if self.columns:
            return len(self.columns[0])
        return 0 if self.target is None else len(self.target)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"Unknown feature: {name}") from None

    def column(self, name: str) -> Column:
        return self.columns[self.index(name)]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            self.feature_names,
            tuple(column.take(rows) for column in self.columns),
            None if self.target is None else self.target[rows],
            self.target_name,
        )

    def with_target(self, target) -> "Dataset":
        return Dataset(self.feature_names, self.columns, target, self.target_name)

    def with_column(self, name: str, column: Column) -> "Dataset":
        columns = list(self.columns)
        columns[self.index(name)] = column
        return Dataset(self.feature_names, tuple(columns), self.target, self.target_name)

    def require_target(self) -> np.ndarray:
        if self.target is None:
            raise DataError("Dataset has no target column")
        return self.target

    def schema(self) -> Schema:
        return Schema(
            tuple(FeatureSpec(name, col.kind, col.levels) for name, col in zip(self.feature_names, self.columns)),
            self.target_name,
        )

    def numeric_matrix(self) -> np.ndarray:
        """Feature matrix with NaN at missing cells; all columns must be numeric."""
        if any(not column.is_numeric for column in self.columns):
            raise DataError("numeric_matrix requires an all-numeric dataset; encode it first")
        if not self.columns:
            return np.empty((self.n_rows, 0))
        return np.column_stack([column.values for column in self.columns])


def _missing_tokens(series: pd.Series) -> np.ndarray:
    return series.str.strip().str.lower().isin(MISSING_TOKENS).to_numpy()


def _parse_numeric(series: pd.Series, missing: np.ndarray) -> Optional[np.ndarray]:
    parsed = pd.to_numeric(series.str.strip().where(~missing), errors="coerce").to_numpy(dtype=float)
    if np.isnan(parsed[~missing]).any():
        return None
    return parsed


def _parse_categorical(series: pd.Series, missing: np.ndarray, levels: Sequence[str] = ()) -> Column:
    tokens = series.str.strip().to_numpy(dtype=object)
    table: Dict[str, int] = {level: code for code, level in enumerate(levels)}
    codes = np.full(len(tokens), MISSING_CODE, dtype=np.int64)
    for row in np.flatnonzero(~missing):
        token = tokens[row]
        if token not in table:
            table[token] = len(table)
        codes[row] = table[token]
    return Column.categorical(codes, list(table), missing)


def _read_frame(path: Path) -> pd.DataFrame:
    """All cells as strings; every non-blank record must have exactly the header's field count."""
    try:
        return _parse_records(path)
    except csv.Error as exc:
        raise DataError(f"Malformed CSV in {path}: {exc}") from None


def _parse_records(path: Path) -> pd.DataFrame:
    with path.open(newline="", encoding="utf-8-sig") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header:
            raise DataError(f"No header row in {path}")
        header = [name.strip() for name in header]
        if len(set(header)) != len(header):
            raise DataError(f"Duplicate column names in {path}")
        records = []
        for record in reader:
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(
                    f"Ragged row in {path}: line {reader.line_num} has {len(record)} fields, expected {len(header)}"
                )
            records.append(record)
    return pd.DataFrame(records, columns=header, dtype=str)


def load_csv(
    path: Union[str, Path],
    target_name: Optional[str],
    *,
    schema: Optional[Schema] = None,
    require_target: bool = True,
) -> Dataset:
    """
    Read a header-first UTF-8 CSV file into a Dataset.

    Numeric-parseable columns become numeric, the rest categorical with levels in
    first-appearance order. With ``schema`` the training kinds and level tables
    are enforced (unseen levels are appended after the training levels).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Data file not found: {path}")
    frame = _read_frame(path)

    target = None
    if target_name is not None and target_name in frame.columns:
        series = frame[target_name]
        missing = _missing_tokens(series)
        if missing.any():
            raise DataError(f"Target column '{target_name}' in {path} contains missing values")
        target = _parse_numeric(series, missing)
        if target is None:
            raise DataError(f"Target column '{target_name}' in {path} is not numeric")
    elif require_target:
        raise DataError(f"Target column '{target_name}' not found in {path}")

    names = [name for name in frame.columns if name != target_name]
    columns = []
    if schema is not None:
        absent = [feature.name for feature in schema.features if feature.name not in frame.columns]
        if absent:
            raise DataError(f"{path} lacks model features: {absent}")
        names = list(schema.names)
        for feature in schema.features:
            series = frame[feature.name]
            missing = _missing_tokens(series)
            if feature.kind == NUMERIC:
                values = _parse_numeric(series, missing)
                if values is None:
                    raise DataError(f"Feature '{feature.name}' in {path} must be numeric")
                columns.append(Column(NUMERIC, values, missing))
            else:
                columns.append(_parse_categorical(series, missing, feature.levels))
    else:
        for name in names:
            series = frame[name]
            missing = _missing_tokens(series)
            values = _parse_numeric(series, missing)
            if values is not None:
                columns.append(Column(NUMERIC, values, missing))
            else:
                columns.append(_parse_categorical(series, missing))

    logger.info("Loaded %s: %d rows, %d features", path, len(frame), len(columns))
    return Dataset(tuple(names), tuple(columns), target, target_name or "y")


def to_frame(d: Dataset) -> pd.DataFrame:
    data = {}
    for name, column in zip(d.feature_names, d.columns):
        data[name] = column.values if column.is_numeric else column.level_names()
    if d.target is not None:
        data[d.target_name] = d.target
    return pd.DataFrame(data)


def write_csv(d: Dataset, path: Union[str, Path]) -> None:
    """Write a Dataset with exact float round-trip; missing cells are empty."""
    to_frame(d).to_csv(path, index=False, na_rep="", float_format="%.17g", lineterminator="\n")


def one_hot_encode(d: Dataset, levels: Optional[Mapping[str, Sequence[str]]] = None) -> Dataset:
    """
    Replace every categorical column by one indicator column per level.

    ``levels`` fixes the level table per column (training levels at prediction
    time); values outside it get all-zero indicators.
    """
    names: List[str] = []
    columns: List[Column] = []
    for name, column in zip(d.feature_names, d.columns):
        if column.is_numeric:
            names.append(name)
            columns.append(column)
            continue
        reference = tuple(levels[name]) if levels is not None and name in levels else column.levels
        row_levels = column.level_names()
        for level in reference:
            indicator = (row_levels == level).astype(float)
            names.append(f"{name}_{level}")
            columns.append(Column(NUMERIC, indicator, column.missing))
    return Dataset(tuple(names), tuple(columns), d.target, d.target_name)


@dataclass(frozen=True)
class ImputationStats:
    """Training medians (numeric) and modal levels (categorical) per feature."""

    feature_names: Tuple[str, ...]
    kinds: Tuple[str, ...]
    values: Tuple[Union[float, str, None], ...]

    def to_dict(self) -> Dict:
        return {"feature_names": list(self.feature_names), "kinds": list(self.kinds), "values": list(self.values)}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ImputationStats":
        return cls(tuple(payload["feature_names"]), tuple(payload["kinds"]), tuple(payload["values"]))


def fit_imputation(d: Dataset) -> ImputationStats:
    values: List[Union[float, str, None]] = []
    for column in d.columns:
        present = ~column.missing
        if column.is_numeric:
            values.append(float(np.median(column.values[present])) if present.any() else 0.0)
        elif present.any():
            counts = np.bincount(column.values[present], minlength=len(column.levels))
            values.append(column.levels[int(np.argmax(counts))])
        else:
            values.append(column.levels[0] if column.levels else None)
    return ImputationStats(d.feature_names, tuple(c.kind for c in d.columns), tuple(values))


def median_impute(d: Dataset, medians: ImputationStats) -> Dataset:
    """Fill missing cells with training medians / modal levels and clear the masks."""
    if d.feature_names != medians.feature_names or tuple(c.kind for c in d.columns) != medians.kinds:
        raise DataError("Imputation statistics do not match the dataset schema")
    columns = []
    for column, fill in zip(d.columns, medians.values):
        if not column.missing.any():
            columns.append(column)
        elif column.is_numeric:
            columns.append(Column(NUMERIC, np.where(column.missing, fill, column.values), np.zeros(len(column), bool)))
        else:
            levels = list(column.levels)
            if fill is None:
                # all-missing training column without levels: leave empty indicators
                columns.append(column)
                continue
            if fill not in levels:
                levels.append(fill)
            codes = np.where(column.missing, levels.index(fill), column.values)
            columns.append(Column.categorical(codes, levels, np.zeros(len(column), bool)))
    return Dataset(d.feature_names, tuple(columns), d.target, d.target_name)


def design_matrix(d: Dataset, schema: Schema, medians: ImputationStats) -> np.ndarray:
    """Imputed, one-hot encoded float matrix laid out per ``schema.encoded_layout()``."""
    if d.feature_names != schema.names:
        raise DataError(f"Dataset features {list(d.feature_names)} do not match model features {list(schema.names)}")
    levels = {f.name: f.levels for f in schema.features if f.kind == CATEGORICAL}
    encoded = one_hot_encode(median_impute(d, medians), levels)
    matrix = encoded.numeric_matrix()
    return np.nan_to_num(matrix, nan=0.0)
