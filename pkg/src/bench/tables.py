"""
Benchmark tables: a full-precision CSV and an aligned text table in which
the best value of each dataset row is wrapped in ``**``. Values are
truncated to two decimals and every cell tied at the lowest one is bold; the
Mean and Mean Rank footers are highlighted the same way.
"""
import io
import math
from dataclasses import dataclass
from typing import List

import numpy as np
import pandas as pd

from src.bench.harness import BenchResult

NOT_AVAILABLE = "N/A"
FOOTER = ("Mean", "Std", "Mean Rank", "Std Rank")
RANKED_FOOTER = ("Mean", "Mean Rank")


@dataclass(frozen=True)
class RenderedTable:
    csv: str
    text: str


def _footer_values(result: BenchResult, model: str) -> List[float]:
    values = np.array([result.cell(d, model).mean_uv for d in result.datasets if result.cell(d, model).available])
    mean = float(values.mean()) if values.size else math.nan
    std = (float(np.std(values, ddof=1)) if values.size > 1 else 0.0) if values.size else math.nan
    return [mean, std, result.mean_rank(model), result.std_rank(model)]


def result_frame(result: BenchResult) -> pd.DataFrame:
    """Dataset rows of mean UV per model (NaN for N/A) followed by the four footer rows."""
    rows = []
    for dataset in result.datasets:
        cells = [result.cell(dataset, m) for m in result.models]
        rows.append([dataset] + [c.mean_uv if c.available else math.nan for c in cells])
    footers = {model: _footer_values(result, model) for model in result.models}
    for k, label in enumerate(FOOTER):
        rows.append([label] + [footers[m][k] for m in result.models])
    return pd.DataFrame(rows, columns=["dataset"] + list(result.models))


def _bucket(value: float) -> float:
    """Two-decimal truncation; the epsilon keeps 0.29 from landing in 0.28."""
    return math.floor(value * 100.0 + 1e-9) / 100.0


def _display(value: float) -> str:
    if not math.isfinite(value):
        return NOT_AVAILABLE
    return ">1" if value > 1.0 else f"{_bucket(value):.2f}"


def _bold_best(values: List[float], cells: List[str]) -> List[str]:
    """Bold every cell sharing the lowest two-decimal bucket."""
    buckets = [_bucket(v) if math.isfinite(v) else None for v in values]
    present = [b for b in buckets if b is not None]
    if not present:
        return cells
    best = min(present)
    return [f"**{cell}**" if b == best else cell for b, cell in zip(buckets, cells)]


def render_table(result: BenchResult) -> RenderedTable:
    frame = result_frame(result)
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, na_rep=NOT_AVAILABLE, float_format="%.17g", lineterminator="\n")

    n_datasets = len(result.datasets)
    body: List[List[str]] = []
    for k, row in frame.iterrows():
        values = [float(row[m]) for m in result.models]
        label = str(row["dataset"])
        if k < n_datasets:
            cells = _bold_best(values, [_display(v) for v in values])
        else:
            cells = [f"{_bucket(v):.2f}" if math.isfinite(v) else NOT_AVAILABLE for v in values]
            if label in RANKED_FOOTER:
                cells = _bold_best(values, cells)
        body.append([label] + cells)

    header = ["Dataset"] + list(result.models)
    widths = [max(len(line[c]) for line in [header] + body) for c in range(len(header))]

    def line(cells: List[str]) -> str:
        first = cells[0].ljust(widths[0])
        return "  ".join([first] + [cell.rjust(w) for cell, w in zip(cells[1:], widths[1:])]).rstrip()

    separator = "-" * len(line(header))
    lines = [line(header), separator]
    lines += [line(cells) for cells in body[:n_datasets]]
    lines.append(separator)
    lines += [line(cells) for cells in body[n_datasets:]]
    return RenderedTable(buffer.getvalue(), "\n".join(lines) + "\n")
