from src.bench.harness import (
    CART_MODE,
    LASSO_MODE,
    TRUST,
    BenchResult,
    BenchSpec,
    CellResult,
    DatasetEntry,
    model_config,
    rank_models,
    run_benchmark,
    unexplained_variance,
)
from src.bench.tables import RenderedTable, render_table, result_frame
