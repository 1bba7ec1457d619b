from src.data.dataset import (
    CATEGORICAL,
    NUMERIC,
    Column,
    Dataset,
    FeatureSpec,
    ImputationStats,
    Schema,
    design_matrix,
    fit_imputation,
    load_csv,
    median_impute,
    one_hot_encode,
    write_csv,
)
from src.data.folds import FoldPlan, make_folds
from src.data.synthetic import Family, SyntheticSpec, family_response, generate_synthetic, synthetic_variant
