from src.tree.grow import GrowthContext, find_best_split, grow
from src.tree.model import (
    CategoricalSplit,
    Leaf,
    LeafStats,
    MissingOnlySplit,
    MissingOrBelowSplit,
    Node,
    NotMissingAndBelowSplit,
    NumericSplit,
    SplitRule,
    TrainConfig,
    TrustModel,
)
from src.tree.predict import PredictionResult, assign_leaves, calibrate_truncation, predict, route, truncate
from src.tree.serialize import FORMAT_VERSION, load_model, save_model
