"""
Best-first tree growth.

Splits are scored by the summed proxy SSE of the two children: the residual
sum of squares of an OLS fit when the encoded design is narrow enough, and of
the child mean otherwise. Sufficient statistics (Gram matrix, cross products,
sum of squares) are accumulated over sorted rows so that every threshold of a
feature is scored from running sums.
"""
import heapq
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from scipy import linalg

from src.data.dataset import Column, Dataset, design_matrix, fit_imputation
from src.errors import DataError
from src.linmod.cv import cv_elastic_net, cv_relaxed_lasso
from src.linmod.inference import leaf_pvalues
from src.linmod.solvers import intercept_only
from src.robust.ood import fit_ood_stats
from src.tree.model import (
    CategoricalSplit,
    Leaf,
    MissingOnlySplit,
    MissingOrBelowSplit,
    Node,
    NotMissingAndBelowSplit,
    NumericSplit,
    SplitRule,
    TrainConfig,
    TrustModel,
    leaf_stats,
)
from src.tree.predict import calibrate_truncation

logger = logging.getLogger(__name__)

_FLAT_SSE = 1e-12


@dataclass(frozen=True, eq=False)
class Moments:
    """Sufficient statistics of a least-squares fit over a row subset."""

    gram: np.ndarray
    cross: np.ndarray
    yy: float
    count: int

    @classmethod
    def of(cls, Z: np.ndarray, y: np.ndarray) -> "Moments":
        return cls(Z.T @ Z, Z.T @ y, float(y @ y), len(y))

    @classmethod
    def zero(cls, width: int) -> "Moments":
        return cls(np.zeros((width, width)), np.zeros(width), 0.0, 0)

    def __add__(self, other: "Moments") -> "Moments":
        return Moments(self.gram + other.gram, self.cross + other.cross, self.yy + other.yy, self.count + other.count)

    def __sub__(self, other: "Moments") -> "Moments":
        return Moments(self.gram - other.gram, self.cross - other.cross, self.yy - other.yy, self.count - other.count)


def proxy_sse(moments: Moments) -> float:
    if moments.count == 0:
        return 0.0
    solution, *_ = linalg.lstsq(moments.gram, moments.cross, check_finite=False)
    return max(moments.yy - float(solution @ moments.cross), 0.0)


@dataclass(frozen=True, eq=False)
class SplitCandidate:
    rule: SplitRule
    gain: float
    left_rows: np.ndarray
    right_rows: np.ndarray


class GrowthContext:
    """Training data shared by every node: raw columns, encoded design, response and proxy basis."""

    def __init__(self, train: Dataset, config: TrainConfig):
        self.train = train
        self.config = config
        self.y = np.asarray(train.require_target(), dtype=float)
        if not np.isfinite(self.y).all():
            raise DataError("Target contains non-finite values")
        self.schema = train.schema()
        self.imputation = fit_imputation(train)
        self.X = design_matrix(train, self.schema, self.imputation)
        self.n, self.p = self.X.shape
        self.min_leaf = self.p + 2
        self.ols_proxy = config.leaf_model != "constant" and self.p <= config.ols_proxy_max_features

        # SSE is invariant to affine feature maps and response shifts; centering keeps the Gram well scaled
        ones = np.ones((self.n, 1))
        if self.ols_proxy and self.p:
            scale = self.X.std(axis=0)
            basis = (self.X - self.X.mean(axis=0)) / np.where(scale > 0, scale, 1.0)
            self.Z = np.hstack([ones, basis])
        else:
            self.Z = ones
        self.yc = self.y - self.y.mean()


def _thresholds(sorted_values: np.ndarray, max_count: int) -> np.ndarray:
    """Up to ``max_count`` empirical quantiles that leave at least one present row on each side."""
    if sorted_values.size < 2:
        return sorted_values[:0]
    quantiles = np.quantile(sorted_values, np.linspace(0.0, 1.0, max_count + 2)[1:-1], method="lower")
    candidates = np.unique(quantiles)
    return candidates[candidates < sorted_values[-1]]


def _prefix_moments(Z: np.ndarray, y: np.ndarray, cuts: np.ndarray) -> Iterator[Moments]:
    running = Moments.zero(Z.shape[1])
    start = 0
    for cut in cuts:
        running = running + Moments.of(Z[start:cut], y[start:cut])
        start = cut
        yield running


def _numeric_candidates(ctx, j, column, Z, y, missing_moments) -> Iterator[Tuple[SplitRule, Moments]]:
    name = ctx.schema.names[j]
    n = len(y)
    present = np.flatnonzero(~column.missing)
    n_missing = n - present.size
    if n_missing:
        yield MissingOnlySplit(j, name, default_left=n_missing >= present.size), missing_moments
    order = present[np.argsort(column.values[present], kind="stable")]
    sorted_values = column.values[order]
    thresholds = _thresholds(sorted_values, ctx.config.max_thresholds)
    cuts = np.searchsorted(sorted_values, thresholds, side="right")
    for threshold, below in zip(thresholds, _prefix_moments(Z[order], y[order], cuts)):
        threshold = float(threshold)
        if not n_missing:
            yield NumericSplit(j, name, default_left=below.count >= n - below.count, threshold=threshold), below
            continue
        above = present.size - below.count
        yield NotMissingAndBelowSplit(j, name, default_left=below.count >= above + n_missing, threshold=threshold), below
        yield MissingOrBelowSplit(j, name, default_left=below.count + n_missing >= above, threshold=threshold), below + missing_moments


def _categorical_candidates(ctx, j, column, Z, y, missing_moments) -> Iterator[Tuple[SplitRule, Moments]]:
    name = ctx.schema.names[j]
    present = ~column.missing
    n_missing = int(column.missing.sum())
    if n_missing:
        yield MissingOnlySplit(j, name, default_left=n_missing >= int(present.sum())), missing_moments
    codes = np.unique(column.values[present])
    if codes.size < 2:
        return
    masks = {int(code): present & (column.values == code) for code in codes}
    means = {code: float(y[mask].mean()) for code, mask in masks.items()}
    ordered = sorted(masks, key=lambda code: (means[code], code))
    n_present = int(present.sum())
    running = Moments.zero(Z.shape[1])
    for m in range(1, len(ordered)):
        code = ordered[m - 1]
        running = running + Moments.of(Z[masks[code]], y[masks[code]])
        default_left = running.count >= n_present - running.count
        left_codes, right_codes = sorted(ordered[:m]), sorted(ordered[m:])
        rule = CategoricalSplit(
            j,
            name,
            default_left=default_left,
            left_levels=tuple(column.levels[c] for c in left_codes),
            right_levels=tuple(column.levels[c] for c in right_codes),
        )
        yield rule, (running + missing_moments) if default_left else running


def find_best_split(ctx: GrowthContext, rows: np.ndarray, config: Optional[TrainConfig] = None) -> Optional[SplitCandidate]:
    """
    Lowest summed child proxy SSE over every feature and split variant.

    Returns None when the node is too small for two admissible children, the
    response is flat, or no split reduces the parent SSE by the relative
    ``min_split_gain``. Ties keep the earliest candidate: lowest feature
    index, then MissingOnly, then ascending thresholds.
    """
    config = config or ctx.config
    rows = np.asarray(rows)
    n = len(rows)
    if n < 2 * ctx.min_leaf:
        return None
    Z, y = ctx.Z[rows], ctx.yc[rows]
    if np.ptp(y) == 0.0:
        return None
    total = Moments.of(Z, y)
    parent = proxy_sse(total)
    if parent <= _FLAT_SSE * max(float(y @ y), 1.0):
        return None

    limit = parent * (1.0 - config.min_split_gain)
    best_rule, best_sse = None, np.inf
    for j, column in enumerate(ctx.train.columns):
        local: Column = column.take(rows)
        missing_moments = Moments.of(Z[local.missing], y[local.missing])
        generate = _numeric_candidates if local.is_numeric else _categorical_candidates
        for rule, left in generate(ctx, j, local, Z, y, missing_moments):
            if left.count < ctx.min_leaf or n - left.count < ctx.min_leaf:
                continue
            sse = proxy_sse(left) + proxy_sse(total - left)
            if sse < best_sse:
                best_rule, best_sse = rule, sse

    if best_rule is None or not best_sse < limit:
        return None
    goes_left = best_rule.goes_left(ctx.train.columns[best_rule.feature].take(rows))
    return SplitCandidate(best_rule, parent - best_sse, rows[goes_left], rows[~goes_left])


def _fit_leaf(ctx: GrowthContext, rows: np.ndarray, elastic: bool = False) -> Leaf:
    config = ctx.config
    X, y = ctx.X[rows], ctx.y[rows]
    if elastic:
        _, fit = cv_elastic_net(
            X, y, config.cv_folds, config.seed,
            l2_weight=config.l2_weight, n_lambdas=config.n_lambdas, min_ratio=config.lambda_min_ratio,
        )
    elif config.leaf_model == "constant" or np.ptp(y) == 0.0:
        fit = intercept_only(X, y)
    else:
        _, fit = cv_relaxed_lasso(
            X, y, config.cv_folds, config.seed,
            theta_grid=config.theta_grid, n_lambdas=config.n_lambdas, min_ratio=config.lambda_min_ratio,
        )
    tests = leaf_pvalues(fit, X, y)
    return Leaf(fit, leaf_stats(y, X), tests.p_values, tests.flag, tests.features)


def _grow_best_first(ctx: GrowthContext) -> Node:
    ids = itertools.count()
    root = Node(next(ids), 0, ctx.n)
    rows_of: Dict[int, np.ndarray] = {root.node_id: np.arange(ctx.n)}
    frontier = []

    def consider(node: Node) -> None:
        candidate = find_best_split(ctx, rows_of[node.node_id])
        if candidate is not None:
            heapq.heappush(frontier, (-candidate.gain, node.node_id, node, candidate))

    if ctx.config.max_leaves > 1:
        consider(root)
    leaves = 1
    while frontier and leaves < ctx.config.max_leaves:
        _, _, node, candidate = heapq.heappop(frontier)
        node.rule = candidate.rule
        node.left = Node(next(ids), node.depth + 1, len(candidate.left_rows))
        node.right = Node(next(ids), node.depth + 1, len(candidate.right_rows))
        rows_of[node.left.node_id] = candidate.left_rows
        rows_of[node.right.node_id] = candidate.right_rows
        leaves += 1
        logger.debug("Split node %d on %s (gain %.6g)", node.node_id, candidate.rule.name, candidate.gain)
        consider(node.left)
        consider(node.right)

    for node in root.walk():
        if node.is_leaf:
            node.leaf = _fit_leaf(ctx, rows_of[node.node_id])
    return root


def grow(train: Dataset, config: Optional[TrainConfig] = None) -> TrustModel:
    """Grow a TRUST tree, fit every leaf and calibrate the truncation constant on the training rows."""
    config = config or TrainConfig()
    if train.n_rows < 3:
        raise DataError(f"Training needs at least 3 rows, got {train.n_rows}")
    ctx = GrowthContext(train, config)
    ood_stats = fit_ood_stats(ctx.X, config.ood_quantile, feature_names=ctx.schema.encoded_names())

    if ctx.n <= ctx.p + 1:
        logger.info("n=%d <= p+1=%d: fitting a depth-0 elastic net", ctx.n, ctx.p + 1)
        root = Node(0, 0, ctx.n, leaf=_fit_leaf(ctx, np.arange(ctx.n), elastic=True))
        root_model = "elastic_net"
    else:
        root = _grow_best_first(ctx)
        root_model = config.leaf_model

    model = TrustModel(root, ctx.schema, ctx.imputation, ood_stats, config, n_train=ctx.n, root_model=root_model)
    calibrate_truncation(model, train, config.truncation_t_grid)
    logger.info("Grew model: %d leaves, depth %d, t=%s", model.leaf_count, model.depth, model.t)
    return model
