import json
import math
from dataclasses import replace

import numpy as np
import pytest
from pydantic import ValidationError

from factories import categorical_data, missing_signal_data, numeric_dataset, piecewise_data
from src.bench import unexplained_variance
from src.data import Column, Dataset, SyntheticSpec, generate_synthetic
from src.errors import DataError, ModelFormatError
from src.linmod import fit_ols
from src.tree import (
    CategoricalSplit,
    GrowthContext,
    MissingOnlySplit,
    MissingOrBelowSplit,
    NotMissingAndBelowSplit,
    NumericSplit,
    TrainConfig,
    assign_leaves,
    find_best_split,
    grow,
    load_model,
    predict,
    route,
    save_model,
    truncate,
)
from src.tree.model import leaf_stats
from src.tree.predict import apply_truncation, calibrate_truncation, raw_predictions
from src.tree.serialize import model_to_dict


def five_point_stats():
    return leaf_stats(np.array([0.0, 1.0, 2.0, 3.0, 4.0]), np.zeros((5, 1)))


class TestTruncation:
    def test_leaf_statistics(self):
        stats = five_point_stats()
        assert (stats.y_min, stats.y_max) == (0.0, 4.0)
        assert stats.s_lower == pytest.approx(np.std([0.0, 1.0], ddof=1))
        assert stats.s_upper == pytest.approx(1.0)

    def test_clamps_above(self):
        assert truncate(6.0, five_point_stats(), 1.0) == pytest.approx(5.0)

    def test_clamps_below(self):
        stats = five_point_stats()
        assert truncate(-3.0, stats, 1.0) == pytest.approx(-stats.s_lower)

    def test_negative_t_clamps_inside_range(self):
        assert truncate(4.0, five_point_stats(), -1.0) == pytest.approx(3.0)

    def test_infinite_t_disables(self):
        assert truncate(1e9, five_point_stats(), math.inf) == 1e9

    def test_inside_bounds_untouched(self):
        assert truncate(2.5, five_point_stats(), 0.0) == 2.5

    def test_bounds_never_violated(self, rng):
        for _ in range(200):
            y = rng.normal(size=int(rng.integers(2, 30))) * rng.uniform(0.1, 10.0)
            stats = leaf_stats(y, np.zeros((len(y), 1)))
            t = float(rng.uniform(-1.0, 8.0))
            raw = rng.normal(0.0, 50.0, size=50)
            clamped = truncate(raw, stats, t)
            lower, upper = stats.y_min - t * stats.s_lower, stats.y_max + t * stats.s_upper
            if lower <= upper:
                assert np.all(clamped >= lower - 1e-12)
                assert np.all(clamped <= upper + 1e-12)
            inside = (raw >= lower) & (raw <= upper)
            np.testing.assert_array_equal(clamped[inside], raw[inside])


class TestRouting:
    def test_numeric(self):
        rule = NumericSplit(0, "x", default_left=False, threshold=1.5)
        assert route([1.5], rule) == "left"
        assert route([2.0], rule) == "right"
        assert route([None], rule) == "right"

    def test_missing_only(self):
        rule = MissingOnlySplit(0, "x")
        assert route([float("nan")], rule) == "left"
        assert route([3.0], rule) == "right"

    def test_not_missing_and_below(self):
        rule = NotMissingAndBelowSplit(0, "x", threshold=0.0)
        assert route([-1.0], rule) == "left"
        assert route([1.0], rule) == "right"
        assert route([None], rule) == "right"

    def test_missing_or_below(self):
        rule = MissingOrBelowSplit(0, "x", threshold=0.0)
        assert route([-1.0], rule) == "left"
        assert route(["NA"], rule) == "left"
        assert route([1.0], rule) == "right"

    def test_categorical_unknown_level_goes_default(self):
        rule = CategoricalSplit(0, "c", default_left=False, left_levels=("a",), right_levels=("b",))
        assert route(["a"], rule) == "left"
        assert route(["b"], rule) == "right"
        assert route(["zzz"], rule) == "right"
        assert route([None], rule) == "right"

    def test_column_routing_matches_row_routing(self):
        column = Column.numeric([np.nan, -1.0, 0.5, 2.0])
        for rule in (
            NumericSplit(0, "x", default_left=True, threshold=0.5),
            MissingOnlySplit(0, "x"),
            NotMissingAndBelowSplit(0, "x", threshold=0.5),
            MissingOrBelowSplit(0, "x", threshold=0.5),
        ):
            vectorized = rule.goes_left(column).tolist()
            scalar = [route([value], rule) == "left" for value in column.values]
            assert vectorized == scalar


class TestTrainConfig:
    def test_defaults(self):
        config = TrainConfig()
        assert config.max_leaves == 16
        assert config.truncation_t_grid[-1] == math.inf

    def test_rejects_zero_leaves(self):
        with pytest.raises(ValidationError):
            TrainConfig(max_leaves=0)

    def test_parses_infinity(self):
        assert TrainConfig(truncation_t_grid=[0.0, "inf"]).truncation_t_grid == (0.0, math.inf)

    def test_to_dict_is_json_safe(self):
        json.dumps(TrainConfig().to_dict(), allow_nan=False)


class TestSplitSearch:
    def test_finds_regime_boundary(self, piecewise):
        ctx = GrowthContext(piecewise, TrainConfig())
        candidate = find_best_split(ctx, np.arange(piecewise.n_rows))
        assert isinstance(candidate.rule, NumericSplit)
        assert candidate.rule.name == "x1"
        assert abs(candidate.rule.threshold) < 0.3
        assert candidate.gain > 0
        assert len(candidate.left_rows) + len(candidate.right_rows) == piecewise.n_rows

    def test_no_split_on_flat_response(self, rng):
        d = numeric_dataset(rng.normal(size=(50, 2)), np.full(50, 3.0))
        ctx = GrowthContext(d, TrainConfig())
        assert find_best_split(ctx, np.arange(50)) is None

    def test_no_split_on_tiny_node(self, piecewise):
        ctx = GrowthContext(piecewise, TrainConfig())
        assert find_best_split(ctx, np.arange(2 * ctx.min_leaf - 1)) is None

    def test_default_left_marks_larger_child(self, piecewise):
        ctx = GrowthContext(piecewise, TrainConfig())
        candidate = find_best_split(ctx, np.arange(piecewise.n_rows))
        assert candidate.rule.default_left == (len(candidate.left_rows) >= len(candidate.right_rows))

    def test_steps_split_lands_on_signal_features(self):
        hits = 0
        for seed in range(20):
            d = generate_synthetic(SyntheticSpec(family="Steps", n=500, noise_sd=1.0, seed=seed))
            candidate = find_best_split(GrowthContext(d, TrainConfig()), np.arange(d.n_rows))
            hits += candidate is not None and candidate.rule.name in ("x1", "x2")
        assert hits >= 19


class TestGrow:
    def test_piecewise_linear(self, piecewise_model, piecewise):
        assert piecewise_model.leaf_count >= 2
        assert piecewise_model.root.rule.name == "x1"
        result = predict(piecewise_model, piecewise)
        assert np.mean((result.values - piecewise.target) ** 2) < 0.05

    def test_leaf_sizes_respect_floor(self, piecewise_model):
        floor = len(piecewise_model.encoded_names) + 2
        assert all(node.n_rows >= floor for node in piecewise_model.leaves())

    def test_single_leaf(self, piecewise):
        model = grow(piecewise, TrainConfig(max_leaves=1))
        assert model.leaf_count == 1
        assert model.depth == 0

    def test_leaf_cap(self):
        model = grow(piecewise_data(n=600, seed=2), TrainConfig(max_leaves=3))
        assert model.leaf_count <= 3

    def test_deterministic(self, piecewise):
        first = model_to_dict(grow(piecewise, TrainConfig(max_leaves=3)))
        second = model_to_dict(grow(piecewise, TrainConfig(max_leaves=3)))
        assert json.dumps(first) == json.dumps(second)

    def test_high_dimensional_root(self, rng):
        X = rng.normal(size=(20, 40))
        d = numeric_dataset(X, X[:, 0] + rng.normal(size=20))
        model = grow(d, TrainConfig())
        assert model.root_model == "elastic_net"
        assert model.depth == 0
        values = predict(model, d).values
        assert np.isfinite(values).all()
        np.testing.assert_array_equal(values, predict(model, d).values)

    def test_categorical_split(self):
        d = categorical_data()
        model = grow(d, TrainConfig(leaf_model="constant", max_leaves=2))
        rule = model.root.rule
        assert isinstance(rule, CategoricalSplit)
        assert {frozenset(rule.left_levels), frozenset(rule.right_levels)} == {frozenset("ac"), frozenset("bd")}

    def test_missing_indicator_split(self):
        model = grow(missing_signal_data(), TrainConfig())
        rules = [node.rule for node in model.root.walk() if not node.is_leaf]
        assert any(isinstance(r, (MissingOnlySplit, MissingOrBelowSplit)) and r.name == "x1" for r in rules)

    def test_constant_leaves(self, piecewise):
        model = grow(piecewise, TrainConfig(leaf_model="constant", max_leaves=4))
        assert all(not node.leaf.fit.coefficients.any() for node in model.leaves())

    def test_too_few_rows(self):
        with pytest.raises(DataError):
            grow(numeric_dataset(np.ones((2, 1)), [1.0, 2.0]), TrainConfig())

    def test_truncation_is_calibrated(self, piecewise_model, piecewise):
        raw, leaf_ids, _ = raw_predictions(piecewise_model, piecewise)
        y = piecewise.target

        def mse(t):
            return np.mean((apply_truncation(piecewise_model, raw, leaf_ids, t) - y) ** 2)

        assert piecewise_model.t in piecewise_model.config.truncation_t_grid
        assert all(mse(piecewise_model.t) <= mse(t) for t in piecewise_model.config.truncation_t_grid)

    def test_truncation_prefers_tight_clamp_on_five_point_leaf(self):
        x = np.array([0.0, 1.0, 2.0, 3.0, 6.0])
        d = numeric_dataset(x[:, None], [0.0, 1.0, 2.0, 3.0, 4.0])
        model = grow(d, TrainConfig(leaf_model="constant", max_leaves=1))
        (node,) = model.leaves()
        # the leaf predicts x itself, so the last row overshoots its response 4 with 6
        node.leaf = replace(node.leaf, fit=fit_ols(x[:, None], x), stats=five_point_stats())
        raw, leaf_ids, _ = raw_predictions(model, d)
        assert raw[4] == pytest.approx(6.0)
        assert apply_truncation(model, raw, leaf_ids, 1.0)[4] == pytest.approx(5.0)
        assert apply_truncation(model, raw, leaf_ids, 0.0)[4] == pytest.approx(4.0)
        assert calibrate_truncation(model, d, t_grid=[0.0, 1.0]) == 0.0
        assert model.t == 0.0

    def test_max_family_splits_near_hinge(self):
        train = generate_synthetic(SyntheticSpec(family="Max", n=500, noise_sd=1.0, seed=1))
        test = generate_synthetic(SyntheticSpec(family="Max", n=1000, noise_sd=1.0, seed=2))
        model = grow(train, TrainConfig())
        assert model.leaf_count >= 2
        assert model.root.rule.name in ("x1", "x2")
        assert unexplained_variance(predict(model, test).values, test.target) <= 0.12

    def test_leaf_ids_match_routing(self, piecewise_model, piecewise):
        ids = assign_leaves(piecewise_model, piecewise)
        leaf_ids = {node.node_id for node in piecewise_model.leaves()}
        assert set(ids.tolist()) <= leaf_ids


class TestPredict:
    def test_schema_mismatch(self, piecewise_model):
        other = Dataset(("a", "b", "c"), tuple(Column.numeric([1.0]) for _ in range(3)))
        with pytest.raises(DataError):
            predict(piecewise_model, other)

    def test_ood_reports(self, piecewise_model):
        far = numeric_dataset([[0.0, 0.0, 0.0], [50.0, 0.0, 0.0]])
        result = predict(piecewise_model, far, check_ood=True)
        assert not result.reports[0].is_ood
        assert result.reports[1].is_ood
        assert result.reports[1].breaches[0].feature == "x1"
        assert result.warnings(1)[0].startswith("OOD distance")

    def test_missing_values_route_and_predict(self, piecewise_model):
        rows = numeric_dataset([[0.0, 0.0, 0.0]], missing=np.array([[True, False, False]]))
        result = predict(piecewise_model, rows)
        assert np.isfinite(result.values).all()


class TestSerialization:
    def test_round_trip(self, piecewise_model, piecewise, tmp_path):
        path = save_model(piecewise_model, tmp_path / "model.json")
        loaded = load_model(path)
        np.testing.assert_array_equal(predict(loaded, piecewise).values, predict(piecewise_model, piecewise).values)
        assert loaded.t == piecewise_model.t
        assert loaded.config == piecewise_model.config
        assert path.read_text() == save_model(loaded, tmp_path / "again.json").read_text()

    def test_training_ranges_travel_with_ood_stats(self, piecewise_model, piecewise, tmp_path):
        payload = model_to_dict(piecewise_model)
        assert set(payload) == {"format", "schema", "imputation", "config", "t", "n_train", "root_model", "ood", "tree"}
        loaded = load_model(save_model(piecewise_model, tmp_path / "model.json"))
        X = piecewise.numeric_matrix()
        np.testing.assert_array_equal(loaded.ood_stats.feature_min, X.min(axis=0))
        np.testing.assert_array_equal(loaded.ood_stats.feature_max, X.max(axis=0))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelFormatError):
            load_model(tmp_path / "absent.json")

    def test_not_json(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("not json")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_wrong_format_version(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format": "trust-model/0"}))
        with pytest.raises(ModelFormatError, match="Unsupported"):
            load_model(path)

    def test_corrupt_payload(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format": "trust-model/1", "tree": {}}))
        with pytest.raises(ModelFormatError):
            load_model(path)
