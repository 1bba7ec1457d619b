import numpy as np
import pytest
from pydantic import ValidationError

from src.data import (
    Column,
    Dataset,
    Family,
    SyntheticSpec,
    fit_imputation,
    generate_synthetic,
    load_csv,
    make_folds,
    median_impute,
    one_hot_encode,
    synthetic_variant,
    write_csv,
)
from src.data.synthetic import SPARSE_COEFFICIENTS, family_response
from src.errors import DataError


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_empty_cell_is_missing(self, tmp_path):
        d = load_csv(write(tmp_path, "x,y\n1,1\n,2\n3,3\n"), "y")
        assert d.n_rows == 3
        assert d.column("x").missing.tolist() == [False, True, False]
        assert d.target.tolist() == [1.0, 2.0, 3.0]

    @pytest.mark.parametrize("token", ["NA", "na", "NaN", "null", "NULL"])
    def test_missing_tokens(self, tmp_path, token):
        d = load_csv(write(tmp_path, f"x,y\n1,1\n{token},2\n"), "y")
        assert d.column("x").is_numeric
        assert d.column("x").missing.tolist() == [False, True]

    def test_categorical_levels_in_first_appearance_order(self, tmp_path):
        d = load_csv(write(tmp_path, "c,y\nb,1\na,2\nb,3\n"), "y")
        column = d.column("c")
        assert not column.is_numeric
        assert column.levels == ("b", "a")
        assert column.values.tolist() == [0, 1, 0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_csv(tmp_path / "absent.csv", "y")

    def test_target_absent(self, tmp_path):
        with pytest.raises(DataError, match="Target column"):
            load_csv(write(tmp_path, "x,z\n1,2\n"), "y")

    def test_target_with_missing_values(self, tmp_path):
        with pytest.raises(DataError, match="missing"):
            load_csv(write(tmp_path, "x,y\n1,2\n3,\n"), "y")

    @pytest.mark.parametrize("text", ["x,w,y\n1,2,3\n4\n", "x,y,w\n1,2,3\n4,5\n", "x,y\n1,2\n3,4,5\n"])
    def test_ragged_rows(self, tmp_path, text):
        with pytest.raises(DataError, match="Ragged row .* line 3"):
            load_csv(write(tmp_path, text), "y")

    def test_blank_lines_are_skipped(self, tmp_path):
        assert load_csv(write(tmp_path, "x,y\n1,2\n\n3,4\n"), "y").n_rows == 2

    def test_duplicate_header(self, tmp_path):
        with pytest.raises(DataError, match="Duplicate"):
            load_csv(write(tmp_path, "x,x,y\n1,2,3\n"), "y")

    def test_prediction_input_without_target(self, tmp_path):
        d = load_csv(write(tmp_path, "x\n1\n2\n"), "y", require_target=False)
        assert d.target is None
        assert d.feature_names == ("x",)

    def test_schema_keeps_training_levels(self, tmp_path):
        train = load_csv(write(tmp_path, "c,y\na,1\nb,2\n", "train.csv"), "y")
        test = load_csv(write(tmp_path, "c,y\nz,1\nb,2\n", "test.csv"), "y", schema=train.schema())
        assert test.column("c").levels == ("a", "b", "z")
        assert test.column("c").values.tolist() == [2, 1]

    def test_schema_rejects_non_numeric_value(self, tmp_path):
        train = load_csv(write(tmp_path, "x,y\n1,1\n2,2\n", "train.csv"), "y")
        with pytest.raises(DataError, match="numeric"):
            load_csv(write(tmp_path, "x,y\nfoo,1\n", "test.csv"), "y", schema=train.schema())


def test_csv_round_trip(tmp_path):
    columns = (
        Column.numeric([0.1, np.nan, 1e-300, -2.5]),
        Column.categorical([0, 1, -1, 0], ["red", "blue"]),
    )
    original = Dataset(("x", "c"), columns, [1.0 / 3.0, 2.0, 3.0, 4.0], "y")
    path = tmp_path / "round.csv"
    write_csv(original, path)
    loaded = load_csv(path, "y")

    assert loaded.feature_names == original.feature_names
    np.testing.assert_array_equal(loaded.column("x").missing, original.column("x").missing)
    np.testing.assert_array_equal(loaded.column("x").values, original.column("x").values)
    assert loaded.column("c").levels == ("red", "blue")
    np.testing.assert_array_equal(loaded.column("c").values, original.column("c").values)
    np.testing.assert_array_equal(loaded.target, original.target)


def test_dataset_rejects_duplicate_names():
    with pytest.raises(DataError):
        Dataset(("x", "x"), (Column.numeric([1.0]), Column.numeric([2.0])))


def test_dataset_rejects_unequal_lengths():
    with pytest.raises(DataError):
        Dataset(("x",), (Column.numeric([1.0, 2.0]),), [1.0])


class TestOneHotEncode:
    def test_numeric_only_is_identity(self):
        d = Dataset(("x",), (Column.numeric([1.0, 2.0]),), [0.0, 1.0])
        encoded = one_hot_encode(d)
        assert encoded.feature_names == ("x",)
        np.testing.assert_array_equal(encoded.numeric_matrix(), d.numeric_matrix())

    def test_indicators(self):
        d = Dataset(("c",), (Column.categorical([0, 1, 0], ["a", "b"]),))
        encoded = one_hot_encode(d)
        assert encoded.feature_names == ("c_a", "c_b")
        assert encoded.column("c_a").values.tolist() == [1.0, 0.0, 1.0]
        assert encoded.column("c_b").values.tolist() == [0.0, 1.0, 0.0]

    def test_missing_propagates(self):
        d = Dataset(("c",), (Column.categorical([0, -1, 1], ["a", "b"]),))
        encoded = one_hot_encode(d)
        for name in ("c_a", "c_b"):
            assert encoded.column(name).missing.tolist() == [False, True, False]

    def test_indicators_sum_to_one_on_present_rows(self, rng):
        codes = rng.integers(-1, 5, size=200)
        d = Dataset(("c",), (Column.categorical(codes, list("abcde")),))
        matrix = one_hot_encode(d).numeric_matrix()
        present = codes >= 0
        np.testing.assert_array_equal(matrix[present].sum(axis=1), np.ones(present.sum()))

    def test_fixed_levels_zero_unseen(self):
        d = Dataset(("c",), (Column.categorical([0, 1], ["a", "new"]),))
        encoded = one_hot_encode(d, {"c": ("a", "b")})
        assert encoded.feature_names == ("c_a", "c_b")
        assert encoded.numeric_matrix()[1].tolist() == [0.0, 0.0]


class TestMedianImpute:
    def test_numeric_median(self):
        train = Dataset(("x",), (Column.numeric([1.0, 2.0, 3.0]),))
        d = Dataset(("x",), (Column.numeric([1.0, np.nan, 3.0]),))
        imputed = median_impute(d, fit_imputation(train))
        assert imputed.column("x").values.tolist() == [1.0, 2.0, 3.0]
        assert not imputed.column("x").missing.any()

    def test_no_missing_is_unchanged(self):
        d = Dataset(("x",), (Column.numeric([4.0, 5.0]),))
        imputed = median_impute(d, fit_imputation(d))
        np.testing.assert_array_equal(imputed.column("x").values, [4.0, 5.0])

    def test_all_missing_column_gets_training_median(self):
        train = Dataset(("x",), (Column.numeric([7.0, 9.0]),))
        d = Dataset(("x",), (Column.numeric([np.nan, np.nan]),))
        assert median_impute(d, fit_imputation(train)).column("x").values.tolist() == [8.0, 8.0]

    def test_categorical_mode(self):
        train = Dataset(("c",), (Column.categorical([1, 1, 0], ["a", "b"]),))
        d = Dataset(("c",), (Column.categorical([0, -1], ["a", "b"]),))
        imputed = median_impute(d, fit_imputation(train))
        assert imputed.column("c").level_names().tolist() == ["a", "b"]

    def test_schema_mismatch(self):
        train = Dataset(("x",), (Column.numeric([1.0]),))
        d = Dataset(("z",), (Column.numeric([1.0]),))
        with pytest.raises(DataError):
            median_impute(d, fit_imputation(train))


class TestFolds:
    def test_leave_one_out_sizes(self):
        assert make_folds(10, 10, 1).fold_sizes().tolist() == [1] * 10

    def test_balanced_sizes(self):
        assert sorted(make_folds(10, 3, 1).fold_sizes().tolist()) == [3, 3, 4]

    def test_deterministic(self):
        np.testing.assert_array_equal(make_folds(57, 5, 123).assignment, make_folds(57, 5, 123).assignment)

    def test_folds_partition_rows(self):
        held_out = np.concatenate([test for _, test in make_folds(31, 4, 9)])
        assert sorted(held_out.tolist()) == list(range(31))

    @pytest.mark.parametrize("k", [1, 11])
    def test_k_out_of_range(self, k):
        with pytest.raises(DataError):
            make_folds(10, k, 1)


def _formula(family: Family, X: np.ndarray) -> np.ndarray:
    x1, x2 = X[:, 0], X[:, 1]
    if family is Family.CORRELATED:
        x3, x4 = X[:, 2], X[:, 3]
        return x1 * x2**2 + x2 * np.exp(x3) - x3 * x4**3 + np.floor(x1) * np.cos(x4)
    if family is Family.FRIEDMAN:
        return 10 * np.sin(np.pi * x1 * x2) + 20 * (X[:, 2] - 0.5) ** 2 + 10 * X[:, 3] + 5 * X[:, 4]
    if family is Family.MAX:
        return 5 * np.maximum(1 + x1 + x2, 0)
    if family is Family.SPARSE:
        return 10 * X[:, 0] + 20 * X[:, 1] + 30 * X[:, 2] + 40 * X[:, 3] + 50 * X[:, 4]
    return 10 * np.ceil((x1 + x2) / 2)


class TestSynthetic:
    @pytest.mark.parametrize("family", list(Family))
    def test_noiseless_response_matches_formula(self, family):
        d = generate_synthetic(SyntheticSpec(family=family, n=300, noise_sd=1e-12, seed=5))
        np.testing.assert_allclose(d.target, _formula(family, d.numeric_matrix()), rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize(
        "family, width", [("Correlated", 8), ("Friedman", 10), ("Max", 4), ("Sparse", 50), ("Steps", 4)]
    )
    def test_widths_and_names(self, family, width):
        d = generate_synthetic(SyntheticSpec(family=family, n=5, noise_sd=1.0))
        assert d.n_features == width
        assert d.feature_names[0] == "x1"
        assert d.target_name == "y"

    def test_max_at_origin(self):
        assert family_response(Family.MAX, np.zeros((1, 4)))[0] == 5.0

    def test_steps_at_one(self):
        assert family_response(Family.STEPS, np.ones((1, 4)))[0] == 10.0

    def test_sparse_has_45_inactive_coefficients(self):
        assert (SPARSE_COEFFICIENTS == 0).sum() == 45

    def test_friedman_covariates_are_uniform(self):
        X = generate_synthetic(SyntheticSpec(family="friedman", n=1000, noise_sd=1.0)).numeric_matrix()
        assert X.min() >= 0.0 and X.max() <= 1.0

    def test_correlated_covariance(self):
        X = generate_synthetic(SyntheticSpec(family="Correlated", n=20000, noise_sd=1.0, seed=1)).numeric_matrix()
        expected = np.array([[1.0, -0.3, 0.5, 0.2], [-0.3, 1.0, 0.6, 0.5], [0.5, 0.6, 1.0, 0.8], [0.2, 0.5, 0.8, 1.0]])
        np.testing.assert_allclose(np.cov(X[:, :4], rowvar=False), expected, atol=0.05)

    def test_deterministic(self):
        spec = SyntheticSpec(family="Steps", n=50, noise_sd=1.0, seed=321)
        np.testing.assert_array_equal(generate_synthetic(spec).target, generate_synthetic(spec).target)

    def test_missing_rate(self):
        d = generate_synthetic(SyntheticSpec(family="Max", n=1000, noise_sd=1.0, missing_rate=0.2))
        rate = np.mean([column.missing.mean() for column in d.columns])
        assert 0.15 < rate < 0.25

    @pytest.mark.parametrize("kwargs", [{"n": 0, "noise_sd": 1.0}, {"n": 10, "noise_sd": 0.0}])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ValidationError):
            SyntheticSpec(family="Max", **kwargs)

    def test_unknown_family(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(family="Spiral", n=10, noise_sd=1.0)

    @pytest.mark.parametrize(
        "name, n, noise_sd",
        [("Max", 500, 1.0), ("Max2", 5000, 1.0), ("maxN", 500, 5.0), ("Max2N", 5000, 5.0), ("Sparse", 200, 5.0), ("Sparse2N", 2000, 50.0), ("MaxN2", 5000, 5.0), ("SparseN2", 2000, 50.0), ("FriedmanN2", 5000, 5.0)],
    )
    def test_variants(self, name, n, noise_sd):
        spec = synthetic_variant(name, seed=9)
        assert (spec.n, spec.noise_sd, spec.seed) == (n, noise_sd, 9)

    @pytest.mark.parametrize("name", ["Max3", "Max2N2", "MaxNN"])
    def test_unknown_variant(self, name):
        with pytest.raises(ValueError):
            synthetic_variant(name)
