"""Dataset loading, splitting, transforms, metrics, and generators."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icftab.data import (
    TEST,
    TRAIN,
    VALID,
    Dataset,
    load_csv,
    save_csv,
    split_dataset,
)
from icftab.errors import ConfigurationError, DataError, ParseError, SchemaError
from icftab.metrics import metric_accuracy, metric_mae, metric_r2
from icftab.stats import chi2_independence
from icftab.synth import gen_nonsmooth_regression, gen_planted_icf
from icftab.transforms import fit_gaussian_target, fit_standardizer


def write_csv(tmp_path, text, schema):
    csv_path = tmp_path / "data.csv"
    csv_path.write_text(text)
    schema_path = tmp_path / "data.schema.json"
    schema_path.write_text(json.dumps(schema))
    return csv_path, schema_path


class TestLoadCsv:
    def test_small_classification_table(self, tmp_path):
        csv_path, schema_path = write_csv(
            tmp_path,
            "a,b,t\n1.0,0,1\n2.0,1,0\n3.0,2,1\n4.0,0,0\n",
            {"target": "t", "task": "classification", "categorical": []},
        )
        ds = load_csv(csv_path, schema_path)
        assert ds.n_cols == 2
        assert ds.n_rows == 4
        assert ds.task == "classification"

    def test_categorical_cardinality(self, tmp_path):
        rows = "\n".join(f"{i % 3},{i % 5},{i % 2}" for i in range(10))
        csv_path, schema_path = write_csv(
            tmp_path,
            "a,b,t\n" + rows + "\n",
            {"target": "t", "task": "classification", "categorical": ["b"]},
        )
        ds = load_csv(csv_path, schema_path)
        b = next(c for c in ds.columns if c.name == "b")
        assert b.cardinality == 5
        assert b.declared_kind == "categorical"

    def test_empty_cell_is_data_error(self, tmp_path):
        csv_path, schema_path = write_csv(
            tmp_path,
            "a,b,t\n1.0,,1\n2.0,1,0\n",
            {"target": "t", "task": "classification"},
        )
        with pytest.raises(DataError, match=r"row 2.*'b'"):
            load_csv(csv_path, schema_path)

    def test_non_numeric_cell_is_parse_error(self, tmp_path):
        csv_path, schema_path = write_csv(
            tmp_path,
            "a,b,t\n1.0,x,1\n",
            {"target": "t", "task": "classification"},
        )
        with pytest.raises(ParseError) as exc:
            load_csv(csv_path, schema_path)
        assert exc.value.row == 2
        assert exc.value.column == "b"

    def test_schema_mismatch(self, tmp_path):
        csv_path, schema_path = write_csv(
            tmp_path,
            "a,b,t\n1.0,2.0,1\n",
            {"target": "t", "task": "classification", "columns": ["a", "b", "c"]},
        )
        with pytest.raises(SchemaError):
            load_csv(csv_path, schema_path)

    def test_missing_target_column(self, tmp_path):
        csv_path, schema_path = write_csv(
            tmp_path,
            "a,b\n1.0,2.0\n",
            {"target": "t", "task": "regression"},
        )
        with pytest.raises(SchemaError):
            load_csv(csv_path, schema_path)

    def test_bad_classification_target(self, tmp_path):
        csv_path, schema_path = write_csv(
            tmp_path,
            "a,t\n1.0,2\n2.0,0\n",
            {"target": "t", "task": "classification"},
        )
        with pytest.raises(DataError):
            load_csv(csv_path, schema_path)

    def test_roundtrip_through_save(self, tmp_path):
        ds = gen_planted_icf(200, 4, d_noise=2, flip_prob=0.1, seed=3)
        save_csv(ds, tmp_path / "out.csv", tmp_path / "out.schema.json")
        back = load_csv(tmp_path / "out.csv", tmp_path / "out.schema.json")
        np.testing.assert_allclose(back.X, ds.X)
        np.testing.assert_allclose(back.y, ds.y)


class TestSplitDataset:
    def test_sizes(self):
        ds = gen_planted_icf(100, 4, d_noise=1, seed=0)
        out = split_dataset(ds, (0.6, 0.2, 0.2), seed=7)
        sizes = [int((out.split == p).sum()) for p in (TRAIN, VALID, TEST)]
        assert sizes == [60, 20, 20]

    def test_deterministic(self):
        ds = gen_planted_icf(100, 4, d_noise=1, seed=0)
        a = split_dataset(ds, (0.6, 0.2, 0.2), seed=7)
        b = split_dataset(ds, (0.6, 0.2, 0.2), seed=7)
        np.testing.assert_array_equal(a.split, b.split)

    def test_different_seed_differs(self):
        ds = gen_planted_icf(100, 4, d_noise=1, seed=0)
        a = split_dataset(ds, (0.6, 0.2, 0.2), seed=7)
        b = split_dataset(ds, (0.6, 0.2, 0.2), seed=8)
        assert (a.split != b.split).any()

    def test_empty_split_is_configuration_error(self):
        ds = gen_nonsmooth_regression(3, 1.0, seed=0)
        with pytest.raises(ConfigurationError):
            split_dataset(ds, (0.98, 0.01, 0.01), seed=0)

    def test_bad_fractions(self):
        ds = gen_nonsmooth_regression(50, 1.0, seed=0)
        with pytest.raises(ConfigurationError):
            split_dataset(ds, (0.5, 0.2, 0.2), seed=0)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=20, deadline=None)
    def test_stratification_within_one_sample(self, seed):
        ds = gen_planted_icf(200, 5, d_noise=1, flip_prob=0.3, seed=seed % 7)
        out = split_dataset(ds, (0.6, 0.2, 0.2), seed=seed)
        global_pos = ds.y.sum()
        for part in (TRAIN, VALID, TEST):
            m = out.split == part
            expected = global_pos * m.sum() / ds.n_rows
            assert abs(out.y[m].sum() - expected) <= 1.0

    def test_cardinality_refit_on_train(self):
        ds = gen_planted_icf(200, 8, d_noise=1, seed=1)
        out = split_dataset(ds, (0.6, 0.2, 0.2), seed=1)
        train_rows = out.X[out.split == TRAIN]
        assert out.columns[0].cardinality == np.unique(train_rows[:, 0]).size


class TestStandardizer:
    def test_hand_example(self):
        sc = fit_standardizer(np.array([[1.0], [2.0], [3.0]]))
        out = sc.transform(np.array([[1.0], [2.0], [3.0]]))
        np.testing.assert_allclose(out[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)

    def test_constant_column_maps_to_zero(self):
        sc = fit_standardizer(np.array([[5.0], [5.0], [5.0]]))
        out = sc.transform(np.array([[5.0], [7.0]]))
        np.testing.assert_array_equal(out, np.zeros((2, 1)))

    def test_unseen_value(self):
        sc = fit_standardizer(np.array([[1.0], [3.0]]))  # mean 2, std 1
        assert sc.transform(np.array([[4.0]]))[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_idempotence(self, rng):
        cols = rng.normal(size=(100, 3)) * [1.0, 10.0, 0.1] + [0.0, -5.0, 2.0]
        once = fit_standardizer(cols).transform(cols)
        refit = fit_standardizer(once)
        np.testing.assert_allclose(refit.mean, 0.0, atol=1e-9)
        np.testing.assert_allclose(refit.std, 1.0, atol=1e-9)


class TestGaussianTarget:
    def test_median_maps_to_zero(self):
        tf = fit_gaussian_target(np.array([3.0, 1.0, 2.0]))
        assert tf.transform(np.array([2.0]))[0] == pytest.approx(0.0, abs=1e-12)

    def test_monotone(self, rng):
        y = rng.normal(size=200) ** 3
        tf = fit_gaussian_target(y)
        xs = np.sort(rng.uniform(y.min() - 1, y.max() + 1, size=100))
        zs = tf.transform(xs)
        assert (np.diff(zs) >= 0).all()
        strict = tf.transform(np.sort(np.unique(y)))
        assert (np.diff(strict) > 0).all()

    def test_roundtrip_on_training_points(self, rng):
        y = rng.exponential(size=150)
        tf = fit_gaussian_target(y)
        back = tf.inverse(tf.transform(y))
        np.testing.assert_allclose(back, y, atol=1e-9)

    def test_all_equal_disables_transform(self):
        tf = fit_gaussian_target(np.full(10, 3.0))
        assert tf.kind == "identity"
        np.testing.assert_array_equal(tf.transform(np.array([1.0, 2.0])), [1.0, 2.0])

    def test_unseen_values_clamp(self):
        y = np.arange(1.0, 11.0)
        tf = fit_gaussian_target(y)
        below = tf.transform(np.array([-100.0]))[0]
        above = tf.transform(np.array([100.0]))[0]
        assert below == pytest.approx(tf.transform(np.array([1.0]))[0])
        assert above == pytest.approx(tf.transform(np.array([10.0]))[0])


class TestMetrics:
    def test_accuracy(self):
        assert metric_accuracy(np.array([1, 0, 1]), np.array([1, 0, 0])) == pytest.approx(2 / 3)
        assert metric_accuracy(np.array([1, 1]), np.array([1, 1])) == 1.0
        assert metric_accuracy(np.array([1, 1]), np.array([0, 0])) == 0.0

    def test_r2(self):
        y = np.array([1.0, 2.0, 3.0])
        assert metric_r2(y, y) == 1.0
        assert metric_r2(np.full(3, y.mean()), y) == 0.0
        assert metric_r2(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(-3.0)

    def test_r2_errors(self):
        with pytest.raises(DataError):
            metric_r2(np.array([1.0, 2.0]), np.array([3.0, 3.0]))

    def test_mae(self):
        assert metric_mae(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
        assert metric_mae(np.array([0.0, 2.0]), np.array([1.0, 1.0])) == 1.0

    def test_mae_homogeneity(self, rng):
        pred = rng.normal(size=50)
        y = rng.normal(size=50)
        c = -3.7
        assert metric_mae(c * pred, c * y) == pytest.approx(abs(c) * metric_mae(pred, y))

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            metric_accuracy(np.array([]), np.array([]))


class TestGenerators:
    def test_planted_lookup_is_perfect_without_flips(self):
        ds = gen_planted_icf(400, 6, d_noise=2, flip_prob=0.0, seed=5)
        codes = ds.X[:, 0].astype(int)
        lookup = {}
        for c, t in zip(codes, ds.y):
            lookup.setdefault(c, t)
        pred = np.array([lookup[c] for c in codes])
        assert metric_accuracy(pred, ds.y) == 1.0

    def test_planted_code_order_carries_no_signal(self):
        corrs = []
        for seed in range(20):
            ds = gen_planted_icf(4000, 20, d_noise=0, flip_prob=0.0, seed=seed)
            corrs.append(np.corrcoef(ds.X[:, 0], ds.y)[0, 1])
        assert abs(np.mean(corrs)) < 0.1

    def test_planted_chi2_signal(self):
        ds = gen_planted_icf(4000, 20, d_noise=0, flip_prob=0.1, seed=11)
        res = chi2_independence(ds.X[:, 0].astype(int), ds.y.astype(int))
        assert res.p_value < 1e-10

    def test_nonsmooth_zero_noise(self):
        ds = gen_nonsmooth_regression(100, 1.0, noise_std=0.0, seed=0)
        np.testing.assert_allclose(ds.y, np.sin(2 * np.pi * ds.X[:, 0]), atol=1e-12)

    def test_nonsmooth_best_possible_r2(self):
        # signal variance of sin is 0.5, so noise 0.1 caps r2 near 1 - 0.01/0.51
        ds = gen_nonsmooth_regression(50_000, 20.0, noise_std=0.1, seed=1)
        ideal = np.sin(2 * np.pi * 20.0 * ds.X[:, 0])
        r2 = metric_r2(ideal, ds.y)
        assert r2 == pytest.approx(1.0 - 0.01 / np.var(ds.y), abs=5e-3)


class TestDatasetInvariants:
    def test_immutable_after_load(self):
        ds = gen_planted_icf(100, 4, seed=0)
        with pytest.raises(ValueError):
            ds.X[0, 0] = 99.0

    def test_rejects_nan(self):
        import numpy as np

        from icftab.data import ColumnMeta

        with pytest.raises(DataError):
            Dataset(
                X=np.array([[np.nan]]),
                y=np.array([0.0]),
                task="regression",
                columns=(ColumnMeta("a", "numerical", 0, 1),),
                split=np.zeros(1, dtype=np.int8),
            )
