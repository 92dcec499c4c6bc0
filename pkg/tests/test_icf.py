"""Implicitly-categorical feature detection on planted data."""

import numpy as np
import pytest

from icftab.data import CLASSIFICATION, REGRESSION, ColumnMeta, Dataset, split_dataset
from icftab.errors import ConfigurationError
from icftab.icf import (
    GATE_AUTO,
    GATE_SKIP,
    GATE_TEST,
    IcfConfig,
    IcfReport,
    cardinality_gate,
    detect_classification,
    detect_regression_anova,
    detect_regression_mi,
    run_icf,
)
from icftab.synth import gen_planted_icf


def make_regression(X, y, categorical=()):
    X = np.asarray(X, dtype=np.float64)
    cols = tuple(
        ColumnMeta(
            name=f"c{j}",
            declared_kind="categorical" if j in categorical else "numerical",
            index=j,
            cardinality=int(np.unique(X[:, j]).size),
        )
        for j in range(X.shape[1])
    )
    return Dataset(
        X=X, y=np.asarray(y, dtype=np.float64), task=REGRESSION,
        columns=cols, split=np.zeros(len(y), dtype=np.int8),
    )


class TestCardinalityGate:
    def test_skip_above_upper_gate(self):
        cfg = IcfConfig(max_cardinality=5000)
        assert cardinality_gate(6000, cfg) == GATE_SKIP

    def test_upper_gate_inclusive(self):
        cfg = IcfConfig(max_cardinality=5000)
        assert cardinality_gate(5000, cfg) == GATE_TEST

    def test_auto_low_cardinality(self):
        cfg = IcfConfig(min_cardinality=10, auto_low_card=True)
        assert cardinality_gate(8, cfg) == GATE_AUTO

    def test_auto_disabled(self):
        cfg = IcfConfig(min_cardinality=10, auto_low_card=False)
        assert cardinality_gate(8, cfg) == GATE_TEST

    def test_middle_is_tested(self):
        cfg = IcfConfig(min_cardinality=10, max_cardinality=500, auto_low_card=True)
        assert cardinality_gate(200, cfg) == GATE_TEST

    def test_skip_dominates_auto(self):
        cfg = IcfConfig(min_cardinality=100, max_cardinality=300, auto_low_card=True)
        assert cardinality_gate(301, cfg) == GATE_SKIP


class TestDetectClassification:
    def test_planted_column_flagged_and_noise_clean(self):
        cfg = IcfConfig(test="chi2", chi_thresh=1e-3, auto_low_card=False)
        false_pos = 0
        hits = 0
        for seed in range(20):
            ds = split_dataset(gen_planted_icf(4000, 20, d_noise=4, flip_prob=0.1, seed=seed), (0.6, 0.2, 0.2), seed)
            report = detect_classification(ds, cfg)
            if 0 in report.icf_indices:
                hits += 1
            false_pos += sum(1 for j in report.icf_indices if j != 0)
        assert hits == 20
        assert false_pos <= 1

    def test_column_equal_to_target_always_flagged(self):
        rng = np.random.default_rng(0)
        y = rng.permutation(np.repeat([0.0, 1.0], 250))
        X = np.column_stack([y, rng.normal(size=500)])
        cols = tuple(
            ColumnMeta(f"c{j}", "numerical", j, int(np.unique(X[:, j]).size)) for j in range(2)
        )
        ds = Dataset(X=X, y=y, task=CLASSIFICATION, columns=cols, split=np.zeros(500, dtype=np.int8))
        report = detect_classification(ds, IcfConfig(test="chi2", chi_thresh=1e-50))
        assert 0 in report.icf_indices

    def test_high_cardinality_perfect_predictor_skipped(self):
        n = 6000
        y = np.tile([0.0, 1.0], n // 2)
        X = np.arange(n, dtype=np.float64)[:, None]  # unique per row, predicts y exactly
        cols = (ColumnMeta("c0", "numerical", 0, n),)
        ds = Dataset(X=X, y=y, task=CLASSIFICATION, columns=cols, split=np.zeros(n, dtype=np.int8))
        report = detect_classification(ds, IcfConfig(test="chi2", max_cardinality=5000))
        assert report.columns[0].gate == GATE_SKIP
        assert 0 not in report.icf_indices


class TestDetectRegressionAnova:
    def test_separated_means_flagged(self):
        cfg = IcfConfig(test="anova", anova_thresh=1e-3)
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            codes = rng.integers(0, 10, size=1000).astype(np.float64)
            y = 3.0 * codes + rng.standard_normal(1000)
            ds = make_regression(np.column_stack([codes, rng.normal(size=1000)]), y)
            report = detect_regression_anova(ds, cfg)
            hits += 0 in report.icf_indices
        assert hits >= 19

    def test_null_false_positive_rate(self):
        thresh = 1e-3
        cfg = IcfConfig(test="anova", anova_thresh=thresh)
        flags = 0
        trials = 0
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            codes = rng.integers(0, 8, size=400).astype(np.float64)
            y = rng.standard_normal(400)
            ds = make_regression(codes[:, None], y)
            report = detect_regression_anova(ds, cfg)
            flags += 0 in report.icf_indices
            trials += 1
        assert flags <= max(2, 2 * thresh * trials)

    def test_constant_feature_not_flagged(self):
        rng = np.random.default_rng(0)
        ds = make_regression(np.ones((100, 1)), rng.normal(size=100))
        report = detect_regression_anova(ds, IcfConfig(test="anova"))
        assert report.icf_indices == []


class TestDetectRegressionMi:
    def test_permutation_coded_feature_flagged(self):
        cfg = IcfConfig(test="mutual_info", mi_thresh=1.25, max_cardinality=300)
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            k = 50
            codes = rng.integers(0, k, size=4000).astype(np.float64)
            perm = rng.permutation(k)
            y = perm[codes.astype(int)] / k + 0.1 * rng.standard_normal(4000)
            ds = make_regression(codes[:, None], y)
            report = detect_regression_mi(ds, cfg)
            hits += 0 in report.icf_indices
        assert hits >= 18

    def test_linear_feature_declined(self):
        cfg = IcfConfig(test="mutual_info", mi_thresh=1.25, max_cardinality=300)
        declines = 0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            codes = rng.integers(0, 50, size=4000).astype(np.float64)
            y = codes / 50 + 0.1 * rng.standard_normal(4000)
            ds = make_regression(codes[:, None], y)
            report = detect_regression_mi(ds, cfg)
            declines += 0 not in report.icf_indices
        assert declines >= 18

    def test_zero_over_zero_not_flagged(self):
        # constant column: categorize and binning both give a single
        # code, so numerator and denominator vanish together
        rng = np.random.default_rng(0)
        ds = make_regression(np.ones((200, 1)), rng.normal(size=200))
        report = detect_regression_mi(ds, IcfConfig(test="mutual_info"))
        assert report.icf_indices == []
        assert report.columns[0].mi_ratio == 0.0


class TestRunIcf:
    def test_task_mismatch(self):
        ds = gen_planted_icf(200, 4, seed=0)
        with pytest.raises(ConfigurationError):
            run_icf(ds, IcfConfig(test="anova"))

    def test_explicit_annotations_merged(self):
        rng = np.random.default_rng(0)
        X = np.column_stack([rng.integers(0, 3, 200).astype(float), rng.normal(size=200)])
        ds = make_regression(X, rng.normal(size=200), categorical={0})
        report = run_icf(ds, IcfConfig(test="anova", anova_thresh=1e-30))
        assert report.icf_indices == [0]

    def test_planted_dataset_detected(self):
        ds = split_dataset(gen_planted_icf(4000, 20, d_noise=2, flip_prob=0.1, seed=3), (0.6, 0.2, 0.2), 3)
        report = run_icf(ds, IcfConfig(test="chi2", chi_thresh=1e-3))
        assert 0 in report.icf_indices

    def test_json_roundtrip(self, tmp_path):
        ds = split_dataset(gen_planted_icf(1000, 5, d_noise=1, seed=1), (0.6, 0.2, 0.2), 1)
        report = run_icf(ds, IcfConfig(test="chi2"))
        path = tmp_path / "report.json"
        report.save(path)
        back = IcfReport.load(path)
        assert back.icf_indices == report.icf_indices
        assert back.test == report.test
        assert [c.index for c in back.columns] == [c.index for c in report.columns]


class TestInvariants:
    def test_determinism(self):
        ds = split_dataset(gen_planted_icf(1000, 8, d_noise=2, flip_prob=0.2, seed=5), (0.6, 0.2, 0.2), 5)
        cfg = IcfConfig(test="chi2", chi_thresh=1e-5)
        a = run_icf(ds, cfg)
        b = run_icf(ds, cfg)
        assert a.icf_indices == b.icf_indices
        assert a.columns == b.columns

    def test_threshold_monotonicity(self):
        ds = split_dataset(gen_planted_icf(1000, 8, d_noise=3, flip_prob=0.3, seed=6), (0.6, 0.2, 0.2), 6)
        loose = run_icf(ds, IcfConfig(test="chi2", chi_thresh=1e-3))
        tight = run_icf(ds, IcfConfig(test="chi2", chi_thresh=1e-20))
        assert set(tight.icf_indices) <= set(loose.icf_indices)

    def test_train_only_dependence(self):
        base = gen_planted_icf(1000, 8, d_noise=2, flip_prob=0.2, seed=7)
        ds = split_dataset(base, (0.6, 0.2, 0.2), 7)
        # perturb every non-training row; the report must not move
        X = ds.X.copy()
        X[ds.split != 0] += 100.0
        shaken = Dataset(X=X, y=ds.y.copy(), task=ds.task, columns=ds.columns, split=ds.split.copy())
        cfg = IcfConfig(test="chi2", chi_thresh=1e-4)
        assert run_icf(ds, cfg).icf_indices == run_icf(shaken, cfg).icf_indices

    def test_mi_threshold_monotonicity(self):
        rng = np.random.default_rng(9)
        codes = rng.integers(0, 30, size=2000).astype(np.float64)
        perm = rng.permutation(30)
        y = perm[codes.astype(int)] / 30 + 0.3 * rng.standard_normal(2000)
        ds = make_regression(np.column_stack([codes, rng.normal(size=2000)]), y)
        low = run_icf(ds, IcfConfig(test="mutual_info", mi_thresh=0.8, max_cardinality=300))
        high = run_icf(ds, IcfConfig(test="mutual_info", mi_thresh=1.5, max_cardinality=300))
        assert set(high.icf_indices) <= set(low.icf_indices)
