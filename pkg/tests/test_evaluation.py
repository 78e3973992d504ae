import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from wearrhythm.errors import SingleClass
from wearrhythm.evaluation import (EvalConfig, Standardizer, _split_validation, apply_axis,
                                   auc_concordance, balance_by_replication, cross_validate,
                                   design_arrays, f_beta_score, fit_model, metrics, plan_folds,
                                   standardize)
from wearrhythm.features import SENSOR_FEATURES
from wearrhythm.network import NetworkConfig
from wearrhythm.pipeline import RHYTHM_FEATURES, Sample
from wearrhythm.training import TrainConfig

TINY_NET = NetworkConfig(gru_hidden=4, heads=2, rhythm_fc=4, joint_fc=4)
TINY_TRAIN = TrainConfig(max_epochs=3)


def fake_samples(n_healthy=10, n_infected=10, windows=47, seed=0, shift=1.5):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_healthy + n_infected):
        label = int(i >= n_healthy)
        sensor = rng.normal(size=(windows, 39)) + shift * label
        rhythm = {24: rng.normal(size=351) + shift * label}
        out.append(Sample(f"S{i:03d}", "2020-01-01", label, sensor, rhythm))
    return out


class TestBalance:
    def test_cohort_counts(self):
        y = np.array([0] * 70 + [1] * 25)
        idx = balance_by_replication(y)
        assert np.bincount(y[idx]).tolist() == [70, 70]
        assert idx.size - y.size == 45
        # cyclic: every infected index used at least once, none more than twice beyond the original
        counts = np.bincount(idx[y[idx] == 1], minlength=95)[70:]
        assert counts.min() == 2 and counts.max() == 3

    def test_balanced_identity(self):
        y = np.array([0, 1, 1, 0])
        assert list(balance_by_replication(y)) == [0, 1, 2, 3]

    def test_three_one(self):
        y = np.array([0, 0, 0, 1])
        assert list(balance_by_replication(y)) == [0, 1, 2, 3, 3, 3]

    def test_single_class(self):
        with pytest.raises(SingleClass):
            balance_by_replication([1, 1])

    @given(st.integers(1, 30), st.integers(1, 30))
    def test_distinct_members_unchanged(self, a, b):
        y = np.array([0] * a + [1] * b)
        idx = balance_by_replication(y)
        assert set(idx.tolist()) == set(range(a + b))
        assert np.sum(y[idx] == 0) == np.sum(y[idx] == 1) == max(a, b)


class TestStandardize:
    def test_examples(self):
        train = np.array([[50.0], [70.0]])
        assert standardize(train, np.array([[60.0]]))[0, 0] == 0
        assert standardize(train, np.array([[70.0]]))[0, 0] == 1

    def test_uses_train_stats_not_own(self):
        rng = np.random.default_rng(0)
        train = rng.normal(0, 1, (100, 3))
        test = rng.normal(100, 10, (50, 3))
        out = standardize(train, test)
        assert abs(out.mean()) > 50  # a self-standardized test set would be centred
        np.testing.assert_allclose(out, (test - train.mean(0)) / train.std(0))

    def test_constant_column_centred_only(self):
        s = Standardizer.fit(np.array([[1.0, 5.0], [3.0, 5.0]]))
        assert s.constant.tolist() == [False, True]
        np.testing.assert_array_equal(s.transform(np.array([[2.0, 7.0]])), [[0.0, 2.0]])


class TestMetrics:
    def test_perfect(self):
        r = metrics([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1])
        assert (r.auc_roc, r.sensitivity, r.specificity) == (1.0, 1.0, 1.0)

    def test_half_auc(self):
        assert auc_concordance([1, 1, 0, 0], [0.9, 0.3, 0.6, 0.4]) == 0.5

    def test_f_beta_formula(self):
        assert f_beta_score(0.8, 0.5, 0.1) == pytest.approx(0.7953, abs=1e-4)

    def test_single_class_auc_undefined(self):
        r = metrics([1, 1], [0.2, 0.9])
        assert math.isnan(r.auc_roc)
        assert r.to_dict()["auc_roc"] is None

    def test_sensitivity_equals_recall(self):
        r = metrics([1, 0, 1, 0, 1], [0.7, 0.6, 0.2, 0.1, 0.5])
        assert r.sensitivity == r.recall == pytest.approx(2 / 3)
        assert r.precision == pytest.approx(2 / 3)
        assert (r.tp, r.fp, r.tn, r.fn) == (2, 1, 1, 1)

    @given(arrays(int, 12, elements=st.integers(0, 1)),
           arrays(float, 12, elements=st.integers(0, 100).map(lambda v: v / 100)))
    def test_auc_oracle_and_monotone_invariance(self, y, s):
        if len(set(y.tolist())) < 2:
            return
        auc = auc_concordance(y, s)
        assert auc == pytest.approx(oracles.auc_pairs(y, s))
        assert auc_concordance(y, np.exp(3 * s) - 7) == auc
        r = metrics(y, s)
        for v in (r.sensitivity, r.specificity, r.auc_roc, r.f_beta, r.precision):
            assert 0 <= v <= 1


class TestFolds:
    def test_95_subjects(self):
        labels = {f"H{i}": 0 for i in range(70)} | {f"I{i}": 1 for i in range(25)}
        plan = plan_folds(labels, 5, 0)
        assert [len(f) for f in plan.folds] == [19] * 5
        assert [sum(labels[s] for s in f) for f in plan.folds] == [5] * 5
        seen = [s for f in plan.folds for s in f]
        assert sorted(seen) == sorted(labels)
        for k in range(5):
            train, test = plan.train_test(k)
            assert not train & test and train | test == set(labels)

    def test_seeded(self):
        labels = {f"S{i}": i % 2 for i in range(20)}
        assert plan_folds(labels, 5, 1).folds == plan_folds(labels, 5, 1).folds
        assert plan_folds(labels, 5, 1).folds != plan_folds(labels, 5, 2).folds

    def test_validation_split_is_subject_wise_and_stratified(self):
        samples = fake_samples(10, 10)
        fit, val = _split_validation(samples, list(range(20)), 0.2, np.random.default_rng(0))
        assert sorted(fit + val) == list(range(20))
        assert [samples[i].label for i in val].count(1) == 2
        assert [samples[i].label for i in val].count(0) == 2


class TestCrossValidate:
    def test_deterministic(self):
        samples = fake_samples()
        a = cross_validate(samples, 7, EvalConfig(), TINY_NET, TINY_TRAIN)
        b = cross_validate(samples, 7, EvalConfig(), TINY_NET, TINY_TRAIN)
        assert a.summary() == b.summary()
        assert len(a.folds) == 5

    def test_logistic_baseline_separates(self):
        rep = cross_validate(fake_samples(shift=2.0), 0, EvalConfig(model="logistic"))
        assert rep.aggregate["auc_roc"]["mean"] > 0.9

    def test_mi_selection_runs_per_fold(self):
        rep = cross_validate(fake_samples(), 0, EvalConfig(features="mi"), TINY_NET, TINY_TRAIN)
        for f in rep.folds:
            assert len(f.model.selection.sensor) == 10
            assert set(f.model.selection.rhythm) <= set(RHYTHM_FEATURES)

    def test_subsequence_truncation(self):
        samples = fake_samples(4, 4)
        cfg = EvalConfig(subseq_len=5)
        sel = fit_model(samples, list(range(8)), cfg, TINY_NET, TINY_TRAIN, 0).selection
        s, r, _ = design_arrays(samples, [0, 1], sel, cfg)
        assert s.shape == (2, 5, 10)
        idx = [SENSOR_FEATURES.index(f) for f in sel.sensor]
        np.testing.assert_array_equal(s[0], samples[0].sensor[-5:, idx])

    def test_overlap_zero_stack(self):
        samples = fake_samples(5, 5, windows=24)
        rep = cross_validate(samples, 0, EvalConfig(), TINY_NET, TINY_TRAIN)
        assert rep.folds[0].model.net.seq_len == 24

    def test_heads_zero(self):
        ecfg, ncfg = apply_axis("heads", 0, EvalConfig(), TINY_NET)
        rep = cross_validate(fake_samples(5, 5), 0, ecfg, ncfg, TINY_TRAIN)
        assert not any(k.startswith("att_") for k in rep.folds[0].model.params)

    def test_test_fold_data_cannot_move_weights(self):
        samples = fake_samples()
        base = cross_validate(samples, 3, EvalConfig(features="mi"), TINY_NET, TINY_TRAIN)
        test_subjects = set(base.folds[0].test_subjects)
        mutated = [replace(s, sensor=s.sensor * 10 + 5, rhythm={24: -s.rhythm[24]})
                   if s.subject_id in test_subjects else s for s in samples]
        again = cross_validate(mutated, 3, EvalConfig(features="mi"), TINY_NET, TINY_TRAIN)
        p0, p1 = base.folds[0].model.params, again.folds[0].model.params
        assert all(np.array_equal(p0[k], p1[k]) for k in p0)

    def test_global_ranking_leaks(self):
        samples = fake_samples(seed=1, shift=0.3)
        cfg = EvalConfig(features="mi", global_ranking=True)
        base = cross_validate(samples, 3, cfg, TINY_NET, TINY_TRAIN)
        test_subjects = set(base.folds[0].test_subjects)
        rng = np.random.default_rng(5)
        mutated = [replace(s, sensor=rng.normal(size=s.sensor.shape) * 50)
                   if s.subject_id in test_subjects else s for s in samples]
        again = cross_validate(mutated, 3, cfg, TINY_NET, TINY_TRAIN)
        assert base.folds[0].model.selection.sensor != again.folds[0].model.selection.sensor
