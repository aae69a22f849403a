"""Metric suite against definitional oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pestid.metrics import (
    RocCurve,
    aggregate,
    class_metrics,
    confusion,
    display_percent,
    evaluate_predictions,
    report_dict,
    roc_curve,
    save_confusion_csv,
    save_report,
    save_roc_csvs,
)
from tests import oracles


class TestConfusion:
    def test_perfect_predictions_are_diagonal(self):
        actual = np.array([0, 1, 2, 1, 0])
        cm = confusion(actual, actual, 3)
        assert np.trace(cm) == 5
        assert cm.sum() == 5

    def test_81_predictions_with_7_errors_trace_74(self):
        rng = np.random.default_rng(0)
        actual = rng.integers(0, 8, size=81)
        predicted = actual.copy()
        wrong = rng.choice(81, size=7, replace=False)
        predicted[wrong] = (actual[wrong] + 1) % 8
        cm = confusion(actual, predicted, 8)
        assert np.trace(cm) == 74
        assert cm.sum() == 81

    def test_matches_nested_loop_oracle(self):
        rng = np.random.default_rng(1)
        actual = rng.integers(0, 4, size=50)
        predicted = rng.integers(0, 4, size=50)
        cm = confusion(actual, predicted, 4)
        assert cm.tolist() == oracles.confusion_by_nested_loops(actual, predicted, 4)

    def test_length_mismatch_and_range_errors(self):
        with pytest.raises(ValueError):
            confusion([0, 1], [0], 2)
        with pytest.raises(ValueError):
            confusion([0, 5], [0, 1], 2)


class TestClassMetrics:
    def test_perfect_diagonal_gives_ones(self):
        cm = np.diag([5, 3, 7])
        for m in class_metrics(cm):
            assert m.precision == m.recall == m.f1 == 1.0

    def test_f1_harmonic_mean_displays_91(self):
        precision, recall = 0.92, 0.90
        f1 = 2 * precision * recall / (precision + recall)
        assert f1 == pytest.approx(0.9099, abs=5e-5)
        assert display_percent(f1) == 91

    def test_three_class_matrix_matches_count_oracle(self):
        actual = [0, 0, 0, 1, 1, 2, 2, 2, 2]
        predicted = [0, 1, 0, 1, 2, 2, 2, 0, 2]
        cm = confusion(actual, predicted, 3)
        got = class_metrics(cm)
        want = oracles.per_class_by_counts(actual, predicted, 3)
        for g, w in zip(got, want):
            assert g.precision == pytest.approx(w["precision"], abs=1e-12)
            assert g.recall == pytest.approx(w["recall"], abs=1e-12)
            assert g.f1 == pytest.approx(w["f1"], abs=1e-12)
            assert g.support == w["support"]

    def test_zero_denominators_define_zero(self):
        # class 1 never predicted and never present -> all zeros, no NaN
        cm = np.array([[4, 0], [0, 0]])
        m = class_metrics(cm)[1]
        assert m.precision == m.recall == m.f1 == 0.0

    def test_all_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            class_metrics(np.zeros((3, 3), dtype=int))


class TestAggregate:
    def test_identical_classes_symmetry(self):
        cm = np.diag([4, 4]) + np.array([[0, 1], [1, 0]])
        per_class = class_metrics(cm)
        macro, weighted = aggregate(per_class, cm)
        assert macro.precision == pytest.approx(weighted.precision)
        assert macro.f1 == pytest.approx(weighted.f1)

    def test_hand_weighted_two_classes(self):
        # metrics (1.0, 0.0) with supports (3, 1): macro 0.5, weighted 0.75
        from pestid.metrics import ClassMetrics

        per_class = [ClassMetrics(0, 1.0, 1.0, 1.0, 3), ClassMetrics(1, 0.0, 0.0, 0.0, 1)]
        cm = np.array([[3, 0], [1, 0]])
        macro, weighted = aggregate(per_class, cm)
        assert macro.precision == 0.5
        assert weighted.precision == 0.75

    def test_micro_identity_weighted_recall_is_accuracy(self):
        rng = np.random.default_rng(2)
        actual = rng.integers(0, 5, size=60)
        predicted = rng.integers(0, 5, size=60)
        cm = confusion(actual, predicted, 5)
        per_class = class_metrics(cm)
        macro, weighted = aggregate(per_class, cm)
        assert weighted.recall == pytest.approx(np.trace(cm) / cm.sum(), abs=1e-12)
        assert macro.accuracy == weighted.accuracy

    def test_zero_support_class_contributes_zero_at_zero_weight(self):
        cm = np.array([[5, 0, 0], [0, 3, 0], [0, 0, 0]])
        per_class = class_metrics(cm)
        macro, weighted = aggregate(per_class, cm)
        assert weighted.precision == pytest.approx(1.0)
        assert macro.precision == pytest.approx(2 / 3)


class TestRoc:
    def test_perfect_separation(self):
        actual = [0, 0, 1, 1]
        scores = np.array([[0.9, 0.1], [0.8, 0.2], [0.1, 0.9], [0.2, 0.8]])
        curve = roc_curve(actual, scores, 0)
        assert curve.auc == pytest.approx(1.0)
        assert (0.0, 1.0) in curve.points

    def test_identical_scores_give_diagonal(self):
        actual = [0, 1, 0, 1]
        scores = np.full((4, 2), 0.5)
        curve = roc_curve(actual, scores, 0)
        assert curve.points == [(0.0, 0.0), (1.0, 1.0)]
        assert curve.auc == pytest.approx(0.5)

    def test_ten_sample_case_matches_enumeration(self):
        rng = np.random.default_rng(3)
        actual = np.array([0, 1, 1, 0, 1, 0, 0, 1, 1, 0])
        raw = rng.random((10, 2)) + 0.05
        scores = raw / raw.sum(axis=1, keepdims=True)
        for c in (0, 1):
            curve = roc_curve(actual, scores, c)
            points, auc = oracles.roc_by_threshold_enumeration(
                actual, list(scores[:, c]), c)
            assert curve.auc == pytest.approx(auc, abs=1e-9)
            got = sorted(curve.points)
            assert len(got) == len(points)
            for (gx, gy), (wx, wy) in zip(got, points):
                assert gx == pytest.approx(wx, abs=1e-12)
                assert gy == pytest.approx(wy, abs=1e-12)

    def test_curve_starts_at_origin_ends_at_one_one(self):
        rng = np.random.default_rng(4)
        actual = rng.integers(0, 3, size=30)
        raw = rng.random((30, 3)) + 1e-3
        scores = raw / raw.sum(axis=1, keepdims=True)
        curve = roc_curve(actual, scores, 1)
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[-1] == (1.0, 1.0)
        fprs = [p[0] for p in curve.points]
        assert fprs == sorted(fprs)

    def test_degenerate_class_warns_and_marks_undefined(self):
        actual = [0, 0, 0]
        scores = np.full((3, 2), 0.5)
        with pytest.warns(UserWarning, match="no negatives"):
            curve = roc_curve(actual, scores, 0)
        assert curve.auc is None
        assert curve.points == []

    def test_auc_invariant_under_monotone_transform(self):
        # monotone rescaling of class-c scores (renormalized rows keep the
        # same class-c ordering) must not change AUC
        rng = np.random.default_rng(5)
        actual = rng.integers(0, 2, size=40)
        if len(set(actual.tolist())) == 1:
            actual[0] = 1 - actual[0]
        raw = rng.random((40, 2)) + 1e-3
        scores = raw / raw.sum(axis=1, keepdims=True)
        base = roc_curve(actual, scores, 0).auc

        transformed = scores.copy()
        transformed[:, 0] = np.exp(3.0 * transformed[:, 0])  # strictly monotone
        transformed[:, 1] = 1.0  # renormalize to keep rows summing to 1
        transformed /= transformed.sum(axis=1, keepdims=True)
        # renormalization x/(x+1) is also strictly increasing in x
        got = roc_curve(actual, transformed, 0).auc
        assert got == pytest.approx(base, abs=1e-12)

    def test_unnormalized_rows_rejected(self):
        with pytest.raises(ValueError, match="sum to 1"):
            roc_curve([0, 1], np.array([[0.9, 0.9], [0.1, 0.1]]), 0)


@pytest.mark.filterwarnings("ignore:class \\d+ has no")
class TestEvaluatePredictions:
    def test_random_instances_match_oracles(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            actual, predicted, scores, c = oracles.random_multiclass_instance(rng)
            report = evaluate_predictions(actual, predicted, scores, c)
            assert report.confusion.tolist() == \
                oracles.confusion_by_nested_loops(actual, predicted, c)
            want = oracles.per_class_by_counts(actual, predicted, c)
            for g, w in zip(report.per_class, want):
                assert abs(g.precision - w["precision"]) < 1e-9
                assert abs(g.recall - w["recall"]) < 1e-9
                assert abs(g.f1 - w["f1"]) < 1e-9
            macro, weighted = oracles.macro_weighted_by_definition(want, len(actual))
            assert abs(report.macro.precision - macro["precision"]) < 1e-9
            assert abs(report.weighted.f1 - weighted["f1"]) < 1e-9
            assert abs(report.accuracy -
                       oracles.accuracy_by_count(actual, predicted)) < 1e-9

    def test_all_values_inside_unit_interval(self):
        rng = np.random.default_rng(7)
        actual, predicted, scores, c = oracles.random_multiclass_instance(rng)
        report = evaluate_predictions(actual, predicted, scores, c)
        for m in report.per_class:
            assert 0.0 <= m.precision <= 1.0
            assert 0.0 <= m.recall <= 1.0
            assert 0.0 <= m.f1 <= 1.0
        for s in (report.macro, report.weighted):
            assert 0.0 <= s.precision <= 1.0
            assert 0.0 <= s.accuracy <= 1.0


class TestDisplay:
    def test_half_up_rounding(self):
        assert display_percent(0.905) == 91  # 90.5 rounds up, not to even
        assert display_percent(0.9136) == 91
        assert display_percent(0.9099) == 91
        assert display_percent(0.904999) == 90
        assert display_percent(1.0) == 100

    @given(st.floats(min_value=0, max_value=1))
    @settings(max_examples=200, deadline=None)
    def test_display_within_half_percent(self, fraction):
        shown = display_percent(fraction)
        assert abs(shown - fraction * 100) <= 0.5


@pytest.mark.filterwarnings("ignore:class \\d+ has no")
class TestPersistence:
    def make_report(self):
        rng = np.random.default_rng(8)
        actual, predicted, scores, c = oracles.random_multiclass_instance(rng)
        return evaluate_predictions(actual, predicted, scores, c), c

    def test_report_json_round_trip(self, tmp_path):
        report, c = self.make_report()
        path = tmp_path / "report.json"
        save_report(report, path, class_names=[f"k{i}" for i in range(c)],
                    provenance={"master_seed": 3, "config_hash": "h"})
        import json

        doc = json.loads(path.read_text())
        assert doc["confusion"] == report.confusion.tolist()
        assert doc["macro"]["accuracy"] == report.accuracy
        assert len(doc["roc"]) == c
        assert doc["provenance"]["master_seed"] == 3

    def test_confusion_and_roc_csvs(self, tmp_path):
        report, c = self.make_report()
        save_confusion_csv(report.confusion, tmp_path / "cm.csv")
        lines = (tmp_path / "cm.csv").read_text().strip().splitlines()
        assert len(lines) == c + 1
        written = save_roc_csvs(report.roc, tmp_path / "roc")
        for path in written:
            header = path.read_text().splitlines()[0]
            assert header == "fpr,tpr"

    def test_report_dict_is_json_clean(self):
        report, c = self.make_report()
        import json

        json.dumps(report_dict(report))  # no numpy scalars may leak through
