"""Multiclass evaluation: confusion matrix, precision/recall/F1, ROC/AUC.

All metrics are computed as fractions; percent scaling and integer
rounding (half-up) happen only at display time. Per-class TP/FP/FN come
from the one-vs-rest reduction of the confusion matrix; ROC curves are
one-vs-rest per class with tied scores grouped into single points.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .dataset import dumps_canonical


def confusion(actual, predicted, num_classes: int) -> np.ndarray:
    """counts[a][p] = number of samples with actual class a predicted as p."""
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise ValueError(
            f"actual and predicted must be equal-length vectors, got "
            f"{actual.shape} and {predicted.shape}")
    for name, arr in (("actual", actual), ("predicted", predicted)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"{name} labels fall outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (actual, predicted), 1)
    return counts


@dataclass
class ClassMetrics:
    class_index: int
    precision: float
    recall: float
    f1: float
    support: int


def _ratio(num: float, den: float) -> float:
    # zero-denominator metrics are defined as 0 so aggregates stay total
    return num / den if den > 0 else 0.0


def class_metrics(cm: np.ndarray) -> list[ClassMetrics]:
    """Per-class one-vs-rest precision, recall and F1 from a confusion matrix."""
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    if cm.sum() == 0:
        raise ValueError("confusion matrix is empty")
    out = []
    for c in range(cm.shape[0]):
        tp = float(cm[c, c])
        fp = float(cm[:, c].sum()) - tp
        fn = float(cm[c, :].sum()) - tp
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        f1 = _ratio(2.0 * precision * recall, precision + recall)
        out.append(ClassMetrics(c, precision, recall, f1, int(cm[c, :].sum())))
    return out


@dataclass
class Summary:
    precision: float
    recall: float
    f1: float
    accuracy: float


def aggregate(per_class: list[ClassMetrics], cm: np.ndarray) -> tuple[Summary, Summary]:
    """(macro, weighted) summaries; both carry the split-global accuracy."""
    cm = np.asarray(cm)
    if len(per_class) != cm.shape[0]:
        raise ValueError("per-class metrics do not match the confusion matrix")
    total = cm.sum()
    accuracy = float(np.trace(cm) / total)
    count = len(per_class)
    supports = np.array([m.support for m in per_class], dtype=np.float64)
    weights = supports / total

    def mean(values) -> float:
        return float(sum(values) / count)

    def weighted(values) -> float:
        return float(sum(w * v for w, v in zip(weights, values)))

    precisions = [m.precision for m in per_class]
    recalls = [m.recall for m in per_class]
    f1s = [m.f1 for m in per_class]
    macro = Summary(mean(precisions), mean(recalls), mean(f1s), accuracy)
    weighted_summary = Summary(weighted(precisions), weighted(recalls), weighted(f1s),
                               accuracy)
    return macro, weighted_summary


@dataclass
class RocCurve:
    class_index: int
    points: list[tuple[float, float]]   # (FPR, TPR), FPR nondecreasing
    auc: float | None                   # None when the class lacks pos or neg


def roc_curve(actual, scores: np.ndarray, class_index: int) -> RocCurve:
    """One-vs-rest ROC for one class; thresholds sweep the distinct scores.

    Classes with no positives or no negatives yield an empty curve with
    ``auc=None`` and a warning instead of an error.
    """
    actual = np.asarray(actual, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != actual.shape[0]:
        raise ValueError("scores must be (N, C) aligned with actual labels")
    row_sums = scores.sum(axis=1)
    if scores.size and np.abs(row_sums - 1.0).max() > 1e-6:
        raise ValueError("score rows must sum to 1")

    positive = actual == class_index
    pos = int(positive.sum())
    neg = int(actual.shape[0] - pos)
    if pos == 0 or neg == 0:
        warnings.warn(
            f"class {class_index} has no {'positives' if pos == 0 else 'negatives'}; "
            "ROC curve omitted", stacklevel=2)
        return RocCurve(class_index, [], None)

    s = scores[:, class_index]
    order = np.argsort(-s, kind="stable")
    sorted_scores = s[order]
    sorted_pos = positive[order]

    tp_cum = np.cumsum(sorted_pos)
    fp_cum = np.cumsum(~sorted_pos)
    # group tied scores: keep the last index of each distinct value
    last_of_group = np.nonzero(np.append(np.diff(sorted_scores) != 0, True))[0]

    points = [(0.0, 0.0)]
    for i in last_of_group:
        points.append((fp_cum[i] / neg, tp_cum[i] / pos))
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(class_index, points, auc)


@dataclass
class EvalReport:
    confusion: np.ndarray
    per_class: list[ClassMetrics]
    macro: Summary
    weighted: Summary
    roc: list[RocCurve]

    @property
    def accuracy(self) -> float:
        return self.macro.accuracy


def evaluate_predictions(actual, predicted, scores: np.ndarray,
                         num_classes: int) -> EvalReport:
    """Full evaluation from labels, argmax predictions and probability rows."""
    cm = confusion(actual, predicted, num_classes)
    per_class = class_metrics(cm)
    macro, weighted = aggregate(per_class, cm)
    roc = [roc_curve(actual, scores, c) for c in range(num_classes)]
    return EvalReport(cm, per_class, macro, weighted, roc)


def display_percent(fraction: float) -> int:
    """Display rule for published tables: percent, rounded half-up."""
    return int(Decimal(fraction * 100.0).quantize(0, rounding=ROUND_HALF_UP))


def report_dict(report: EvalReport, class_names: list[str] | None = None,
                provenance: dict | None = None) -> dict:
    doc = {
        "confusion": report.confusion.tolist(),
        "per_class": [
            {"class": m.class_index, "precision": m.precision, "recall": m.recall,
             "f1": m.f1, "support": m.support}
            for m in report.per_class
        ],
        "macro": vars(report.macro).copy(),
        "weighted": vars(report.weighted).copy(),
        "roc": [
            {"class": r.class_index, "auc": r.auc,
             "points": [[p[0], p[1]] for p in r.points]}
            for r in report.roc
        ],
    }
    if class_names:
        doc["class_names"] = class_names
    if provenance:
        doc["provenance"] = provenance
    return doc


def save_report(report: EvalReport, path: str | Path,
                class_names: list[str] | None = None,
                provenance: dict | None = None) -> None:
    Path(path).write_text(dumps_canonical(report_dict(report, class_names, provenance)))


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def save_confusion_csv(cm: np.ndarray, path: str | Path,
                       class_names: list[str] | None = None) -> None:
    cm = np.asarray(cm)
    names = class_names or [str(i) for i in range(cm.shape[0])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["actual\\predicted"] + names)
        for name, row in zip(names, cm):
            writer.writerow([name] + [int(v) for v in row])


def save_roc_csvs(curves: list[RocCurve], directory: str | Path) -> list[Path]:
    """One (fpr, tpr) CSV per class with a defined curve."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for curve in curves:
        if curve.auc is None:
            continue
        path = directory / f"roc_class_{curve.class_index}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fpr", "tpr"])
            for fpr, tpr in curve.points:
                writer.writerow([f"{fpr:.10g}", f"{tpr:.10g}"])
        written.append(path)
    return written
