"""Definitional brute-force oracles, independent of the library code paths.

Everything here is written as plain loops straight from the definitions so
it stays an honest cross-check: no shared helpers with pestid.metrics.
"""

from __future__ import annotations

import numpy as np


def confusion_by_nested_loops(actual, predicted, num_classes):
    counts = [[0] * num_classes for _ in range(num_classes)]
    for a, p in zip(actual, predicted):
        counts[a][p] += 1
    return counts


def per_class_by_counts(actual, predicted, num_classes):
    """precision/recall/f1/support per class from raw TP/FP/FN counting."""
    out = []
    for c in range(num_classes):
        tp = sum(1 for a, p in zip(actual, predicted) if a == c and p == c)
        fp = sum(1 for a, p in zip(actual, predicted) if a != c and p == c)
        fn = sum(1 for a, p in zip(actual, predicted) if a == c and p != c)
        support = sum(1 for a in actual if a == c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out.append({"precision": precision, "recall": recall, "f1": f1,
                    "support": support})
    return out


def accuracy_by_count(actual, predicted):
    return sum(1 for a, p in zip(actual, predicted) if a == p) / len(actual)


def macro_weighted_by_definition(per_class, total):
    macro = {k: sum(m[k] for m in per_class) / len(per_class)
             for k in ("precision", "recall", "f1")}
    weighted = {k: sum(m[k] * m["support"] / total for m in per_class)
                for k in ("precision", "recall", "f1")}
    return macro, weighted


def roc_by_threshold_enumeration(actual, scores_c, class_index):
    """Sweep every distinct score as a threshold (predict positive when
    score >= threshold), plus a sentinel above the maximum."""
    positives = [1 if a == class_index else 0 for a in actual]
    pos = sum(positives)
    neg = len(positives) - pos
    if pos == 0 or neg == 0:
        return None, None
    thresholds = sorted(set(scores_c), reverse=True)
    points = [(0.0, 0.0)]
    for t in thresholds:
        tp = sum(1 for s, y in zip(scores_c, positives) if s >= t and y == 1)
        fp = sum(1 for s, y in zip(scores_c, positives) if s >= t and y == 0)
        points.append((fp / neg, tp / pos))
    points.sort()
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return points, auc


def random_multiclass_instance(rng, max_classes=8, max_samples=100):
    """Labels, argmax predictions and probability rows for oracle checks."""
    num_classes = int(rng.integers(2, max_classes + 1))
    n = int(rng.integers(num_classes, max_samples + 1))
    actual = rng.integers(0, num_classes, size=n)
    raw = rng.random(size=(n, num_classes)) + 1e-6
    scores = raw / raw.sum(axis=1, keepdims=True)
    predicted = scores.argmax(axis=1)
    return actual, predicted, scores, num_classes
