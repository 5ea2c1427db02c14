"""Accuracy / F1 for binary problems, with rejected points counted as errors."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MetricsReport:
    accuracy: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    n: int
    unclassified: int = 0

    @property
    def confusion(self):
        """[[TP, FN], [FP, TN]] with the positive class first."""
        return [[self.tp, self.fn], [self.fp, self.tn]]

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "confusion": {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn},
            "n": self.n,
            "unclassified": self.unclassified,
        }


def compute_metrics(predictions, labels, positive_class, unclassified=None) -> MetricsReport:
    """Binary accuracy and F1.

    ``predictions`` holds predicted labels; entries equal to ``unclassified``
    (or flagged in a boolean mask passed as ``unclassified``) never match a
    label and count as a negative prediction.
    """
    pred = np.asarray(predictions, dtype=object)
    true = np.asarray(labels, dtype=object)
    if pred.shape != true.shape:
        raise ValueError("predictions and labels must have equal length")
    if unclassified is None:
        rejected = np.zeros(pred.shape, dtype=bool)
    else:
        rejected = np.asarray(unclassified, dtype=bool)
    pos_pred = (pred == positive_class) & ~rejected
    pos_true = true == positive_class
    correct = (pred == true) & ~rejected
    tp = int(np.sum(pos_pred & pos_true))
    fp = int(np.sum(pos_pred & ~pos_true))
    fn = int(np.sum(~pos_pred & pos_true))
    tn = int(np.sum(~pos_pred & ~pos_true))
    n = int(pred.shape[0])
    acc = float(np.sum(correct) / n) if n else 0.0
    denom = 2 * tp + fp + fn
    f1 = 2.0 * tp / denom if denom else 0.0
    return MetricsReport(acc, f1, tp, fp, fn, tn, n, int(rejected.sum()))


@dataclass
class AggregateMetrics:
    folds: list = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([m.accuracy for m in self.folds]))

    @property
    def mean_f1(self) -> float:
        return float(np.mean([m.f1 for m in self.folds]))
