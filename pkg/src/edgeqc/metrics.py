"""Classification metrics with the defect class (1) as positive."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError
from .forest import Forest, predict_proba


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
        }


def report_from_counts(tp: int, fp: int, fn: int, tn: int) -> MetricsReport:
    """Rates from confusion counts.

    Degenerate conventions: with no positive truth and no positive
    predictions (tp = fp = fn = 0) precision, recall, and F1 are all 1;
    with positives present but never predicted, precision and F1 are 0.
    """
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    precision = tp / (tp + fp) if (tp + fp) else (1.0 if fn == 0 else 0.0)
    recall = tp / (tp + fn) if (tp + fn) else (1.0 if fp == 0 else 0.0)
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return MetricsReport(accuracy, precision, recall, f1, tp, fp, fn, tn)


def evaluate(forest: Forest, X: np.ndarray, y: np.ndarray,
             threshold: float = 0.5) -> MetricsReport:
    """Score the forest on model-space inputs.

    A row is predicted defective iff p(defect) is strictly above the
    threshold, so exact ties go to the good class.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise EmptyInputError("evaluate requires at least one sample")
    pred = (predict_proba(forest, X)[:, 1] > threshold).astype(int)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    return report_from_counts(tp, fp, fn, tn)
