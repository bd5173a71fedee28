"""Confusion matrices and the two per-class scores used for model choice.

The selection score divides true positives by the predicted-column total,
TP / (TP + FP) — the false-positive-averse form used to rank models.
Standard recall, TP / (TP + FN), is computed alongside it because the two
disagree except on symmetric confusion matrices; reports show both. A 0/0
score is defined as 0.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..core import SentitradeError

N_CLASSES = 3


class LengthMismatch(SentitradeError):
    """y_true and y_pred have different lengths (or are empty)."""


class Metric(Enum):
    EQ1 = "eq1"
    STANDARD_RECALL = "standard-recall"

    @classmethod
    def from_text(cls, raw: str) -> "Metric":
        try:
            return cls(raw.strip().lower())
        except ValueError:
            raise ValueError(f"unknown metric {raw!r} (want eq1 or standard-recall)") from None


def confusion(y_true, y_pred) -> np.ndarray:
    """3x3 counts; rows are true classes, columns predicted classes."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise LengthMismatch(
            f"need equal nonempty label vectors, got {y_true.size} and {y_pred.size}"
        )
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def selection_score(cm: np.ndarray, c: int) -> float:
    """TP / (TP + FP) for class c, column-wise; 0 when nothing was
    predicted as c."""
    column_total = int(cm[:, c].sum())
    return float(cm[c, c]) / column_total if column_total else 0.0


def standard_recall(cm: np.ndarray, c: int) -> float:
    """TP / (TP + FN) for class c, row-wise; 0 when class c never occurs."""
    row_total = int(cm[c, :].sum())
    return float(cm[c, c]) / row_total if row_total else 0.0


def per_class_scores(cm: np.ndarray, metric: Metric) -> np.ndarray:
    score = selection_score if metric is Metric.EQ1 else standard_recall
    return np.array([score(cm, c) for c in range(N_CLASSES)])
