"""Accuracy, per-class and macro F1 over the four stance classes.

Precision, recall and F1 are 0 whenever their denominator is 0, so a class
that is never gold and never predicted scores F1 = 0. Under that convention
F1 = 2TP / (2TP + FP + FN), which is what gets computed, in exact rationals,
so the macro average is correctly rounded.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .threads import StanceLabel

N = len(StanceLabel)


def argmax_low(rows: np.ndarray) -> np.ndarray:
    """Row argmax; ties resolve to the lowest class code."""
    return np.argmax(np.asarray(rows), axis=-1)


def confusion_matrix(gold, pred) -> np.ndarray:
    """4x4 counts, rows = gold, columns = predicted."""
    cm = np.zeros((N, N), dtype=np.int64)
    np.add.at(cm, (np.asarray(gold, dtype=np.int64), np.asarray(pred, dtype=np.int64)), 1)
    return cm


def _exact_f1(cm: np.ndarray) -> list[Fraction]:
    tp = np.diag(cm)
    denom = cm.sum(axis=0) + cm.sum(axis=1)  # 2TP + FP + FN
    return [Fraction(2 * int(t), int(d)) if d else Fraction(0) for t, d in zip(tp, denom)]


def f1_from_confusion(cm: np.ndarray) -> np.ndarray:
    return np.array([float(f) for f in _exact_f1(cm)])


def macro_f1_from_confusion(cm: np.ndarray) -> float:
    return float(sum(_exact_f1(cm)) / len(cm))


def macro_f1(gold, pred) -> float:
    return macro_f1_from_confusion(confusion_matrix(gold, pred))


@dataclass
class Metrics:
    accuracy: float
    macro_f1: float
    f1: dict
    confusion: np.ndarray

    @classmethod
    def compute(cls, gold, pred) -> "Metrics":
        gold = np.asarray(gold, dtype=np.int64)
        cm = confusion_matrix(gold, pred)
        f1 = f1_from_confusion(cm)
        acc = float(np.trace(cm) / cm.sum()) if cm.sum() else 0.0
        return cls(acc, macro_f1_from_confusion(cm), {lab.short: float(f1[lab]) for lab in StanceLabel}, cm)

    def to_dict(self) -> dict:
        """Field names follow the results table: accuracy, macro F1, F1_S .. F1_C."""
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "f1_S": self.f1["S"], "f1_Q": self.f1["Q"], "f1_D": self.f1["D"], "f1_C": self.f1["C"],
            "confusion": self.confusion.tolist(),
        }
