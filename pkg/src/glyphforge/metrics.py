"""Binary-classification metrics and stratified fold assignment.

Label 1 (manipulated) is the positive class. Zero denominators yield
0.0 so that degenerate folds stay comparable instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import derive_rng


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    accuracy: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def confusion(self) -> tuple[int, int, int, int]:
        return (self.tp, self.fp, self.tn, self.fn)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }


def evaluate(y_true, y_pred) -> Metrics:
    """Confusion counts and the four headline metrics."""
    yt = np.asarray(y_true).astype(np.int64)
    yp = np.asarray(y_pred).astype(np.int64)
    if yt.shape != yp.shape:
        raise ValueError(f"length mismatch: {yt.shape} vs {yp.shape}")
    if yt.size == 0:
        raise ValueError("cannot evaluate empty label arrays")
    tp = int(np.sum((yt == 1) & (yp == 1)))
    fp = int(np.sum((yt == 0) & (yp == 1)))
    tn = int(np.sum((yt == 0) & (yp == 0)))
    fn = int(np.sum((yt == 1) & (yp == 0)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    accuracy = (tp + tn) / yt.size
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(precision, recall, accuracy, f1, tp, fp, tn, fn)


def stratified_folds(y, k: int, seed: int) -> np.ndarray:
    """Fold id (0..k-1) per row; each class is dealt round-robin after a shuffle.

    Every fold's positive count is within one sample of an even share.
    """
    y = np.asarray(y).astype(np.int64)
    if k < 2:
        raise ValueError("need at least 2 folds")
    rng = derive_rng(seed, 0xF01D)
    folds = np.empty(y.size, dtype=np.int32)
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        idx = idx[rng.permutation(idx.size)]
        for j, row in enumerate(idx):
            folds[row] = j % k
    return folds


def mean_std(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
