"""Evaluation metrics: accuracy, r2, and mean absolute error."""

from __future__ import annotations

import numpy as np

from .errors import DataError

__all__ = ["metric_accuracy", "metric_r2", "metric_mae"]


def _check(pred: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if pred.shape != y.shape:
        raise DataError("pred and y must have equal length")
    if pred.size == 0:
        raise DataError("empty vectors")
    return pred, y


def metric_accuracy(pred: np.ndarray, y: np.ndarray) -> float:
    pred, y = _check(pred, y)
    return float((pred == y).mean())


def metric_r2(pred: np.ndarray, y: np.ndarray) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot.

    The mean predictor scores exactly 0, a perfect predictor exactly 1.
    """
    pred, y = _check(pred, y)
    if y.size < 2:
        raise DataError("r2 needs at least 2 points")
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise DataError("r2 undefined for constant targets")
    ss_res = float(((y - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def metric_mae(pred: np.ndarray, y: np.ndarray) -> float:
    pred, y = _check(pred, y)
    return float(np.abs(pred - y).mean())
