"""External clustering indices reported as percentages."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics.cluster import contingency_matrix

from .core import PlaneClusteringError


class LengthMismatchError(PlaneClusteringError, ValueError):
    pass


def _check(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise LengthMismatchError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    return pred, truth


def pair_counts(pred, truth) -> tuple[int, int, int]:
    """Unordered sample pairs split into (together in both, apart in both, disagreeing)."""
    pred, truth = _check(pred, truth)
    m = pred.size
    C = contingency_matrix(truth, pred).astype(np.int64)
    total = m * (m - 1) // 2
    both = int((C * (C - 1) // 2).sum())
    same_truth = int((C.sum(axis=1) * (C.sum(axis=1) - 1) // 2).sum())
    same_pred = int((C.sum(axis=0) * (C.sum(axis=0) - 1) // 2).sum())
    apart = total - same_truth - same_pred + both
    return both, apart, total - both - apart


def accuracy(pred, truth) -> float:
    """Pairwise agreement accuracy (Rand index) in percent.

    Examples
    --------
    >>> round(accuracy([1, 1, 2, 2], [1, 1, 1, 1]), 2)
    33.33
    """
    pred, truth = _check(pred, truth)
    if pred.size < 2:
        raise ValueError("accuracy needs at least two samples")
    together, apart, disagree = pair_counts(pred, truth)
    return 100.0 * (together + apart) / (together + apart + disagree)


def mutual_information(pred, truth) -> float:
    """Normalized mutual information ``I / sqrt(H_pred * H_truth)`` in percent."""
    pred, truth = _check(pred, truth)
    C = contingency_matrix(truth, pred).astype(float)
    m = C.sum()
    pt = C.sum(axis=1) / m
    pp = C.sum(axis=0) / m
    h_t = -np.sum(pt * np.log(pt))
    h_p = -np.sum(pp * np.log(pp))
    if h_t == 0.0 or h_p == 0.0:
        return 100.0 if h_t == h_p else 0.0
    nz = C > 0
    P = C[nz] / m
    info = np.sum(P * np.log(P / np.outer(pt, pp)[nz]))
    return float(np.clip(100.0 * info / np.sqrt(h_t * h_p), 0.0, 100.0))


def best_match_accuracy(pred, truth) -> float:
    """Percentage of samples labelled correctly under the best one-to-one label matching."""
    pred, truth = _check(pred, truth)
    C = contingency_matrix(truth, pred)
    rows, cols = linear_sum_assignment(-C)
    return 100.0 * C[rows, cols].sum() / pred.size


@dataclass(frozen=True)
class EvalReport:
    ac_percent: float
    mi_percent: float
    pair_counts: tuple[int, int, int]


def evaluate(pred, truth) -> EvalReport:
    return EvalReport(accuracy(pred, truth), mutual_information(pred, truth), pair_counts(pred, truth))
