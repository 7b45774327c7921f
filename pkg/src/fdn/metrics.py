"""Evaluation metrics: MSE for regression, rank-based AUC for binary tasks,
and the percentage gap against a per-task oracle."""

from __future__ import annotations

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when a metric has no defined value on the given data."""


def mse(pred: np.ndarray, labels: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if pred.shape != labels.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} predictions, "
                         f"{labels.shape[0]} labels")
    if pred.size == 0:
        raise UndefinedMetricError("mse of empty arrays")
    return float(np.mean((pred - labels) ** 2))


def _tie_averaged_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, ties sharing the average rank of their block.

    Ranks are integers or half-integers, so sums are exact in float64 and
    the result matches pairwise comparison counting exactly.
    """
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability a positive outscores a negative, ties counted half.

    Computed in O(n log n) from tie-averaged ranks (the Mann-Whitney
    statistic); requires both classes present.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"length mismatch: {scores.shape[0]} scores, "
                         f"{labels.shape[0]} labels")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"auc needs both classes, got {n_pos} positives and {n_neg} negatives")
    ranks = _tie_averaged_ranks(scores)
    pos_rank_sum = float(ranks[labels == 1.0].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def gap_vs_oracle(model_metric: float, oracle_metric: float, kind: str) -> float:
    """Signed percentage gap, negative when the model is worse than the oracle.

    MSE improves downward so the gap is (oracle - model) / oracle * 100;
    AUC improves upward so it is (model - oracle) / oracle * 100.
    """
    if oracle_metric == 0.0:
        raise UndefinedMetricError("oracle metric is zero, gap undefined")
    if kind == "mse":
        return (oracle_metric - model_metric) / oracle_metric * 100.0
    if kind == "auc":
        return (model_metric - oracle_metric) / oracle_metric * 100.0
    raise ValueError(f"unknown metric kind {kind!r}, expected 'mse' or 'auc'")
