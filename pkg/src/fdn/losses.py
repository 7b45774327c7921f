"""Objective components: per-task fit, orthogonality penalty, auxiliary heads.

The total objective is w_task * L_task + w_orth * L_orth + w_aux * L_aux
with all weights defaulting to 1. Binary tasks use the fused stable
cross-entropy on logits; regression tasks use mean squared error. The
orthogonality penalty couples each decomposition pair's shared and specific
feature matrices through the squared Frobenius norm of their cross-gram,
divided by batch-size squared so its magnitude does not grow with the batch
("gram" mode; "per_sample" instead averages squared per-row dot products).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .matrix import Matrix, ShapeError

ORTH_MODES = ("gram", "per_sample")


@dataclass(frozen=True)
class LossWeights:
    w_task: float = 1.0
    w_orth: float = 1.0
    w_aux: float = 1.0

    def __post_init__(self):
        if min(self.w_task, self.w_orth, self.w_aux) < 0:
            raise ValueError("loss weights must be non-negative")


def zero_scalar() -> Node:
    return ad.constant(Matrix.zeros(1, 1))


def _label_column(labels: np.ndarray, n: int, kind: str) -> Matrix:
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if y.shape[0] != n:
        raise ShapeError(f"labels have length {y.shape[0]}, predictions {n}")
    if kind == "binary" and not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("binary task labels must be 0 or 1")
    return Matrix.wrap(y)


def _one_task_loss(logit: Node, labels: np.ndarray, kind: str) -> Node:
    y = _label_column(labels, logit.value.rows, kind)
    if kind == "binary":
        return ad.sigmoid_bce_mean(logit, y)
    diff = ad.sub(logit, ad.constant(y))
    return ad.mean_all(ad.mul(diff, diff))


def task_loss(logits: Sequence[Node], labels: Sequence[np.ndarray],
              task_kinds: Sequence[str]) -> Node:
    """Sum over tasks of the mean per-sample loss (BCE or MSE by kind).

    Binary tasks consume pre-sigmoid logits so the loss and its gradient
    stay finite for any magnitude.
    """
    if not (len(logits) == len(labels) == len(task_kinds)):
        raise ShapeError("logits, labels and task_kinds must have equal lengths")
    total = None
    for z, y, kind in zip(logits, labels, task_kinds):
        term = _one_task_loss(z, y, kind)
        total = term if total is None else ad.add(total, term)
    return zero_scalar() if total is None else total


def orth_loss(shared_feats: Sequence[Sequence[Node]],
              specific_feats: Sequence[Sequence[Node]],
              mode: str = "gram") -> Node:
    """Penalty coupling every (shared, specific) feature pair of every task."""
    if mode not in ORTH_MODES:
        raise ValueError(f"unknown orth mode {mode!r}")
    total = None
    for shared_row, specific_row in zip(shared_feats, specific_feats, strict=True):
        for s, p in zip(shared_row, specific_row, strict=True):
            if s.value.shape != p.value.shape:
                raise ShapeError(f"paired features differ in shape: "
                                 f"{s.value.shape} vs {p.value.shape}")
            b = s.value.rows
            if mode == "gram":
                gram = ad.matmul(ad.transpose(s), p)
                term = ad.scale(ad.sum_all(ad.mul(gram, gram)), 1.0 / (b * b))
            else:
                dots = ad.sum_rows(ad.mul(s, p))
                term = ad.mean_all(ad.mul(dots, dots))
            total = term if total is None else ad.add(total, term)
    return zero_scalar() if total is None else total


def aux_loss(aux_logits: Sequence[Sequence[Node]], labels: Sequence[np.ndarray],
             task_kinds: Sequence[str]) -> Node:
    """Sum over tasks and pairs of the auxiliary-head loss against the
    task's own labels, same form as the main task loss.

    Models without auxiliary heads pass an empty grid and get exactly 0.
    """
    if not aux_logits:
        return zero_scalar()
    total = None
    for row, y, kind in zip(aux_logits, labels, task_kinds, strict=True):
        for z in row:
            term = _one_task_loss(z, y, kind)
            total = term if total is None else ad.add(total, term)
    return zero_scalar() if total is None else total


def total_loss(l_task: Node, l_orth: Node, l_aux: Node,
               weights: LossWeights = LossWeights()) -> Node:
    for part in (l_task, l_orth, l_aux):
        if part.value.shape != (1, 1):
            raise ShapeError(f"loss parts must be scalar, got {part.value.shape}")
    return ad.add(ad.scale(l_task, weights.w_task),
                  ad.add(ad.scale(l_orth, weights.w_orth),
                         ad.scale(l_aux, weights.w_aux)))
