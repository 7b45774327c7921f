"""Slow reference implementations used to cross-check the fast paths."""
import numpy as np


def pairwise_auc(scores, labels) -> float:
    """O(n^2) probability that a positive outranks a negative, ties at 1/2.

    Built from exactly representable fractions (0, 0.5, 1 sums) so equality
    with the rank-based form can be required bit for bit.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def pairwise_auc_outer(scores, labels) -> float:
    """Same pairwise comparison via an explicit n_pos x n_neg table."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = int((pos[:, None] > neg[None, :]).sum())
    ties = int((pos[:, None] == neg[None, :]).sum())
    return (wins + 0.5 * ties) / (len(pos) * len(neg))
