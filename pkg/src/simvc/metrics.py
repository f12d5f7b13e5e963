"""Clustering accuracy, NMI, purity and pairwise F-score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # k_pred x k_true
    n: int


def _check(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise ValueError("empty label vectors")
    return pred, truth


def contingency(pred, truth) -> ContingencyTable:
    pred, truth = _check(pred, truth)
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    counts = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(counts, (p, t), 1)
    return ContingencyTable(counts, pred.size)


def hungarian(weight) -> np.ndarray:
    """Permutation ``perm`` maximising ``sum_i weight[i, perm[i]]``."""
    w = np.asarray(weight, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("hungarian expects a square matrix")
    rows, cols = linear_sum_assignment(w, maximize=True)
    perm = np.empty(w.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def accuracy(pred, truth) -> float:
    """Best one-to-one matching of predicted clusters onto classes."""
    c = contingency(pred, truth)
    k = max(c.counts.shape)
    w = np.zeros((k, k))
    w[:c.counts.shape[0], :c.counts.shape[1]] = c.counts
    perm = hungarian(w)
    return float(w[np.arange(k), perm].sum() / c.n)


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information normalised by the geometric mean of the entropies."""
    c = contingency(pred, truth)
    n = c.n
    h_pred = _entropy(c.counts.sum(1), n)
    h_true = _entropy(c.counts.sum(0), n)
    if h_pred == 0 or h_true == 0:
        # at least one partition is a single block
        return 1.0 if h_pred == h_true else 0.0
    joint = c.counts / n
    outer = np.outer(c.counts.sum(1), c.counts.sum(0)) / n ** 2
    nz = joint > 0
    mi = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
    return float(min(1.0, max(0.0, mi / np.sqrt(h_pred * h_true))))


def purity(pred, truth) -> float:
    c = contingency(pred, truth)
    return float(c.counts.max(axis=1).sum() / c.n)


def _pairs(x):
    x = np.asarray(x, dtype=np.int64)
    return int((x * (x - 1) // 2).sum())


def fscore(pred, truth) -> float:
    """Pairwise F1: precision/recall of 'same cluster' decisions over sample pairs."""
    c = contingency(pred, truth)
    both = _pairs(c.counts)
    same_pred = _pairs(c.counts.sum(1))
    same_true = _pairs(c.counts.sum(0))
    if both == 0:
        return 0.0
    precision = both / same_pred
    recall = both / same_true
    return float(2 * precision * recall / (precision + recall))


def evaluate(pred, truth) -> dict:
    return {
        "acc": accuracy(pred, truth),
        "nmi": nmi(pred, truth),
        "purity": purity(pred, truth),
        "fscore": fscore(pred, truth),
    }
