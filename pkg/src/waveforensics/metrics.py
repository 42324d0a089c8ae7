"""Binary-classification metrics: confusion counts, ROC/AUC, average precision.

All score-ranking metrics group exact score ties into single steps so that
AUC equals the Mann-Whitney pairwise-ordering statistic (half credit for
tied pairs) exactly, not just approximately.  To that end the heavy lifting
is done on integer cumulative counts; each metric performs one float
division at the very end.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class RocCurve:
    """Tie-grouped ROC curve.

    ``fpr``/``tpr`` run from (0, 0) to (1, 1).  ``thresholds`` holds the
    score that produced each step, with ``inf`` for the (0, 0) anchor.
    The integer cumulative counts behind the rates are kept (``tp_counts``,
    ``fp_counts``, ``n_pos``, ``n_neg``) so that AUC can be computed from
    integers rather than from already-divided floats.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    tp_counts: np.ndarray
    fp_counts: np.ndarray
    n_pos: int
    n_neg: int

    def points(self) -> Sequence[Tuple[float, float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))


def _validate_pair(labels, scores) -> Tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.ndim != 1 or scores.ndim != 1:
        raise DataError("labels and scores must be one-dimensional")
    if labels.shape[0] != scores.shape[0]:
        raise DataError(
            f"length mismatch: {labels.shape[0]} labels vs {scores.shape[0]} scores"
        )
    if labels.shape[0] == 0:
        raise DataError("cannot evaluate an empty set")
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise DataError("labels must be 0 or 1")
    if np.any(np.isnan(scores)):
        raise DataError("scores contain NaN")
    return labels.astype(np.int64), scores


def confusion(labels, scores, threshold: float = 0.5) -> ConfusionMatrix:
    """Confusion counts at a fixed threshold; score == threshold predicts 1."""
    labels, scores = _validate_pair(labels, scores)
    pred = scores >= threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise DataError("cannot evaluate an empty set")
    return (cm.tp + cm.tn) / cm.total


def f1(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise DataError("cannot evaluate an empty set")
    denom = 2 * cm.tp + cm.fp + cm.fn
    if denom == 0:
        return 0.0
    return 2 * cm.tp / denom


def _grouped_counts(labels: np.ndarray, scores: np.ndarray):
    """Cumulative (tp, fp) integer counts after each tie group, descending score.

    Returns (group_scores, cum_tp, cum_fp) where the k-th entry reflects all
    items with score >= group_scores[k].
    """
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # last index of each tie group
    boundary = np.nonzero(np.diff(s))[0]
    last = np.concatenate([boundary, [s.size - 1]])
    cum_tp = np.cumsum(y)[last]
    cum_fp = (last + 1) - cum_tp
    return s[last], cum_tp, cum_fp


def roc_curve(labels, scores) -> RocCurve:
    labels, scores = _validate_pair(labels, scores)
    n_pos = int(np.sum(labels))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs at least one positive and one negative label")
    group_scores, cum_tp, cum_fp = _grouped_counts(labels, scores)
    tp_counts = np.concatenate([[0], cum_tp])
    fp_counts = np.concatenate([[0], cum_fp])
    thresholds = np.concatenate([[np.inf], group_scores])
    return RocCurve(
        fpr=fp_counts / n_neg,
        tpr=tp_counts / n_pos,
        thresholds=thresholds,
        tp_counts=tp_counts,
        fp_counts=fp_counts,
        n_pos=n_pos,
        n_neg=n_neg,
    )


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the tie-grouped ROC curve.

    Accumulated as the integer numerator sum(dFP * (TP_prev + TP_cur)) and
    divided once by 2 * P * N, which makes it identical to counting ordered
    positive-negative pairs with half credit for ties.
    """
    tp = curve.tp_counts
    fp = curve.fp_counts
    numer = int(np.sum(np.diff(fp) * (tp[:-1] + tp[1:])))
    return numer / (2 * curve.n_pos * curve.n_neg)


def average_precision(labels, scores) -> float:
    """Step-wise AP over descending-score prefixes, ties grouped."""
    labels, scores = _validate_pair(labels, scores)
    n_pos = int(np.sum(labels))
    if n_pos == 0:
        raise DataError("average precision needs at least one positive label")
    _, cum_tp, cum_fp = _grouped_counts(labels, scores)
    total = 0.0
    prev_tp = 0
    for tp_k, fp_k in zip(cum_tp.tolist(), cum_fp.tolist()):
        if tp_k > prev_tp:
            recall_step = (tp_k - prev_tp) / n_pos
            precision_k = tp_k / (tp_k + fp_k)
            total += recall_step * precision_k
        prev_tp = tp_k
    return total


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    f1: float
    auc: float
    average_precision: float
    confusion: ConfusionMatrix
    roc: RocCurve
    n_items: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "auc": self.auc,
            "ap": self.average_precision,
            "tp": self.confusion.tp,
            "fp": self.confusion.fp,
            "tn": self.confusion.tn,
            "fn": self.confusion.fn,
            "n": self.n_items,
        }


def evaluate(labels, scores, threshold: float = 0.5) -> EvalReport:
    """All metrics from one (labels, scores) pair."""
    labels, scores = _validate_pair(labels, scores)
    cm = confusion(labels, scores, threshold)
    curve = roc_curve(labels, scores)
    return EvalReport(
        accuracy=accuracy(cm),
        f1=f1(cm),
        auc=auc(curve),
        average_precision=average_precision(labels, scores),
        confusion=cm,
        roc=curve,
        n_items=int(labels.size),
    )


def roc_to_csv(curve: RocCurve) -> str:
    lines = ["fpr,tpr"]
    for x, y in zip(curve.fpr.tolist(), curve.tpr.tolist()):
        lines.append(f"{x!r},{y!r}")
    return "\n".join(lines) + "\n"
