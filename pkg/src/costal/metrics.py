"""Binary classification metrics and the exact McNemar test."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import binom

from . import kernels


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalResult:
    acc: float
    auc: float
    ap: float
    se: float
    sp: float
    threshold: float
    n_pos: int
    n_neg: int

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise MetricError("scores and labels differ in length")
    if s.size == 0:
        raise MetricError("no samples")
    if not np.all((y == 0) | (y == 1)):
        raise MetricError("labels must be binary")
    return s, y.astype(np.int64)


def confusion_at(scores, labels, threshold: float = 0.5) -> Confusion:
    s, y = _pair(scores, labels)
    pred = s >= threshold
    pos = y == 1
    return Confusion(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def accuracy(cm: Confusion) -> float:
    if cm.n == 0:
        raise MetricError("undefined metric")
    return (cm.tp + cm.tn) / cm.n


def sensitivity(cm: Confusion) -> float:
    if cm.tp + cm.fn == 0:
        raise MetricError("undefined metric")
    return cm.tp / (cm.tp + cm.fn)


def specificity(cm: Confusion) -> float:
    if cm.tn + cm.fp == 0:
        raise MetricError("undefined metric")
    return cm.tn / (cm.tn + cm.fp)


def auc_roc(scores, labels) -> float:
    """Mann-Whitney estimate of ROC AUC; ties between classes count one half."""
    s, y = _pair(scores, labels)
    pos = np.ascontiguousarray(s[y == 1])
    neg = np.ascontiguousarray(s[y == 0])
    if pos.size == 0 or neg.size == 0:
        raise MetricError("AUC needs both classes")
    return kernels.pair_count(pos, neg) / (pos.size * neg.size)


def average_precision(scores, labels) -> float:
    """Step-wise AP over the score-descending ranking; equal scores keep input order."""
    s, y = _pair(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise MetricError("AP needs at least one positive")
    order = np.argsort(-s, kind="stable")
    hits = y[order]
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(np.sum(precision[hits == 1]) / n_pos)


def evaluate(scores, labels, threshold: float = 0.5) -> EvalResult:
    """ACC/AUC/AP/SE/SP for one split; undefined metrics come back as NaN."""
    s, y = _pair(scores, labels)
    cm = confusion_at(s, y, threshold)

    def guarded(fn, *args):
        try:
            return float(fn(*args))
        except MetricError:
            return float("nan")

    return EvalResult(
        acc=accuracy(cm),
        auc=guarded(auc_roc, s, y),
        ap=guarded(average_precision, s, y),
        se=guarded(sensitivity, cm),
        sp=guarded(specificity, cm),
        threshold=threshold,
        n_pos=int(y.sum()),
        n_neg=int((1 - y).sum()),
    )


def mcnemar_p(correct_a, correct_b) -> float:
    """Two-sided exact McNemar p-value on paired per-sample correctness."""
    a = np.asarray(correct_a, dtype=bool).ravel()
    b = np.asarray(correct_b, dtype=bool).ravel()
    if a.shape != b.shape:
        raise MetricError("correctness vectors differ in length")
    only_a = int(np.sum(a & ~b))
    only_b = int(np.sum(~a & b))
    n = only_a + only_b
    if n == 0:
        return 1.0
    k = min(only_a, only_b)
    return float(min(1.0, 2.0 * binom.cdf(k, n, 0.5)))
