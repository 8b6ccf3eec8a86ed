"""Confusion matrix, accuracy/precision/recall/F1, ROC curve and AUC.

Positive class = "fractured" (class index 0) throughout; predicted label is
the argmax probability with ties breaking to class 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricSummary:
    accuracy: float
    precision: float | None  # None = undefined (zero denominator)
    recall: float | None
    f1: float | None

    def as_dict(self):
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def write_csv(self, path: str):
        with open(path, "w") as f:
            f.write("fpr,tpr,threshold\n")
            for x, y, t in zip(self.fpr, self.tpr, self.thresholds):
                f.write(f"{x:.10g},{y:.10g},{t:.10g}\n")


def confusion(labels, predictions) -> ConfusionMatrix:
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.shape != predictions.shape:
        raise InvalidArgumentError("labels and predictions must have equal length")
    pos_l, pos_p = labels == 0, predictions == 0
    return ConfusionMatrix(
        tp=int(np.sum(pos_l & pos_p)),
        tn=int(np.sum(~pos_l & ~pos_p)),
        fp=int(np.sum(~pos_l & pos_p)),
        fn=int(np.sum(pos_l & ~pos_p)),
    )


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else float(Fraction(num, den))


def summary(m: ConfusionMatrix) -> MetricSummary:
    """Standard formulas via exact rational arithmetic before the final float."""
    if m.total == 0:
        raise InvalidArgumentError("empty confusion matrix")
    precision = _ratio(m.tp, m.tp + m.fp)
    recall = _ratio(m.tp, m.tp + m.fn)
    if precision in (None, 0.0) and recall in (None, 0.0):
        f1 = None
    elif precision is None or recall is None:
        f1 = None
    else:
        p, r = Fraction(m.tp, m.tp + m.fp), Fraction(m.tp, m.tp + m.fn)
        f1 = float(2 * p * r / (p + r)) if p + r > 0 else None
    return MetricSummary(
        accuracy=float(Fraction(m.tp + m.tn, m.total)),
        precision=precision, recall=recall, f1=f1,
    )


def roc_auc(labels, positive_scores) -> RocCurve:
    """ROC over a descending-score threshold sweep; AUC by trapezoid rule
    (ties contribute half concordance). Positive = label 0."""
    labels = np.asarray(labels)
    scores = np.asarray(positive_scores, dtype=np.float64)
    pos = labels == 0
    p, n = int(pos.sum()), int((~pos).sum())
    if p == 0 or n == 0:
        raise InvalidArgumentError("ROC needs both classes present")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = pos[order]

    # cumulative counts at each distinct-score block boundary
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    block_ends = np.append(distinct, len(scores) - 1)
    tp_cum = np.cumsum(sorted_pos)[block_ends]
    fp_cum = np.cumsum(~sorted_pos)[block_ends]

    fpr = np.concatenate([[0.0], fp_cum / n])
    tpr = np.concatenate([[0.0], tp_cum / p])
    thresholds = np.concatenate([[np.inf], sorted_scores[block_ends]])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


def report_json(m: ConfusionMatrix, s: MetricSummary, auc: float | None = None) -> str:
    payload = {"confusion": {"tp": m.tp, "tn": m.tn, "fp": m.fp, "fn": m.fn},
               **s.as_dict()}
    if auc is not None:
        payload["auc"] = auc
    return json.dumps(payload, indent=2)


def report_table(m: ConfusionMatrix, s: MetricSummary, auc: float | None = None) -> str:
    def fmt(v):
        return "undefined" if v is None else f"{v:.5f}"

    lines = [
        f"confusion  tp={m.tp} tn={m.tn} fp={m.fp} fn={m.fn}",
        f"accuracy   {fmt(s.accuracy)}",
        f"precision  {fmt(s.precision)}",
        f"recall     {fmt(s.recall)}",
        f"f1         {fmt(s.f1)}",
    ]
    if auc is not None:
        lines.append(f"auc        {auc:.5f}")
    return "\n".join(lines)
