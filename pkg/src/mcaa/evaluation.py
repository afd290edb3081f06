"""Scoring uncertainty estimates against prediction correctness.

Each test point is correct or incorrect (prediction vs. label) and certain
or uncertain (normalized score vs. a threshold). That gives a second binary
problem whose positive class is "incorrect":

=========  =========  ===========
state      correct    uncertain
=========  =========  ===========
TN         yes        no
FP         yes        yes
FN         no         no
TP         no         yes
=========  =========  ===========
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, DomainError, UndefinedMetricError

DEFAULT_THRESHOLDS = 101

CONVENTIONS = {
    "uncertain_if": "u_norm > t (strict)",
    "normalization": "(u - u_min) / (u_max - u_min); all zeros when u_max == u_min",
    "npv_when_no_certain": 1.0,
    "tpr_when_no_incorrect": 1.0,
    "roc_positive_class": "incorrect prediction",
    "roc_ties": "equal scores form one threshold step",
    "aupr": "sum over thresholds of (recall step) * precision",
    "log_base": "e",
}


@dataclass(frozen=True, eq=False)
class UncertaintyRecords:
    """Predicted labels, true labels and raw uncertainty scores of a test set."""

    predicted: np.ndarray
    actual: np.ndarray
    u_raw: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a).reshape(-1) for a in (self.predicted, self.actual, self.u_raw)]
        if len({a.shape for a in arrs}) != 1:
            raise DimensionError("predicted, actual and u_raw must have equal lengths")
        pred, act = arrs[0].astype(np.int64), arrs[1].astype(np.int64)
        u = arrs[2].astype(np.float64)
        if not (np.isin(pred, (0, 1)).all() and np.isin(act, (0, 1)).all()):
            raise DomainError("labels must be 0 or 1")
        if not np.isfinite(u).all():
            raise DomainError("uncertainty scores must be finite")
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "actual", act)
        object.__setattr__(self, "u_raw", u)

    def __len__(self) -> int:
        return self.u_raw.shape[0]

    @property
    def incorrect(self) -> np.ndarray:
        return self.predicted != self.actual

    @property
    def u_norm(self) -> np.ndarray:
        return normalize_uncertainty(self.u_raw)


def normalize_uncertainty(u) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant input maps to all zeros."""
    u = np.asarray(u, dtype=np.float64)
    if u.size == 0:
        raise DomainError("cannot normalize an empty set of scores")
    lo, hi = u.min(), u.max()
    if hi == lo:
        return np.zeros_like(u)
    return (u - lo) / (hi - lo)


class ConfusionCounts(NamedTuple):
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp


def confusion_at(records: UncertaintyRecords, t: float, u_norm=None) -> ConfusionCounts:
    if u_norm is None:
        u_norm = records.u_norm
    uncertain = u_norm > t
    wrong = records.incorrect
    return ConfusionCounts(
        tn=int(np.sum(~wrong & ~uncertain)),
        fp=int(np.sum(~wrong & uncertain)),
        fn=int(np.sum(wrong & ~uncertain)),
        tp=int(np.sum(wrong & uncertain)),
    )


def metric_accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise DomainError("accuracy of an empty confusion table")
    return (c.tn + c.tp) / c.total


def metric_npv(c: ConfusionCounts) -> float:
    """p(correct | certain); 1.0 when nothing is certain."""
    d = c.tn + c.fn
    return c.tn / d if d else 1.0


def metric_tpr(c: ConfusionCounts) -> float:
    """p(uncertain | incorrect); 1.0 when nothing is incorrect."""
    d = c.tp + c.fn
    return c.tp / d if d else 1.0


@dataclass
class CurveTable:
    t_u: np.ndarray
    accuracy: np.ndarray
    npv: np.ndarray
    tpr: np.ndarray
    roc: np.ndarray | None = None  # (k, 2) columns fpr, tpr
    pr: np.ndarray | None = None  # (k, 2) columns recall, precision
    auroc: float | None = None
    aupr: float | None = None
    errors: list[str] = field(default_factory=list)


def uncertainty_curves(records: UncertaintyRecords,
                       n_thresholds: int = DEFAULT_THRESHOLDS) -> CurveTable:
    """Accuracy, NPV and TPR on an even threshold grid over [0, 1]."""
    if n_thresholds < 2:
        raise DomainError(f"n_thresholds must be >= 2, got {n_thresholds}")
    if len(records) == 0:
        raise DomainError("no records")
    t_u = np.linspace(0.0, 1.0, n_thresholds)
    u = records.u_norm
    counts = [confusion_at(records, t, u) for t in t_u]
    return CurveTable(
        t_u,
        np.array([metric_accuracy(c) for c in counts]),
        np.array([metric_npv(c) for c in counts]),
        np.array([metric_tpr(c) for c in counts]),
    )


def _threshold_sweep(records: UncertaintyRecords) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (tp, fp) counts after admitting each distinct score, highest first."""
    order = np.argsort(-records.u_raw, kind="stable")
    scores = records.u_raw[order]
    pos = records.incorrect[order]
    last_of_group = np.r_[scores[1:] != scores[:-1], True]
    tp = np.cumsum(pos)[last_of_group]
    fp = np.cumsum(~pos)[last_of_group]
    return tp, fp


def roc_auc(records: UncertaintyRecords) -> tuple[np.ndarray, float]:
    """ROC points ``(fpr, tpr)`` and trapezoidal AUROC for detecting errors by score."""
    n_pos = int(records.incorrect.sum())
    n_neg = len(records) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUROC needs both correct and incorrect predictions (have {n_neg} / {n_pos})"
        )
    tp, fp = _threshold_sweep(records)
    tp = np.r_[0, tp]
    fp = np.r_[0, fp]
    # integer trapezoid sum, doubled, so the result is one exact division
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    auroc = twice_area / (2 * n_pos * n_neg)
    points = np.column_stack([fp / n_neg, tp / n_pos])
    return points, auroc


def pr_curve(records: UncertaintyRecords) -> tuple[np.ndarray, float]:
    """Precision-recall points ``(recall, precision)`` per distinct threshold
    and the step-wise area ``sum (R_k - R_{k-1}) * P_k``."""
    n_pos = int(records.incorrect.sum())
    if n_pos == 0:
        raise UndefinedMetricError("precision-recall needs at least one incorrect prediction")
    tp, fp = _threshold_sweep(records)
    precision = tp / (tp + fp)
    recall = tp / n_pos
    aupr = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return np.column_stack([recall, precision]), aupr


def evaluate(records: UncertaintyRecords, n_thresholds: int = DEFAULT_THRESHOLDS) -> CurveTable:
    """Threshold curves plus ROC/PR. Undefined ROC/PR leave ``None`` and an
    entry in ``errors`` rather than raising."""
    table = uncertainty_curves(records, n_thresholds)
    for name, fn in (("roc", roc_auc), ("pr", pr_curve)):
        try:
            points, area = fn(records)
        except UndefinedMetricError as exc:
            table.errors.append(f"{name}: {exc}")
            continue
        setattr(table, name, points)
        setattr(table, "auroc" if name == "roc" else "aupr", area)
    return table
