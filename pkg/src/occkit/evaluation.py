"""Confusion counts, rates, Wald confidence intervals and rank-based AUC.

The target class is the positive class throughout.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .exceptions import LengthMismatch, SingleClassError

Z95 = 1.96
Z98 = 2.33

# fixed serialization order
REPORT_FIELDS = (
    "n", "tp", "tn", "fp", "fn",
    "accuracy", "precision", "sensitivity", "specificity",
    "ci95", "ci98", "ci95_pct", "ci98_pct", "ci_n", "auc",
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _as_bool_labels(y, name):
    y = np.asarray(y)
    if y.ndim != 1:
        y = y.ravel()
    if y.dtype == bool:
        return y
    if y.dtype.kind in "iuf":
        # sklearn outlier convention (+1 / -1) and 0/1 both map 1 -> target
        return y > 0
    return np.array([str(v).lower() in ("1", "target", "true", "+1") for v in y])


def confusion(labels_true, labels_pred) -> ConfusionCounts:
    """Count outcomes; labels may be boolean, +1/-1, 0/1 or 'target'/'outlier'."""
    t = _as_bool_labels(labels_true, "labels_true")
    p = _as_bool_labels(labels_pred, "labels_pred")
    if t.shape != p.shape:
        raise LengthMismatch(f"{t.size} true labels but {p.size} predictions")
    if t.size == 0:
        raise LengthMismatch("confusion() needs at least one sample")
    return ConfusionCounts(
        tp=int(np.sum(t & p)),
        tn=int(np.sum(~t & ~p)),
        fp=int(np.sum(~t & p)),
        fn=int(np.sum(t & ~p)),
    )


def wald_interval(accuracy: float, n: int, z: float = Z95) -> float:
    """Half-width ``z * sqrt(acc (1 - acc) / n)``."""
    if n <= 0:
        raise ValueError("n must be positive")
    return z * math.sqrt(max(accuracy * (1.0 - accuracy), 0.0) / n)


def _ratio(num, den) -> Optional[float]:
    return num / den if den > 0 else None


@dataclass(frozen=True)
class MetricsReport:
    """Rates are ``None`` when their denominator is zero."""

    n: int
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: Optional[float]
    precision: Optional[float]
    sensitivity: Optional[float]
    specificity: Optional[float]
    ci95: Optional[float]
    ci98: Optional[float]
    ci_n: int
    auc: Optional[float] = None

    @property
    def ci95_pct(self):
        return None if self.ci95 is None else 100.0 * self.ci95

    @property
    def ci98_pct(self):
        return None if self.ci98 is None else 100.0 * self.ci98

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_row(self) -> list:
        return ["" if v is None else v for v in self.to_dict().values()]

    def to_csv(self, header=True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(REPORT_FIELDS)
        w.writerow(self.csv_row())
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        fields = {k: d.get(k) for k in REPORT_FIELDS if k not in ("ci95_pct", "ci98_pct")}
        return cls(**fields)


def metrics(c: ConfusionCounts, n_for_ci: Optional[int] = None, auc: Optional[float] = None) -> MetricsReport:
    """Rates from counts plus 95% and 98% Wald intervals on the accuracy.

    Parameters
    ----------
    c : ConfusionCounts
    n_for_ci : int, optional
        Sample size inside the interval; defaults to ``c.total``.
    auc : float, optional
        Carried through to the report.
    """
    n = c.total
    ci_n = int(n if n_for_ci is None else n_for_ci)
    acc = _ratio(c.tp + c.tn, n)
    ci95 = ci98 = None
    if acc is not None and ci_n > 0:
        ci95 = wald_interval(acc, ci_n, Z95)
        ci98 = wald_interval(acc, ci_n, Z98)
    return MetricsReport(
        n=n, tp=c.tp, tn=c.tn, fp=c.fp, fn=c.fn,
        accuracy=acc,
        precision=_ratio(c.tp, c.tp + c.fp),
        sensitivity=_ratio(c.tp, c.tp + c.fn),
        specificity=_ratio(c.tn, c.tn + c.fp),
        ci95=ci95,
        ci98=ci98,
        ci_n=ci_n,
        auc=auc,
    )


def roc_auc(labels_true, scores) -> float:
    """Probability that a random target outscores a random outlier.

    Mann-Whitney U from midranks, so ties count one half.
    """
    t = _as_bool_labels(labels_true, "labels_true")
    s = np.asarray(scores, dtype=np.float64).ravel()
    if t.shape != s.shape:
        raise LengthMismatch(f"{t.size} labels but {s.size} scores")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("roc_auc needs both target and outlier samples")
    ranks = rankdata(s)
    u = ranks[t].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(labels_true, scores, n_for_ci=None) -> MetricsReport:
    """Report for scores thresholded at 0 (ties are targets)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = _as_bool_labels(labels_true, "labels_true")
    c = confusion(t, s >= 0)
    try:
        auc = roc_auc(t, s)
    except SingleClassError:
        auc = None
    return metrics(c, n_for_ci, auc)
