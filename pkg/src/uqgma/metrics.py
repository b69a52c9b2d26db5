"""Classification and uncertainty metrics over per-clip prediction records.

All percentages are 0-100. Metrics that are undefined on the given records
(e.g. sensitivity with no positives) come back as NaN, never as 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

UNCERTAINTY_KINDS = ("epistemic", "aleatoric", "total")
DEFAULT_GRID_POINTS = 101


@dataclass
class UncertaintyEstimate:
    mu: float
    u_e: float
    u_a: float
    sigma2: float
    sampled_probs: np.ndarray | None = None

    def validate(self) -> None:
        if not -1e-12 <= self.u_e <= 0.25 + 1e-12:
            raise ValueError(f"u_e={self.u_e} outside [0, 0.25]")
        if not self.u_a > 0:
            raise ValueError(f"u_a={self.u_a} must be positive")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2={self.sigma2} must be positive")

    def value(self, which: str) -> float:
        if which == "epistemic":
            return self.u_e
        if which == "aleatoric":
            return self.u_a
        if which == "total":
            return self.sigma2
        raise ValueError(f"unknown uncertainty kind {which!r}")


@dataclass
class PredictionRecord:
    clip_id: str
    y_true: int
    p_f: float
    estimate: UncertaintyEstimate

    @property
    def hard_label(self) -> int:
        return int(self.p_f >= 0.5)

    @property
    def correct(self) -> bool:
        return self.hard_label == self.y_true


def confusion_metrics(records: list[PredictionRecord]) -> tuple[float, float, float]:
    """(ACC, SN, SP) percentages; SN/SP are NaN when their class is absent."""
    if not records:
        raise ValueError("no records")
    y = np.array([r.y_true for r in records])
    pred = np.array([r.hard_label for r in records])
    tp = int(((y == 1) & (pred == 1)).sum())
    fn = int(((y == 1) & (pred == 0)).sum())
    tn = int(((y == 0) & (pred == 0)).sum())
    fp = int(((y == 0) & (pred == 1)).sum())
    acc = 100.0 * (tp + tn) / len(records)
    sn = 100.0 * tp / (tp + fn) if tp + fn > 0 else float("nan")
    sp = 100.0 * tn / (tn + fp) if tn + fp > 0 else float("nan")
    return acc, sn, sp


def auc_roc(records: list[PredictionRecord]) -> float:
    """Rank-based AUC-ROC (ties get half credit), as a percentage."""
    y = np.array([r.y_true for r in records])
    scores = np.array([r.p_f for r in records])
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc_roc needs at least one record of each class")
    ranks = rankdata(scores)  # average ranks handle ties
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return 100.0 * float(u) / (n_pos * n_neg)


def normalize_uncertainty(values: np.ndarray | list[float]) -> np.ndarray:
    """Min-max normalization to [0, 1]; constant input maps to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values to normalize")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def _normalized(records: list[PredictionRecord], which: str) -> np.ndarray:
    return normalize_uncertainty([r.estimate.value(which) for r in records])


def uncertainty_accuracy(
    records: list[PredictionRecord], u_t: float, which: str = "epistemic"
) -> float:
    """Share of records that are correct-certain or incorrect-uncertain, in percent.

    A record counts as uncertain when its normalized uncertainty is >= u_t.
    """
    if not records:
        raise ValueError("no records")
    u_norm = _normalized(records, which)
    correct = np.array([r.correct for r in records])
    uncertain = u_norm >= u_t
    desired = (correct & ~uncertain) | (~correct & uncertain)
    return 100.0 * float(desired.sum()) / len(records)


def threshold_grid(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def auc_ua(
    records: list[PredictionRecord], which: str = "epistemic", grid_points: int = DEFAULT_GRID_POINTS
) -> float:
    """Trapezoidal area under UA(threshold) over [0, 1], in percent."""
    grid = threshold_grid(grid_points)
    ua = np.array([uncertainty_accuracy(records, t, which) for t in grid])
    return float(np.trapezoid(ua, grid))


@dataclass
class SweepRow:
    u_t: float
    retained_positive: float
    retained_negative: float
    acc: float
    sn: float
    sp: float


def sweep_threshold(
    records: list[PredictionRecord], grid_points: int = DEFAULT_GRID_POINTS
) -> list[SweepRow]:
    """Metrics over the subset whose normalized epistemic uncertainty is <= threshold.

    Retention fractions are per class, relative to the full record set.
    """
    if not records:
        raise ValueError("no records")
    u_norm = _normalized(records, "epistemic")
    y = np.array([r.y_true for r in records])
    n_pos = max(int((y == 1).sum()), 1)
    n_neg = max(int((y == 0).sum()), 1)
    rows: list[SweepRow] = []
    for u_t in threshold_grid(grid_points):
        keep = u_norm <= u_t
        kept = [r for r, k in zip(records, keep) if k]
        r_pos = float(((y == 1) & keep).sum()) / n_pos
        r_neg = float(((y == 0) & keep).sum()) / n_neg
        if kept:
            acc, sn, sp = confusion_metrics(kept)
        else:
            acc = sn = sp = float("nan")
        rows.append(SweepRow(float(u_t), r_pos, r_neg, acc, sn, sp))
    return rows


@dataclass
class MetricReport:
    acc: float
    sn: float
    sp: float
    auc_roc: float
    auc_ua: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "sn": self.sn,
            "sp": self.sp,
            "auc_roc": self.auc_roc,
            "auc_ua": dict(self.auc_ua),
        }


def full_report(records: list[PredictionRecord]) -> MetricReport:
    acc, sn, sp = confusion_metrics(records)
    return MetricReport(
        acc=acc,
        sn=sn,
        sp=sp,
        auc_roc=auc_roc(records),
        auc_ua={kind: auc_ua(records, kind) for kind in UNCERTAINTY_KINDS},
    )
