"""Benchmark metrics: AUC, F1/precision/recall, calibration, downsampling.

roc_auc uses tie-grouped trapezoid integration, which equals the pairwise
concordance statistic exactly (ties count half). auc_pairwise_oracle is the
O(P*N) brute-force reference kept for cross-checking.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError, ValidationError
from .rng import substream
from .schema import LabeledMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True, slots=True)
class MetricsRow:
    """One (model, strategy, test-set) cell of the report tables."""

    auc: float | None
    f1: float
    precision: float
    recall: float


@dataclass(frozen=True, slots=True)
class CalibrationBin:
    lo: float
    hi: float
    mean_pred: float  # NaN when the bin is empty
    obs_frac: float  # NaN when the bin is empty
    count: int


@dataclass(frozen=True, slots=True)
class CalibrationCurve:
    bins: tuple[CalibrationBin, ...]
    ece: float
    n: int


def _check_pair(probs: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise ValidationError(
            f"probs and labels must have equal length, got {probs.shape} vs {labels.shape}"
        )
    if probs.size == 0:
        raise ValidationError("empty input")
    return probs, labels


def confusion_at_threshold(
    probs: np.ndarray, labels: np.ndarray, threshold: float = 0.5
) -> ConfusionCounts:
    """Tally the confusion matrix; predict positive iff prob >= threshold."""
    probs, labels = _check_pair(probs, labels)
    pred = probs >= threshold
    pos = labels == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def precision_recall_f1(c: ConfusionCounts) -> MetricsRow:
    """Precision/recall/F1 from counts (AUC unset). Degenerate denominators give 0."""
    if c.tp + c.fp > 0:
        precision = c.tp / (c.tp + c.fp)
    else:
        logger.warning("precision undefined (no positive predictions); reporting 0")
        precision = 0.0
    if c.tp + c.fn > 0:
        recall = c.tp / (c.tp + c.fn)
    else:
        logger.warning("recall undefined (no positive labels); reporting 0")
        recall = 0.0
    denom = precision + recall
    f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
    return MetricsRow(auc=None, f1=f1, precision=precision, recall=recall)


def roc_auc(probs: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve by tie-grouped trapezoid integration.

    Equal scores collapse into a single threshold step, so the result equals
    (concordant pairs + 0.5 * tied pairs) / (P * N) exactly.
    """
    probs, labels = _check_pair(probs, labels)
    n_pos = float(np.sum(labels == 1))
    n_neg = float(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC undefined: both classes must be present")

    order = np.argsort(-probs, kind="stable")
    sorted_probs = probs[order]
    sorted_labels = labels[order]
    # indices where a group of equal scores ends
    boundary = np.nonzero(np.diff(sorted_probs))[0]
    group_ends = np.concatenate([boundary, [probs.size - 1]])

    tps = np.cumsum(sorted_labels == 1)[group_ends]
    fps = np.cumsum(sorted_labels == 0)[group_ends]
    tpr = np.concatenate([[0.0], tps / n_pos])
    fpr = np.concatenate([[0.0], fps / n_neg])
    return float(np.trapezoid(tpr, fpr))


def auc_pairwise_oracle(probs: np.ndarray, labels: np.ndarray, block: int = 512) -> float:
    """Brute-force AUC: concordant pairs plus half ties over P*N (test oracle)."""
    probs, labels = _check_pair(probs, labels)
    pos = probs[labels == 1]
    neg = probs[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError("AUC undefined: both classes must be present")
    total = 0.0
    for start in range(0, pos.size, block):
        chunk = pos[start : start + block][:, None]
        total += np.sum(chunk > neg[None, :]) + 0.5 * np.sum(chunk == neg[None, :])
    return float(total / (pos.size * neg.size))


def calibration_curve(
    probs: np.ndarray, labels: np.ndarray, n_bins: int = 10
) -> CalibrationCurve:
    """Equal-width reliability bins on [0, 1] plus expected calibration error.

    Empty bins are emitted with count 0 and NaN means. ECE is the
    count-weighted absolute gap between mean prediction and observed rate.
    """
    if n_bins < 2:
        raise ValidationError(f"n_bins must be >= 2, got {n_bins}")
    probs, labels = _check_pair(probs, labels)
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise ValidationError("probabilities must lie in [0, 1]")

    idx = np.minimum((probs * n_bins).astype(int), n_bins - 1)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    bins: list[CalibrationBin] = []
    ece = 0.0
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        if count:
            mean_pred = float(probs[mask].mean())
            obs_frac = float(labels[mask].mean())
            ece += (count / probs.size) * abs(mean_pred - obs_frac)
        else:
            mean_pred = float("nan")
            obs_frac = float("nan")
        bins.append(
            CalibrationBin(
                lo=float(edges[b]), hi=float(edges[b + 1]),
                mean_pred=mean_pred, obs_frac=obs_frac, count=count,
            )
        )
    return CalibrationCurve(bins=tuple(bins), ece=ece, n=probs.size)


def downsample_majority(data: LabeledMatrix, seed: int) -> LabeledMatrix:
    """Subsample the majority class without replacement to a 1:1 class ratio.

    All minority rows are kept; the output row order is reshuffled with the
    seeded RNG. Training-data-only by convention; never resample a test set.
    """
    pos_idx = np.flatnonzero(data.y == 1)
    neg_idx = np.flatnonzero(data.y == 0)
    if pos_idx.size == 0 or neg_idx.size == 0:
        raise ValidationError("downsampling requires both classes present")
    if pos_idx.size >= neg_idx.size:
        major, minor = pos_idx, neg_idx
    else:
        major, minor = neg_idx, pos_idx
    rng = substream(seed, "downsample")
    kept_major = rng.choice(major, size=minor.size, replace=False)
    keep = np.concatenate([minor, kept_major])
    keep = keep[rng.permutation(keep.size)]
    return LabeledMatrix(x=data.x[keep], y=data.y[keep], column_names=data.column_names)
