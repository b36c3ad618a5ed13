"""IoU, prediction invariance and extreme-percentile partitions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .colorcore import FEATURES, VisualStats
from .errors import EmptyDataset, InvalidInput, ShapeError


@dataclass(frozen=True)
class IoUResult:
    per_class: np.ndarray  # NaN for classes absent from both masks
    intersection: np.ndarray
    union: np.ndarray

    @property
    def mean(self) -> float:
        present = self.union > 0
        if not present.any():
            return float("nan")
        return float(np.mean(self.per_class[present]))


def confusion_counts(pred, gt, k: int, ignore: Optional[int] = None):
    """Per-class intersection and union counts of two label masks."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    valid = np.ones(gt.shape, dtype=bool)
    if ignore is not None:
        valid &= (gt != ignore) & (pred != ignore)
    p = pred[valid].astype(np.int64)
    g = gt[valid].astype(np.int64)
    if p.size and (min(p.min(), g.min()) < 0 or max(p.max(), g.max()) >= k):
        raise InvalidInput(f"labels must lie in [0, {k})")
    inter = np.bincount(g[p == g], minlength=k)[:k]
    union = np.bincount(p, minlength=k)[:k] + np.bincount(g, minlength=k)[:k] - inter
    return inter, union


def iou_from_counts(inter, union) -> IoUResult:
    inter = np.asarray(inter, dtype=np.int64)
    union = np.asarray(union, dtype=np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        per = np.where(union > 0, inter / np.maximum(union, 1), np.nan)
    return IoUResult(per, inter, union)


def iou(pred, gt, k: int, ignore: Optional[int] = None) -> IoUResult:
    """Per-class IoU and mIoU; classes absent from both masks are left out of the mean."""
    return iou_from_counts(*confusion_counts(pred, gt, k, ignore))


def dataset_iou(preds, gts, k: int, ignore: Optional[int] = None) -> IoUResult:
    """IoU with intersections and unions accumulated over the whole dataset."""
    inter = np.zeros(k, dtype=np.int64)
    union = np.zeros(k, dtype=np.int64)
    for p, g in zip(preds, gts):
        i, u = confusion_counts(p, g, k, ignore)
        inter += i
        union += u
    return iou_from_counts(inter, union)


def prediction_overlap(pred_original, pred_modified, k: int) -> float:
    """mIoU of the modified-image prediction against the original-image one."""
    return iou(pred_modified, pred_original, k).mean


def invariance_overlap(model, original, modified) -> float:
    """How much a model's prediction survives an image modification (1.0 = unchanged)."""
    from .segnet.model import predict

    if np.shape(getattr(original, "data", original)) != np.shape(getattr(modified, "data", modified)):
        raise ShapeError("original and modified images differ in size")
    return prediction_overlap(predict(model, original), predict(model, modified), model.num_classes)


@dataclass(frozen=True)
class PartitionSpec:
    feature: str
    low_pct: float
    high_pct: float

    def __post_init__(self):
        if self.feature not in FEATURES:
            raise InvalidInput(f"unknown feature {self.feature!r}; choose from {sorted(FEATURES)}")
        if not (0 < self.low_pct < self.high_pct < 100):
            raise InvalidInput("need 0 < low_pct < high_pct < 100")


def nearest_rank_count(n: int, pct: float) -> int:
    """ceil(n * pct / 100) computed exactly on decimal percentiles."""
    return math.ceil(Fraction(n) * Fraction(str(pct)) / 100)


def partition_extremes(stats: Sequence[VisualStats], spec: PartitionSpec) -> Tuple[List[int], List[int]]:
    """Indices of the low and high extreme subsets of one feature.

    Ranks are assigned by (value, original index); the low subset holds the
    ``ceil(N * low_pct / 100)`` lowest ranks and the high subset the
    ``ceil(N * (100 - high_pct) / 100)`` highest, trimmed so they never
    overlap.  Both lists are returned in rank order.
    """
    n = len(stats)
    if n == 0:
        raise EmptyDataset("no statistics to partition")
    if n < 2:
        raise InvalidInput("partitioning needs at least two images")
    values = np.array([s.feature(spec.feature) for s in stats])
    order = np.argsort(values, kind="stable")
    n_low = nearest_rank_count(n, spec.low_pct)
    n_high = min(nearest_rank_count(n, 100 - spec.high_pct), n - n_low)
    low = order[:n_low].tolist()
    high = order[n - n_high :].tolist() if n_high > 0 else []
    return low, high
