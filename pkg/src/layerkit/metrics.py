"""Segmentation and thickness scores, plus the corpus filters used to report them.

Accuracy and mean IoU are one-vs-rest per class and averaged over ``k``
classes. By default ``k`` is the set of classes present in the ground truth
(background included); pass ``num_classes`` to score a fixed universe
``0..num_classes-1`` instead. Thickness MAE averages over the ground truth's
layers only, with layers missing from the prediction counted as zero thick.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import BACKGROUND, SemanticMap
from .layerize import ThicknessReport, mean_thickness


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-class ``(tp, tn, fp, fn)``."""

    per_class: dict

    @property
    def classes(self) -> list[int]:
        return list(self.per_class)

    @property
    def total(self) -> int:
        return sum(next(iter(self.per_class.values()))) if self.per_class else 0


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    mean_iou: float
    thickness_mae_px: float
    k_classes_used: int
    filters_applied: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = (self.accuracy, self.mean_iou, self.thickness_mae_px)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite metric in {vals}")


def confusion(pred: SemanticMap, gt: SemanticMap, classes: Iterable[int]) -> ConfusionCounts:
    if pred.classes.shape != gt.classes.shape:
        raise ValueError(f"shape mismatch: pred {pred.classes.shape} vs gt {gt.classes.shape}")
    classes = sorted({int(c) for c in classes})
    if not classes:
        raise ValueError("need at least one class")
    p, g = pred.classes.ravel(), gt.classes.ravel()
    n = p.size
    pc = np.bincount(p, minlength=256)
    gc = np.bincount(g, minlength=256)
    hit = np.bincount(p[p == g], minlength=256)
    out = {}
    for c in classes:
        tp = int(hit[c])
        fp = int(pc[c]) - tp
        fn = int(gc[c]) - tp
        out[c] = (tp, n - tp - fp - fn, fp, fn)
    return ConfusionCounts(out)


def accuracy(cc: ConfusionCounts) -> float:
    if not cc.per_class:
        raise ValueError("empty class set")
    return sum((tp + tn) / (tp + tn + fp + fn) for tp, tn, fp, fn in cc.per_class.values()) / len(cc.per_class)


def per_class_iou(cc: ConfusionCounts) -> dict:
    """IoU for every class that appears in prediction or ground truth."""
    return {c: tp / (tp + fp + fn) for c, (tp, _, fp, fn) in cc.per_class.items() if tp + fp + fn > 0}


def mean_iou(cc: ConfusionCounts) -> float:
    if not cc.per_class:
        raise ValueError("empty class set")
    ious = per_class_iou(cc)
    if not ious:
        raise ValueError("no class appears in either map; IoU undefined")
    return sum(ious.values()) / len(ious)


def thickness_mae(pred: ThicknessReport, gt: ThicknessReport) -> float:
    if not gt.per_layer:
        raise ValueError("ground truth has no layers")
    return sum(abs(pred.per_layer.get(k, 0.0) - t) for k, t in gt.per_layer.items()) / len(gt.per_layer)


def spurious_layers(pred: ThicknessReport, gt: ThicknessReport) -> list[int]:
    """Layers predicted but absent from the ground truth (not part of the MAE)."""
    return sorted(set(pred.per_layer) - set(gt.per_layer))


def layer_count(s: SemanticMap) -> int:
    return len(s.layer_ids())


def filter_by_layer_count(items: Sequence, min_layers: int) -> list:
    """Keep ``(pred, gt)`` pairs whose ground truth has strictly more than ``min_layers`` layers."""
    if min_layers < 0:
        raise ValueError("min_layers must be non-negative")
    return [(p, g) for p, g in items if layer_count(g) > min_layers]


def restrict_top_n(pred: SemanticMap, gt: SemanticMap, n: int) -> tuple[SemanticMap, SemanticMap]:
    """Background out every layer class except the ``n`` shallowest of the ground truth.

    Layer ids grow with depth, so the shallowest layers are the smallest ids.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    keep = np.zeros(256, dtype=bool)
    keep[BACKGROUND] = True
    keep[gt.layer_ids()[:n]] = True

    def mask(s):
        c = s.classes.copy()
        c[~keep[c]] = BACKGROUND
        return SemanticMap(c)

    return mask(pred), mask(gt)


def evaluate(pred: SemanticMap, gt: SemanticMap, *, top_n: Optional[int] = None,
             num_classes: Optional[int] = None) -> EvalReport:
    """Score one prediction against its ground truth."""
    filters = {"top_n": top_n, "universe": "present" if num_classes is None else num_classes}
    if top_n is not None:
        pred, gt = restrict_top_n(pred, gt, top_n)
    if num_classes is None:
        classes = [int(c) for c in np.unique(gt.classes)]
    else:
        classes = range(num_classes)
    cc = confusion(pred, gt, classes)
    mae = thickness_mae(mean_thickness(pred), mean_thickness(gt))
    return EvalReport(accuracy(cc), mean_iou(cc), mae, len(cc.per_class), filters)


def aggregate(reports: Sequence[EvalReport]) -> EvalReport:
    """Unweighted per-image mean of every metric."""
    if not reports:
        raise ValueError("nothing to aggregate")
    if len(reports) == 1:
        return reports[0]
    n = len(reports)
    filters = dict(reports[0].filters_applied)
    filters["n_images"] = n
    return EvalReport(
        accuracy=sum(r.accuracy for r in reports) / n,
        mean_iou=sum(r.mean_iou for r in reports) / n,
        thickness_mae_px=sum(r.thickness_mae_px for r in reports) / n,
        k_classes_used=max(r.k_classes_used for r in reports),
        filters_applied=filters,
    )


def evaluate_corpus(pairs: Sequence, *, min_layers: Optional[int] = None, top_n: Optional[int] = None,
                    num_classes: Optional[int] = None) -> tuple[EvalReport, list[EvalReport]]:
    """Filter, score every pair and aggregate. Returns ``(aggregate, per_image)``."""
    if min_layers is not None:
        pairs = filter_by_layer_count(pairs, min_layers)
    if not pairs:
        raise ValueError("no images left to evaluate")
    per_image = [evaluate(p, g, top_n=top_n, num_classes=num_classes) for p, g in pairs]
    agg = aggregate(per_image)
    filters = dict(agg.filters_applied, min_layers=min_layers, n_images=len(per_image))
    return replace(agg, filters_applied=filters), per_image
