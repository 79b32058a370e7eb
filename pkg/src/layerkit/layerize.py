"""Recover discrete layer curves and layer thickness from semantic maps."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BACKGROUND, MISSING, LayerMap, SemanticMap


@dataclass(frozen=True)
class ThicknessReport:
    """Mean thickness (pixels) per layer id; background is never listed."""

    per_layer: dict = field(default_factory=dict)
    width: int = 1
    unit_cm_per_pixel: float = 4.0

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be positive")
        if any(t < 0 for t in self.per_layer.values()):
            raise ValueError("thickness cannot be negative")


def _topmost(classes: np.ndarray):
    for c in np.unique(classes):
        if c == BACKGROUND:
            continue
        hit = classes == c
        rows = np.argmax(hit, axis=0).astype(np.int64)
        rows[~hit.any(axis=0)] = MISSING
        yield int(c), rows


def semantic_to_layers(s: SemanticMap) -> LayerMap:
    """Keep the topmost pixel of each class in every column."""
    return LayerMap(s.width, dict(_topmost(s.classes)))


def strip_duplicates(s: SemanticMap) -> SemanticMap:
    """Same reduction as :func:`semantic_to_layers`, rendered back onto the grid."""
    out = np.zeros_like(s.classes)
    cols = np.arange(s.width)
    for c, rows in _topmost(s.classes):
        ok = rows != MISSING
        out[rows[ok], cols[ok]] = c
    return SemanticMap(out)


def mean_thickness(s: SemanticMap, unit_cm_per_pixel: float = 4.0) -> ThicknessReport:
    counts = np.bincount(s.classes.ravel(), minlength=256)
    per = {int(c): int(counts[c]) / s.width for c in np.flatnonzero(counts) if c != BACKGROUND}
    return ThicknessReport(per, s.width, unit_cm_per_pixel)


def thickness_cm(r: ThicknessReport) -> dict:
    if not r.unit_cm_per_pixel > 0:
        raise ValueError("unit_cm_per_pixel must be positive")
    return {k: v * r.unit_cm_per_pixel for k, v in r.per_layer.items()}
