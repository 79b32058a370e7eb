"""Shared value types for radargrams, layer annotations and semantic maps.

Rows index depth (increasing downward), columns index along-track position.
Missing annotation entries are stored as ``-1`` in the per-layer row vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

MISSING = -1
NUM_CLASSES = 28
BACKGROUND = 0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Radargram:
    """Grayscale radar image, one byte per pixel."""

    pixels: np.ndarray
    vertical_resolution_cm: float = 4.0

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"radargram must be a non-empty 2-D grid, got shape {p.shape}")
        if p.dtype != np.uint8:
            if np.any(p < 0) or np.any(p > 255) or np.any(p != np.round(p)):
                raise ValueError("radargram intensities must be integers in [0, 255]")
            p = p.astype(np.uint8)
        if not self.vertical_resolution_cm > 0:
            raise ValueError("vertical_resolution_cm must be positive")
        object.__setattr__(self, "pixels", _frozen(p))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Radargram):
            return NotImplemented
        return (self.vertical_resolution_cm == other.vertical_resolution_cm
                and np.array_equal(self.pixels, other.pixels))


@dataclass(frozen=True, eq=False)
class SemanticMap:
    """Dense per-pixel class ids; 0 is background."""

    classes: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.classes)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError(f"semantic map must be a non-empty 2-D grid, got shape {c.shape}")
        if c.dtype != np.uint8:
            if np.any(c < 0) or np.any(c > 255):
                raise ValueError("class ids must lie in [0, 255]")
            c = c.astype(np.uint8)
        object.__setattr__(self, "classes", _frozen(c))

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    def layer_ids(self) -> list[int]:
        """Distinct non-background class ids, ascending."""
        ids = np.unique(self.classes)
        return [int(i) for i in ids if i != BACKGROUND]

    def __eq__(self, other):
        if not isinstance(other, SemanticMap):
            return NotImplemented
        return np.array_equal(self.classes, other.classes)


@dataclass(frozen=True, eq=False)
class LayerMap:
    """Sparse layer curves: for each layer id, one row (or MISSING) per column.

    Construction only checks shapes; ordering problems are reported by
    :func:`validate_layer_map` so that bad annotations can still be loaded
    and inspected.
    """

    width: int
    layers: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.width) < 1:
            raise ValueError("width must be positive")
        out = {}
        for lid in sorted(self.layers):
            rows = np.asarray(self.layers[lid])
            if rows.shape != (self.width,):
                raise ValueError(f"layer {lid}: expected {self.width} columns, got shape {rows.shape}")
            if rows.size and not np.issubdtype(rows.dtype, np.integer):
                if np.any(rows != np.round(rows)):
                    raise ValueError(f"layer {lid}: rows must be integers")
            out[int(lid)] = _frozen(rows.astype(np.int64))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "layers", out)

    @classmethod
    def from_rows(cls, width: int, layers: Mapping[int, Sequence[Optional[int]]]) -> "LayerMap":
        """Build from per-layer sequences where ``None`` marks a missing column."""
        conv = {}
        for lid, rows in layers.items():
            conv[lid] = np.array([MISSING if r is None else r for r in rows], dtype=np.int64)
        return cls(width, conv)

    @property
    def ids(self) -> list[int]:
        return list(self.layers)

    def rows(self, layer_id: int) -> np.ndarray:
        return self.layers[layer_id]

    def present(self, layer_id: int) -> np.ndarray:
        return self.layers[layer_id] != MISSING

    def subset(self, ids: Iterable[int]) -> "LayerMap":
        return LayerMap(self.width, {i: self.layers[i] for i in ids})

    def shifted(self, dy: int) -> "LayerMap":
        """Move every defined row by ``dy``; missing entries stay missing."""
        out = {}
        for lid, rows in self.layers.items():
            r = rows.copy()
            r[rows != MISSING] += dy
            out[lid] = r
        return LayerMap(self.width, out)

    def __len__(self):
        return len(self.layers)

    def __contains__(self, layer_id):
        return layer_id in self.layers

    def __eq__(self, other):
        if not isinstance(other, LayerMap):
            return NotImplemented
        return (self.width == other.width
                and list(self.layers) == list(other.layers)
                and all(np.array_equal(self.layers[k], other.layers[k]) for k in self.layers))

    def __repr__(self):
        return f"LayerMap(width={self.width}, ids={self.ids})"


@dataclass(frozen=True)
class CropBox:
    """Crop rectangle; ``x2`` and ``y2`` are exclusive."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if min(self.x1, self.y1, self.x2, self.y2) < 0:
            raise ValueError(f"negative crop coordinate in {self}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"empty crop box {self}")

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    def fits(self, height: int, width: int) -> bool:
        return self.x2 <= width and self.y2 <= height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class LabelSchema:
    num_classes: int = NUM_CLASSES
    background_id: int = BACKGROUND

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.background_id != BACKGROUND:
            raise ValueError("background id is fixed at 0")


@dataclass(frozen=True)
class Violation:
    kind: str  # "bad-id", "negative-row" or "crossing"
    layer_ids: tuple[int, ...]
    column: Optional[int] = None

    def __str__(self):
        where = "" if self.column is None else f" at column {self.column}"
        return f"{self.kind}: layers {self.layer_ids}{where}"


def validate_layer_map(m: LayerMap) -> list[Violation]:
    """List every broken LayerMap invariant. Empty means the map is valid."""
    out = []
    for lid, rows in m.layers.items():
        if lid < 1:
            out.append(Violation("bad-id", (lid,)))
        for col in np.flatnonzero((rows < 0) & (rows != MISSING)):
            out.append(Violation("negative-row", (lid,), int(col)))
    ids = m.ids
    if len(ids) < 2:
        return out
    grid = np.stack([m.layers[i] for i in ids])  # (n_layers, width)
    for col in range(m.width):
        column = grid[:, col]
        have = np.flatnonzero(column != MISSING)
        # strict increase between successive defined layers covers all pairs
        bad = np.flatnonzero(np.diff(column[have]) <= 0)
        for b in bad:
            out.append(Violation("crossing", (ids[have[b]], ids[have[b + 1]]), col))
    return out


def is_complete(m: LayerMap, layer_id: int) -> bool:
    """True when the layer has a row at every column."""
    if layer_id not in m:
        raise KeyError(f"unknown layer id {layer_id}")
    return bool(np.all(m.present(layer_id)))
