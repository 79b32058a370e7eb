"""Turn incomplete layer annotations into cropped, densely labelled training pairs.

The pipeline drops every layer that is not defined at all columns, groups the
remaining ids into runs of consecutive ids, crops each run (with a five-row
margin above the shallowest row and below the deepest row) out of both the
image and the annotation, and fills the space between layers with the label
of the layer above.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BACKGROUND,
    CropBox,
    LayerMap,
    Radargram,
    SemanticMap,
    is_complete,
)

MARGIN = 5


@dataclass(frozen=True)
class ConsecutiveSet:
    layer_ids: tuple[int, ...]

    def __post_init__(self):
        ids = tuple(int(i) for i in self.layer_ids)
        if len(ids) < 2:
            raise ValueError("a consecutive set needs at least two layers")
        if any(b - a != 1 for a, b in zip(ids, ids[1:])):
            raise ValueError(f"ids {ids} are not a step-1 run")
        object.__setattr__(self, "layer_ids", ids)

    @property
    def top_id(self) -> int:
        return self.layer_ids[0]

    @property
    def bottom_id(self) -> int:
        return self.layer_ids[-1]

    def __iter__(self):
        return iter(self.layer_ids)

    def __len__(self):
        return len(self.layer_ids)


@dataclass(frozen=True, eq=False)
class CropResult:
    box: CropBox
    image: Radargram
    layers: LayerMap
    source_set: ConsecutiveSet

    def __eq__(self, other):
        if not isinstance(other, CropResult):
            return NotImplemented
        return (self.box == other.box and self.image == other.image
                and self.layers == other.layers and self.source_set == other.source_set)


def remove_incomplete(m: LayerMap) -> LayerMap:
    return m.subset(i for i in m.ids if is_complete(m, i))


def consecutive_sets(m: LayerMap) -> list[ConsecutiveSet]:
    """Maximal step-1 runs of layer ids, singletons dropped, shallowest first."""
    runs, run = [], []
    for lid in sorted(m.ids):
        if run and lid != run[-1] + 1:
            runs.append(run)
            run = []
        run.append(lid)
    if run:
        runs.append(run)
    return [ConsecutiveSet(tuple(r)) for r in runs if len(r) >= 2]


def peak_valley(s: ConsecutiveSet, m: LayerMap) -> tuple[int, int]:
    """Shallowest row of the top layer and deepest row of the bottom layer."""
    for lid in (s.top_id, s.bottom_id):
        if lid not in m:
            raise KeyError(f"layer {lid} of set {s.layer_ids} not in map")
        if not is_complete(m, lid):
            raise ValueError(f"layer {lid} is incomplete")
    return int(m.rows(s.top_id).min()), int(m.rows(s.bottom_id).max())


def crop_box(s: ConsecutiveSet, m: LayerMap, image_height: int, image_width: int) -> CropBox:
    p, v = peak_valley(s, m)
    if p >= v:
        raise ValueError(f"peak row {p} not above valley row {v} for set {s.layer_ids}")
    if v >= image_height:
        raise ValueError(f"valley row {v} outside image of height {image_height}")
    return CropBox(0, max(0, p - MARGIN), image_width, min(image_height, v + MARGIN + 1))


def crop(image: Radargram, m: LayerMap, box: CropBox, s: ConsecutiveSet) -> CropResult:
    if not box.fits(image.height, image.width) or box.width != m.width:
        raise ValueError(f"{box} does not fit image {image.height}x{image.width}")
    kept = {}
    for lid in s:
        if lid not in m:
            raise KeyError(f"layer {lid} of set {s.layer_ids} not in map")
        rows = m.rows(lid)[box.x1:box.x2] - box.y1
        if np.any(rows < 0) or np.any(rows >= box.height):
            raise ValueError(f"layer {lid} leaves crop rows [{box.y1}, {box.y2})")
        kept[lid] = rows
    pixels = image.pixels[box.y1:box.y2, box.x1:box.x2]
    return CropResult(
        box=box,
        image=Radargram(pixels, image.vertical_resolution_cm),
        layers=LayerMap(box.width, kept),
        source_set=s,
    )


def semantic_fill(c: CropResult) -> SemanticMap:
    """Label every pixel at or below a layer row with that layer's id.

    Pixels above the topmost layer stay background; pixels below the bottom
    layer keep the bottom layer's id.
    """
    h, w = c.box.height, c.layers.width
    out = np.full((h, w), BACKGROUND, dtype=np.uint8)
    depth = np.arange(h)[:, None]
    for lid in c.layers.ids:
        if lid > 255:
            raise ValueError(f"layer id {lid} does not fit a byte")
        rows = c.layers.rows(lid)
        if np.any(rows < 0):
            raise ValueError(f"layer {lid} is incomplete")
        # ids ascend with depth, so later layers overwrite the tail of earlier ones
        out[depth >= rows[None, :]] = lid
    return SemanticMap(out)


def preprocess(image: Radargram, m: LayerMap) -> list[tuple[CropResult, SemanticMap]]:
    if image.width != m.width:
        raise ValueError(f"image width {image.width} != annotation width {m.width}")
    clean = remove_incomplete(m)
    out = []
    for s in consecutive_sets(clean):
        box = crop_box(s, clean, image.height, image.width)
        c = crop(image, clean, box, s)
        out.append((c, semantic_fill(c)))
    return out
