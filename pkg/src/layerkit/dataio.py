"""File formats: binary PGM images, layer-curve CSV, JSON reports and corpus manifests.

Readers reject malformed input with :class:`FormatError`, naming the byte
offset or line number. Writers are deterministic and replace the target
atomically (temporary file in the same directory, then rename).
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import MISSING, LayerMap, Radargram, SemanticMap
from .metrics import EvalReport, aggregate

CSV_HEADER = "layer_id,col,row"
MANIFEST_FIELDS = ("image", "layers", "semantic", "split")
SPLITS = ("train", "val", "test")
REPORT_KEYS = ("accuracy", "mean_iou", "thickness_mae_px", "k_classes_used", "filters_applied")


class FormatError(ValueError):
    pass


def atomic_write(path, data: Union[bytes, str]) -> Path:
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# -- PGM ---------------------------------------------------------------------

def encode_pgm(grid: np.ndarray) -> bytes:
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.dtype != np.uint8:
        raise ValueError("PGM payload must be a 2-D uint8 grid")
    h, w = grid.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(grid).tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    pos = 0
    fields = []
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError(f"byte {pos}: header ends before field {len(fields) + 1} of 4")
        fields.append((start, data[start:pos]))
    (o0, magic), (o1, w), (o2, h), (o3, maxval) = fields
    if magic != b"P5":
        raise FormatError(f"byte {o0}: expected magic P5, got {magic[:8]!r}")
    try:
        width, height, mv = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError(f"byte {o1}: non-integer width/height/maxval") from None
    if width < 1 or height < 1:
        raise FormatError(f"byte {o1}: non-positive image size {width}x{height}")
    if mv != 255:
        raise FormatError(f"byte {o3}: maxval {mv} unsupported, only 255")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError(f"byte {pos}: missing whitespace after maxval")
    pos += 1
    need = width * height
    got = len(data) - pos
    if got < need:
        raise FormatError(f"byte {len(data)}: payload truncated, need {need} bytes after offset {pos}, have {got}")
    if got > need:
        raise FormatError(f"byte {pos + need}: {got - need} trailing bytes after payload")
    return np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(height, width).copy()


def write_pgm(path, value) -> Path:
    """Write a Radargram, SemanticMap or uint8 grid as binary PGM."""
    if isinstance(value, Radargram):
        grid = value.pixels
    elif isinstance(value, SemanticMap):
        grid = value.classes
    else:
        grid = value
    return atomic_write(path, encode_pgm(grid))


def read_pgm(path, kind: str = "radargram", vertical_resolution_cm: float = 4.0):
    with open(path, "rb") as f:
        grid = decode_pgm(f.read())
    if kind == "radargram":
        return Radargram(grid, vertical_resolution_cm)
    if kind == "semantic":
        return SemanticMap(grid)
    raise ValueError(f"unknown kind {kind!r}")


# -- layer CSV ---------------------------------------------------------------

def dumps_layers_csv(m: LayerMap) -> str:
    lines = [CSV_HEADER, f"# width={m.width}"]
    for lid in m.ids:
        rows = m.rows(lid)
        for col in np.flatnonzero(rows != MISSING):
            lines.append(f"{lid},{col},{rows[col]}")
    return "\n".join(lines) + "\n"


def loads_layers_csv(text: str, height: Optional[int] = None) -> LayerMap:
    """Parse layer CSV; ``height`` (if given) bounds the allowed rows."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise FormatError(f"line 1: expected header {CSV_HEADER!r}")
    if len(lines) < 2 or not lines[1].startswith("# width="):
        raise FormatError("line 2: expected '# width=N'")
    try:
        width = int(lines[1][len("# width="):])
    except ValueError:
        raise FormatError("line 2: width is not an integer") from None
    if width < 1:
        raise FormatError("line 2: width must be positive")
    layers: dict = {}
    last = None
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        try:
            lid, col, row = (int(p) for p in parts)
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer field in {line!r}") from None
        key = (lid, col)
        if last is not None and key == last:
            raise FormatError(f"line {lineno}: duplicate entry for layer {lid}, column {col}")
        if last is not None and key < last:
            raise FormatError(f"line {lineno}: rows not sorted by (layer_id, col)")
        if not 0 <= col < width:
            raise FormatError(f"line {lineno}: column {col} outside [0, {width})")
        if row < 0 or (height is not None and row >= height):
            raise FormatError(f"line {lineno}: row {row} out of bounds")
        if lid < 1:
            raise FormatError(f"line {lineno}: layer id {lid} must be positive")
        layers.setdefault(lid, np.full(width, MISSING, dtype=np.int64))[col] = row
        last = key
    return LayerMap(width, layers)


def write_layers_csv(path, m: LayerMap) -> Path:
    """Layers with no defined column cannot be represented and are skipped."""
    return atomic_write(path, dumps_layers_csv(m))


def read_layers_csv(path, height: Optional[int] = None) -> LayerMap:
    with open(path, encoding="utf-8") as f:
        return loads_layers_csv(f.read(), height)


# -- reports -----------------------------------------------------------------

def _report_dict(r: EvalReport, extra: Optional[dict] = None) -> dict:
    d = {k: getattr(r, k) for k in REPORT_KEYS}
    d["accuracy"] = float(d["accuracy"])
    d["mean_iou"] = float(d["mean_iou"])
    d["thickness_mae_px"] = float(d["thickness_mae_px"])
    d["k_classes_used"] = int(d["k_classes_used"])
    d["filters_applied"] = dict(d["filters_applied"])
    if extra:
        d.update(extra)
    return d


def dumps_report_json(report: Union[EvalReport, Sequence[EvalReport]], summary: Optional[EvalReport] = None,
                      extra: Optional[dict] = None) -> str:
    """Serialize one report, or a list of per-image reports with their aggregate.

    ``summary`` overrides the aggregate computed from a list (e.g. to carry
    corpus-level filter descriptors). ``extra`` keys are appended after the
    five fixed keys and before ``per_image``.
    """
    if isinstance(report, EvalReport):
        d = _report_dict(report, extra)
        d["per_image"] = []
    else:
        report = list(report)
        d = _report_dict(summary if summary is not None else aggregate(report), extra)
        d["per_image"] = [_report_dict(r) for r in report]
    return json.dumps(d, indent=2, allow_nan=False) + "\n"


def write_report_json(path, report, summary=None, extra=None) -> Path:
    return atomic_write(path, dumps_report_json(report, summary, extra))


def _report_from_dict(d: dict) -> EvalReport:
    return EvalReport(d["accuracy"], d["mean_iou"], d["thickness_mae_px"], d["k_classes_used"],
                      d["filters_applied"])


def read_report_json(path) -> tuple[EvalReport, list[EvalReport]]:
    with open(path, encoding="utf-8") as f:
        d = json.load(f)
    missing = [k for k in REPORT_KEYS if k not in d]
    if missing:
        raise FormatError(f"report lacks keys {missing}")
    return _report_from_dict(d), [_report_from_dict(x) for x in d.get("per_image", [])]


# -- manifests ---------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    image: str
    layers: str
    semantic: Optional[str] = None
    split: str = "train"


@dataclass(frozen=True)
class CorpusManifest:
    """Corpus listing; paths are relative to the manifest's directory."""

    entries: tuple
    root: Path = Path(".")

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.split not in SPLITS:
                raise ValueError(f"bad split {e.split!r} for {e.image}")
            for p in (e.image, e.layers, e.semantic):
                if p is None:
                    continue
                if p in seen:
                    raise ValueError(f"path {p} listed twice")
                seen.add(p)

    def resolve(self, rel: Optional[str]) -> Optional[Path]:
        return None if rel is None else self.root / rel

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def dumps_manifest(m: CorpusManifest) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_FIELDS)
    for e in m.entries:
        row = asdict(e)
        row["semantic"] = row["semantic"] or ""
        w.writerow([row[k] for k in MANIFEST_FIELDS])
    return buf.getvalue()


def write_manifest(path, m: CorpusManifest) -> Path:
    return atomic_write(path, dumps_manifest(m))


def read_manifest(path) -> CorpusManifest:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != MANIFEST_FIELDS:
        raise FormatError(f"line 1: expected header {','.join(MANIFEST_FIELDS)}")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise FormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
        image, layers, semantic, split = row
        if split not in SPLITS:
            raise FormatError(f"line {lineno}: split {split!r} not one of {SPLITS}")
        entries.append(ManifestEntry(image, layers, semantic or None, split))
    try:
        return CorpusManifest(tuple(entries), path.parent)
    except ValueError as e:
        raise FormatError(str(e)) from None
