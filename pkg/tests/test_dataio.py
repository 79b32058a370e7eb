import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_stack
from layerkit import LayerMap, Radargram, SemanticMap
from layerkit.dataio import (
    CorpusManifest, FormatError, ManifestEntry, decode_pgm, dumps_layers_csv, dumps_report_json, encode_pgm,
    loads_layers_csv, read_layers_csv, read_manifest, read_pgm, read_report_json, write_layers_csv,
    write_manifest, write_pgm, write_report_json,
)
from layerkit.metrics import EvalReport
from layerkit.synth import gapped_annotation


def test_one_pixel_pgm(tmp_path):
    p = write_pgm(tmp_path / "a.pgm", Radargram(np.zeros((1, 1), dtype=np.uint8)))
    data = p.read_bytes()
    assert data == b"P5\n1 1\n255\n\x00" and len(data) <= 13
    assert read_pgm(p) == Radargram(np.zeros((1, 1)))


def test_pgm_hex_layout():
    data = encode_pgm(np.array([[1, 2, 3], [250, 251, 252]], dtype=np.uint8))
    assert data.hex() == "50350a3320320a3235350a010203fafbfc"


@pytest.mark.parametrize("seed", range(10))
def test_pgm_round_trip(tmp_path, seed):
    rng = np.random.default_rng(seed)
    grid = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    write_pgm(tmp_path / "s.pgm", SemanticMap(grid))
    assert np.array_equal(read_pgm(tmp_path / "s.pgm", "semantic").classes, grid)


def test_pgm_header_comments_and_whitespace():
    data = b"P5 # magic\n# comment line\n2\t1\n255\n\x07\x08"
    assert decode_pgm(data).tolist() == [[7, 8]]


@pytest.mark.parametrize("data,needle", [
    (b"P2\n1 1\n255\n\x00", "magic"),
    (b"P5\n1 1\n65535\n\x00\x00", "maxval 65535"),
    (b"P5\n2 2\n255\n\x00", "truncated"),
    (b"P5\n1 1\n255\n\x00\x00", "trailing"),
    (b"P5\n1", "header"),
    (b"P5\nx 1\n255\n\x00", "non-integer"),
])
def test_pgm_rejects(data, needle):
    with pytest.raises(FormatError, match=needle) as e:
        decode_pgm(data)
    assert "byte" in str(e.value)


def test_layers_csv_empty_map():
    assert dumps_layers_csv(LayerMap(7, {})) == "layer_id,col,row\n# width=7\n"
    assert loads_layers_csv("layer_id,col,row\n# width=7\n") == LayerMap(7, {})


def test_layers_csv_worked_example(tmp_path):
    _, m = gapped_annotation(width=8)
    write_layers_csv(tmp_path / "l.csv", m)
    back = read_layers_csv(tmp_path / "l.csv")
    assert back == m
    ids = sorted({int(line.split(",")[0]) for line in (tmp_path / "l.csv").read_text().splitlines()[2:]})
    assert ids == [2, 3, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 18, 19, 20]
    assert "12,7," not in (tmp_path / "l.csv").read_text()  # truncated half of layer 12 omitted


@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_layers_csv_round_trip(width, seed):
    rng = np.random.default_rng(seed)
    m = random_stack(rng, width, 50, rng.choice(np.arange(1, 40), size=int(rng.integers(0, 6)), replace=False))
    layers = {}
    for k, v in m.layers.items():
        v = v.copy()
        holes = rng.random(width) < 0.3
        holes[int(rng.integers(width))] = False  # keep each layer non-empty
        v[holes] = -1
        layers[k] = v
    m = LayerMap(width, layers)
    assert loads_layers_csv(dumps_layers_csv(m)) == m


@pytest.mark.parametrize("text,needle", [
    ("layer,col,row\n# width=3\n", "line 1"),
    ("layer_id,col,row\n3\n", "line 2"),
    ("layer_id,col,row\n# width=3\n1,0,4\n1,0,5\n", "line 4: duplicate"),
    ("layer_id,col,row\n# width=3\n2,0,4\n1,0,5\n", "line 4: rows not sorted"),
    ("layer_id,col,row\n# width=3\n1,3,4\n", "line 3: column 3"),
    ("layer_id,col,row\n# width=3\n1,0,-2\n", "line 3: row -2"),
    ("layer_id,col,row\n# width=3\n1,0\n", "line 3: expected 3"),
])
def test_layers_csv_rejects(text, needle):
    with pytest.raises(FormatError, match=needle):
        loads_layers_csv(text)


def test_layers_csv_height_bound():
    with pytest.raises(FormatError, match="row 9 out of bounds"):
        loads_layers_csv("layer_id,col,row\n# width=1\n1,0,9\n", height=9)


def test_report_single(tmp_path):
    r = EvalReport(0.9, 0.5, 1.25, 5, {"top_n": 10})
    write_report_json(tmp_path / "r.json", r)
    d = json.loads((tmp_path / "r.json").read_text())
    assert list(d)[:5] == ["accuracy", "mean_iou", "thickness_mae_px", "k_classes_used", "filters_applied"]
    assert d["per_image"] == []
    assert read_report_json(tmp_path / "r.json")[0] == r


def test_report_list_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    reps = [EvalReport(float(a), float(b), float(c), 4, {}) for a, b, c in rng.random((2, 3))]
    write_report_json(tmp_path / "r.json", reps)
    summary, per = read_report_json(tmp_path / "r.json")
    assert per == reps and len(per) == 2
    assert summary.accuracy == (reps[0].accuracy + reps[1].accuracy) / 2
    assert dumps_report_json(reps) == dumps_report_json(reps)


def test_manifest_round_trip(tmp_path):
    m = CorpusManifest((ManifestEntry("a.pgm", "a.csv", None, "train"),
                        ManifestEntry("b.pgm", "b.csv", "b_sem.pgm", "test")))
    write_manifest(tmp_path / "m.csv", m)
    back = read_manifest(tmp_path / "m.csv")
    assert back.entries == m.entries and back.root == tmp_path
    assert back.resolve("a.pgm") == tmp_path / "a.pgm"


def test_manifest_rejects(tmp_path):
    (tmp_path / "m.csv").write_text("image,layers,semantic,split\na.pgm,a.csv,,holdout\n")
    with pytest.raises(FormatError, match="line 2"):
        read_manifest(tmp_path / "m.csv")
    with pytest.raises(ValueError):
        CorpusManifest((ManifestEntry("a.pgm", "a.csv"), ManifestEntry("a.pgm", "b.csv")))


def test_writes_are_atomic_and_leave_no_temp_files(tmp_path):
    write_pgm(tmp_path / "x.pgm", np.zeros((2, 2), dtype=np.uint8))
    write_pgm(tmp_path / "x.pgm", np.ones((2, 2), dtype=np.uint8))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["x.pgm"]
