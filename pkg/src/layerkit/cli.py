"""Command-line front end: ``layerkit <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error (message on stderr).
Corpus subcommands take ``--manifest`` and parallelise per entry; the worker
count is capped by ``LAYERKIT_THREADS`` (0 or unset means one per CPU).
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio, labelproc, layerize, metrics, sched, synth, tinyseg
from .core import NUM_CLASSES, LayerMap, MISSING

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def workers() -> int:
    raw = os.environ.get("LAYERKIT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"LAYERKIT_THREADS must be an integer, got {raw!r}") from None
    return n if n > 0 else (os.cpu_count() or 1)


def _map(fn, items):
    items = list(items)
    n = min(workers(), max(len(items), 1))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


def fmt(x) -> str:
    """Shortest round-tripping decimal (never scientific) notation."""
    return np.format_float_positional(float(x), trim="0")


# -- subcommands -------------------------------------------------------------

def cmd_synth(a):
    cfg = synth.SynthConfig(
        height=a.height, width=a.width, num_layers=a.num_layers, mean_spacing_px=a.spacing,
        spacing_jitter=a.jitter, undulation_amplitude_px=a.undulation,
        undulation_wavelength_px=a.wavelength, contrast_decay=a.contrast_decay,
        noise_level=a.noise, perturbation_rate=a.perturbation, annotation_dropout=a.dropout,
        seed=a.seed)
    out = Path(a.out)
    entries = []
    for i, (image, full, degraded) in enumerate(synth.generate_corpus(cfg, a.count)):
        stem = f"synth_{i:04d}"
        dataio.write_pgm(out / "images" / f"{stem}.pgm", image)
        dataio.write_layers_csv(out / "layers" / f"{stem}.csv", degraded)
        dataio.write_layers_csv(out / "truth" / f"{stem}.csv", full)
        entries.append(dataio.ManifestEntry(f"images/{stem}.pgm", f"layers/{stem}.csv", None, a.split))
    dataio.write_manifest(out / "manifest.csv", dataio.CorpusManifest(tuple(entries)))
    print(f"wrote {a.count} radargrams to {out}")


def _inputs(a):
    """(image path, layers path, split) triples from --manifest or --image/--layers."""
    if a.manifest:
        m = dataio.read_manifest(a.manifest)
        return [(m.resolve(e.image), m.resolve(e.layers), e.split) for e in m]
    if not (a.image and a.layers):
        raise UsageError("give --manifest or both --image and --layers")
    return [(Path(a.image), Path(a.layers), a.split)]


def cmd_preprocess(a):
    out = Path(a.out)

    def one(item):
        img_path, lay_path, split = item
        image = dataio.read_pgm(img_path)
        layers = dataio.read_layers_csv(lay_path, height=image.height)
        rows = []
        for k, (c, sem) in enumerate(labelproc.preprocess(image, layers)):
            stem = f"{img_path.stem}_{k:02d}"
            dataio.write_pgm(out / "crops" / f"{stem}.pgm", c.image)
            dataio.write_layers_csv(out / "crops" / f"{stem}.csv", c.layers)
            dataio.write_pgm(out / "crops" / f"{stem}_sem.pgm", sem)
            rows.append(dataio.ManifestEntry(f"crops/{stem}.pgm", f"crops/{stem}.csv",
                                             f"crops/{stem}_sem.pgm", split))
        return rows

    entries = [e for rows in _map(one, _inputs(a)) for e in rows]
    dataio.write_manifest(out / "manifest.csv", dataio.CorpusManifest(tuple(entries)))
    print(f"wrote {len(entries)} crops to {out}")


def cmd_layerize(a):
    if a.manifest:
        if not a.out_dir:
            raise UsageError("--manifest needs --out-dir")
        m = dataio.read_manifest(a.manifest)
        todo = [(m.resolve(e.semantic), Path(a.out_dir) / (Path(e.semantic).stem + ".csv"))
                for e in m if e.semantic]
    elif a.input and a.out:
        todo = [(Path(a.input), Path(a.out))]
    else:
        raise UsageError("give --input/--out or --manifest/--out-dir")

    def one(item):
        src, dst = item
        dataio.write_layers_csv(dst, layerize.semantic_to_layers(dataio.read_pgm(src, "semantic")))

    _map(one, todo)


def cmd_thickness(a):
    rep = layerize.mean_thickness(dataio.read_pgm(a.input, "semantic"), a.resolution_cm)
    vals = layerize.thickness_cm(rep) if a.units == "cm" else rep.per_layer
    lines = [f"layer_id,thickness_{a.units}"] + [f"{k},{fmt(v)}" for k, v in vals.items()]
    _emit(a.out, "\n".join(lines) + "\n")


def _eval_pairs(a):
    if a.manifest:
        if not a.pred_dir:
            raise UsageError("--manifest needs --pred-dir")
        m = dataio.read_manifest(a.manifest)
        items = [(Path(a.pred_dir) / Path(e.image).name, m.resolve(e.semantic))
                 for e in m if e.semantic and (a.split is None or e.split == a.split)]
    elif a.pred and a.gt:
        items = [(Path(a.pred), Path(a.gt))]
    else:
        raise UsageError("give --pred/--gt or --manifest/--pred-dir")
    return _map(lambda it: (dataio.read_pgm(it[0], "semantic"), dataio.read_pgm(it[1], "semantic")), items)


def cmd_evaluate(a):
    pairs = _eval_pairs(a)
    summary, per_image = metrics.evaluate_corpus(pairs, min_layers=a.min_layers, top_n=a.top_n,
                                                 num_classes=a.num_classes)
    extra = {"thickness_mae_cm": summary.thickness_mae_px * a.resolution_cm} if a.units == "cm" else None
    text = dataio.dumps_report_json(per_image, summary=summary, extra=extra)
    if a.out:
        dataio.atomic_write(a.out, text)
    mae = summary.thickness_mae_px * (a.resolution_cm if a.units == "cm" else 1.0)
    print(f"images={len(per_image)} accuracy={summary.accuracy:.6f} mean_iou={summary.mean_iou:.6f} "
          f"thickness_mae={mae:.6f}{a.units}")


def _schedule_params(a):
    p = {"base_lr": a.base_lr}
    if a.policy == "poly":
        p["power"] = a.power
    else:
        p.update(warmup_fraction=a.warmup, shape=a.shape)
    return p


def schedule_csv(policy, steps, **params) -> str:
    lines = ["step,fraction,lr,momentum"]
    for pt in sched.tabulate(policy, steps, **params):
        lines.append(f"{pt.step},{fmt(pt.fraction)},{fmt(pt.learning_rate)},{fmt(pt.momentum)}")
    return "\n".join(lines) + "\n"


def cmd_schedule(a):
    _emit(a.out, schedule_csv(a.policy, a.steps, **_schedule_params(a)))


def _training_pairs(m, split):
    pairs = []
    for e in m:
        if e.semantic and (split is None or e.split == split):
            pairs.append((dataio.read_pgm(m.resolve(e.image)), dataio.read_pgm(m.resolve(e.semantic), "semantic")))
    if not pairs:
        raise ValueError("manifest has no entries with semantic labels for this split")
    return pairs


def cmd_train(a):
    corpus = _training_pairs(dataio.read_manifest(a.manifest), a.split)
    cfg = tinyseg.TrainConfig(base_lr=a.base_lr, weight_decay=a.weight_decay, momentum=a.momentum,
                              batch_size=a.batch_size, epochs=a.epochs, scheduler=a.scheduler,
                              seed=a.seed, ignore_background=a.ignore_background, max_steps=a.max_steps)
    net = tinyseg.init(a.num_classes, a.seed)
    log = []
    net, hist = tinyseg.train(net, corpus, cfg, log=lambda *row: log.append(row))
    tinyseg.save_weights(net, a.out)
    if a.loss_log:
        lines = ["step,loss,lr,momentum"] + [",".join([str(s)] + [fmt(v) for v in rest]) for s, *rest in log]
        dataio.atomic_write(a.loss_log, "\n".join(lines) + "\n")
    print(f"trained {len(hist)} steps, loss {hist[0]:.4f} -> {hist[-1]:.4f}")


def cmd_predict(a):
    net = tinyseg.load_weights(a.weights)
    if a.manifest:
        if not a.out_dir:
            raise UsageError("--manifest needs --out-dir")
        m = dataio.read_manifest(a.manifest)
        todo = [(m.resolve(e.image), Path(a.out_dir) / Path(e.image).name) for e in m]
    elif a.image and a.out:
        todo = [(Path(a.image), Path(a.out))]
    else:
        raise UsageError("give --image/--out or --manifest/--out-dir")
    _map(lambda it: dataio.write_pgm(it[1], tinyseg.predict(net, dataio.read_pgm(it[0]))), todo)


def _coord(v) -> str:
    return np.format_float_positional(float(v), precision=3, trim="-")


def svg_polylines(series, width, height, stroke="black") -> str:
    """Minimal static SVG with one polyline per series of (x, y) points."""
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    for pts in series:
        coords = " ".join(f"{_coord(x)},{_coord(y)}" for x, y in pts)
        out.append(f'  <polyline fill="none" stroke="{stroke}" stroke-width="1" points="{coords}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def overlay_rows(m: LayerMap):
    """(layer_id, col, row) for every defined point, layer by layer."""
    for lid in m.ids:
        rows = m.rows(lid)
        for col in np.flatnonzero(rows != MISSING):
            yield lid, int(col), int(rows[col])


def cmd_plot_data(a):
    svg = str(a.out or "").endswith(".svg")
    if a.kind == "schedule":
        pts = sched.tabulate(a.policy, a.steps, **_schedule_params(a))
        if svg:
            h = 200
            top = max(p.learning_rate for p in pts) or 1.0
            lr = [(p.fraction * 400, h - h * p.learning_rate / top) for p in pts]
            mom = [(p.fraction * 400, h - h * p.momentum) for p in pts]
            _emit(a.out, svg_polylines([lr, mom], 400, h))
        else:
            _emit(a.out, schedule_csv(a.policy, a.steps, **_schedule_params(a)))
    elif a.kind == "thickness-per-layer":
        if not a.input:
            raise UsageError("thickness-per-layer needs --input semantic.pgm")
        sem = dataio.read_pgm(a.input, "semantic")
        rep = layerize.mean_thickness(sem, a.resolution_cm)
        if svg:
            bars = [[(i * 20 + 5, 200), (i * 20 + 5, 200 - t)] for i, t in enumerate(rep.per_layer.values())]
            _emit(a.out, svg_polylines(bars, 20 * max(len(bars), 1) + 10, 200))
        else:
            lines = ["layer_id,thickness_px,thickness_cm"]
            cm = layerize.thickness_cm(rep)
            lines += [f"{k},{fmt(v)},{fmt(cm[k])}" for k, v in rep.per_layer.items()]
            _emit(a.out, "\n".join(lines) + "\n")
    elif a.kind == "layer-overlay":
        if not a.input:
            raise UsageError("layer-overlay needs --input layers.csv")
        m = dataio.read_layers_csv(a.input)
        if svg:
            series = [[(c, r) for lid, c, r in overlay_rows(m.subset([k]))] for k in m.ids]
            height = max((r for _, _, r in overlay_rows(m)), default=0) + 1
            _emit(a.out, svg_polylines(series, m.width, height))
        else:
            lines = ["layer_id,x,y"] + [f"{l},{c},{r}" for l, c, r in overlay_rows(m)]
            _emit(a.out, "\n".join(lines) + "\n")


def _emit(path, text):
    if path:
        dataio.atomic_write(path, text)
    else:
        sys.stdout.write(text)


# -- parser ------------------------------------------------------------------

def _add_schedule_flags(p):
    p.add_argument("--policy", choices=sched.POLICIES, default="poly")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--base-lr", type=float, default=0.01)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--warmup", type=float, default=0.3)
    p.add_argument("--shape", choices=("linear", "cosine"), default="linear")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="layerkit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--num-layers", type=int, default=12)
    p.add_argument("--spacing", type=float, default=14.0)
    p.add_argument("--jitter", type=float, default=0.2)
    p.add_argument("--undulation", type=float, default=4.0)
    p.add_argument("--wavelength", type=float, default=200.0)
    p.add_argument("--contrast-decay", type=float, default=0.9)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--perturbation", type=float, default=0.02)
    p.add_argument("--dropout", type=float, default=0.3)
    p.add_argument("--split", choices=dataio.SPLITS, default="train")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("preprocess", help="clean annotations and emit cropped training pairs")
    p.add_argument("--manifest")
    p.add_argument("--image")
    p.add_argument("--layers")
    p.add_argument("--split", choices=dataio.SPLITS, default="train")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("layerize", help="semantic map(s) -> layer CSV")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.add_argument("--out-dir")
    p.set_defaults(fn=cmd_layerize)

    p = sub.add_parser("thickness", help="mean thickness per layer of a semantic map")
    p.add_argument("--input", required=True)
    p.add_argument("--units", choices=("px", "cm"), default="px")
    p.add_argument("--resolution-cm", type=float, default=4.0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_thickness)

    p = sub.add_parser("evaluate", help="accuracy, mean IoU and thickness MAE")
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--manifest")
    p.add_argument("--pred-dir")
    p.add_argument("--split", choices=dataio.SPLITS)
    p.add_argument("--min-layers", type=int)
    p.add_argument("--top-n", type=int)
    p.add_argument("--num-classes", type=int, help="score a fixed class universe instead of classes in the ground truth")
    p.add_argument("--units", choices=("px", "cm"), default="px")
    p.add_argument("--resolution-cm", type=float, default=4.0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("schedule", help="tabulate a learning-rate policy as CSV")
    _add_schedule_flags(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_schedule)

    p = sub.add_parser("train", help="train the toy segmentation network")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=dataio.SPLITS, default="train")
    p.add_argument("--out", required=True)
    p.add_argument("--num-classes", type=int, default=NUM_CLASSES)
    p.add_argument("--base-lr", type=float, default=0.01)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--scheduler", choices=sched.POLICIES, default="poly")
    p.add_argument("--ignore-background", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-log")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="run a trained network over images")
    p.add_argument("--weights", required=True)
    p.add_argument("--image")
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.add_argument("--out-dir")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("plot-data", help="CSV/SVG data for schedule, thickness and overlay plots")
    p.add_argument("--kind", required=True, choices=("schedule", "thickness-per-layer", "layer-overlay"))
    p.add_argument("--input")
    p.add_argument("--out", help="output path; .svg writes a drawing, anything else CSV")
    p.add_argument("--resolution-cm", type=float, default=4.0)
    _add_schedule_flags(p)
    p.set_defaults(fn=cmd_plot_data)
    return ap


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.fn(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
