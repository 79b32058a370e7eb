"""Random instance builders and brute-force oracles shared by the tests.

The oracles deliberately use plain Python loops over pixels/columns so they
stay independent of the vectorised code they check.
"""
import numpy as np

from layerkit import LayerMap, Radargram, SemanticMap, crop, crop_box
from layerkit.labelproc import ConsecutiveSet

MISSING = -1


def random_stack(rng, width, height, ids):
    """Complete, strictly stacked layers: distinct sorted rows per column."""
    ids = sorted(ids)
    rows = np.empty((len(ids), width), dtype=np.int64)
    for col in range(width):
        rows[:, col] = np.sort(rng.choice(height, size=len(ids), replace=False))
    return LayerMap(width, dict(zip(ids, rows)))


def random_image(rng, height, width):
    return Radargram(rng.integers(0, 256, (height, width), dtype=np.uint8))


def random_crop(rng, max_layers=6, max_width=24, max_height=60):
    n = int(rng.integers(2, max_layers + 1))
    width = int(rng.integers(1, max_width + 1))
    height = int(rng.integers(n + 1, max_height + 1))
    first = int(rng.integers(1, 200))
    ids = list(range(first, first + n))
    m = random_stack(rng, width, height, ids)
    s = ConsecutiveSet(tuple(ids))
    box = crop_box(s, m, height, width)
    return crop(random_image(rng, height, width), m, box, s)


def pairwise_crossings(m):
    """Every (a, b, col) with a < b both defined and row_a >= row_b."""
    out = []
    ids = sorted(m.ids)
    for col in range(m.width):
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                ra, rb = int(m.rows(a)[col]), int(m.rows(b)[col])
                if ra != MISSING and rb != MISSING and ra >= rb:
                    out.append((a, b, col))
    return out


def gap_free_ids(m):
    return [lid for lid in m.ids if all(int(r) != MISSING for r in m.rows(lid))]


def group_runs(ids):
    """Brute force: for each id, walk forward while the next id exists."""
    ids = sorted(set(ids))
    out, i = [], 0
    while i < len(ids):
        j = i
        while j + 1 < len(ids) and ids[j + 1] == ids[j] + 1:
            j += 1
        if j > i:
            out.append(tuple(ids[i:j + 1]))
        i = j + 1
    return out


def fill_oracle(layers, height):
    """Per pixel: id of the deepest layer whose row is at or above it, else 0."""
    grid = [[0] * layers.width for _ in range(height)]
    for col in range(layers.width):
        for row in range(height):
            label = 0
            for lid in sorted(layers.ids):
                if int(layers.rows(lid)[col]) <= row:
                    label = lid
            grid[row][col] = label
    return np.array(grid, dtype=np.uint8)


def histogram_thickness(classes):
    counts = {}
    h, w = classes.shape
    for r in range(h):
        for c in range(w):
            v = int(classes[r, c])
            if v:
                counts[v] = counts.get(v, 0) + 1
    return {k: n / w for k, n in counts.items()}


def brute_confusion(pred, gt, classes):
    out = {c: [0, 0, 0, 0] for c in classes}
    h, w = gt.shape
    for r in range(h):
        for col in range(w):
            p, g = int(pred[r, col]), int(gt[r, col])
            for c in classes:
                if p == c and g == c:
                    out[c][0] += 1
                elif p == c:
                    out[c][2] += 1
                elif g == c:
                    out[c][3] += 1
                else:
                    out[c][1] += 1
    return {c: tuple(v) for c, v in out.items()}


def brute_accuracy(pred, gt, classes):
    cc = brute_confusion(pred, gt, classes)
    return sum((tp + tn) / (tp + tn + fp + fn) for tp, tn, fp, fn in cc.values()) / len(classes)


def brute_mean_iou(pred, gt, classes):
    """Intersection / union of explicit pixel-coordinate sets."""
    ious = []
    for c in classes:
        ps = {(r, k) for r, k in zip(*np.nonzero(pred == c))}
        gs = {(r, k) for r, k in zip(*np.nonzero(gt == c))}
        union = ps | gs
        if union:
            ious.append(len(ps & gs) / len(union))
    return sum(ious) / len(ious)


def brute_mae(pred, gt):
    p, t = histogram_thickness(pred), histogram_thickness(gt)
    return sum(abs(p.get(k, 0.0) - v) for k, v in t.items()) / len(t)


def random_semantic_pair(rng, h=64, w=64, max_class=27):
    """A layered ground truth plus a noisy prediction of it."""
    n = int(rng.integers(1, 8))
    ids = sorted(rng.choice(np.arange(1, max_class + 1), size=n, replace=False))
    gt = np.zeros((h, w), dtype=np.uint8)
    bounds = np.sort(rng.choice(np.arange(1, h), size=n, replace=False))
    for lid, b in zip(ids, bounds):
        gt[b:, :] = lid
    pred = gt.copy()
    flip = rng.random((h, w)) < rng.uniform(0, 0.5)
    pred[flip] = rng.integers(0, max_class + 1, int(flip.sum()))
    return SemanticMap(pred), SemanticMap(gt)


def cross_entropy_oracle(scores, target, mask=None):
    """Mean -log softmax at the target class, evaluated in float64 pixel by pixel."""
    scores = np.asarray(scores, dtype=np.float64)
    _, h, w = scores.shape
    total, n = 0.0, 0
    for r in range(h):
        for c in range(w):
            if mask is not None and not mask[r, c]:
                continue
            col = scores[:, r, c]
            m = col.max()
            total += -(col[target[r, c]] - m - np.log(np.exp(col - m).sum()))
            n += 1
    return total / n


def finite_difference_grads(net, image, target, step=1e-5, ignore_background=False):
    """Central differences of the loss with respect to every parameter (float64).

    The step stays well below typical ReLU pre-activation magnitudes; at 1e-3 a
    perturbation can carry a unit across the kink and the difference quotient
    stops measuring the local slope.
    """
    from layerkit import tinyseg

    net = net.astype(np.float64)
    mask = target.classes != 0 if ignore_background else None
    t = target.classes.astype(int)

    def loss():
        return cross_entropy_oracle(tinyseg.forward(net, image), t, mask)

    out = {}
    for name, w in net.params.items():
        g = np.zeros_like(w)
        flat, gf = w.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = loss()
            flat[i] = old - step
            down = loss()
            flat[i] = old
            gf[i] = (up - down) / (2 * step)
        out[name] = g
    return out


def max_relative_error(analytic, numeric):
    """Worst entry error, relative to the tensor's largest magnitude."""
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)
