"""A three-layer fully convolutional per-pixel classifier written directly in numpy.

Architecture: 3x3 conv (1 -> 8) + ReLU, 3x3 conv (8 -> 16) + ReLU, 1x1 conv
(16 -> num_classes). All convolutions are zero-padded so the score grid has
the input's height and width. Intensities are scaled to [0, 1] before the
first layer.

Weights are drawn from U(-sqrt(6 / fan_in), sqrt(6 / fan_in)) with a
``numpy.random.Generator(PCG64(seed))``, in parameter declaration order.
Biases start at zero.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import sched
from .core import BACKGROUND, NUM_CLASSES, Radargram, SemanticMap

HIDDEN = (8, 16)
MAGIC = b"TSEG1"


def param_shapes(num_classes: int) -> dict:
    c1, c2 = HIDDEN
    return {
        "conv1.weight": (c1, 1, 3, 3),
        "conv1.bias": (c1,),
        "conv2.weight": (c2, c1, 3, 3),
        "conv2.bias": (c2,),
        "conv3.weight": (num_classes, c2, 1, 1),
        "conv3.bias": (num_classes,),
    }


@dataclass
class TinyNet:
    params: dict

    @property
    def num_classes(self) -> int:
        return self.params["conv3.bias"].shape[0]

    @property
    def dtype(self):
        return self.params["conv1.weight"].dtype

    def astype(self, dtype) -> "TinyNet":
        return TinyNet({k: v.astype(dtype) for k, v in self.params.items()})

    def copy(self) -> "TinyNet":
        return self.astype(self.dtype)


@dataclass
class TrainConfig:
    base_lr: float = 0.01
    weight_decay: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 8
    epochs: int = 200
    scheduler: str = "poly"
    seed: int = 0
    ignore_background: bool = False
    max_steps: Optional[int] = None
    schedule_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.base_lr <= 0 or self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise ValueError("invalid optimizer rates")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        sched.policy(self.scheduler)


def init(num_classes: int = NUM_CLASSES, seed: int = 0, dtype=np.float32) -> TinyNet:
    if num_classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.Generator(np.random.PCG64(seed))
    params = {}
    for name, shape in param_shapes(num_classes).items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            limit = math.sqrt(6.0 / int(np.prod(shape[1:])))
            params[name] = rng.uniform(-limit, limit, shape).astype(dtype)
    return TinyNet(params)


def _as_input(image, dtype) -> np.ndarray:
    px = image.pixels if isinstance(image, Radargram) else np.asarray(image)
    return (px.astype(dtype) / dtype.type(255.0))[None]


def _conv3(x, w, b):
    win = sliding_window_view(np.pad(x, ((0, 0), (1, 1), (1, 1))), (3, 3), axis=(1, 2))
    return np.tensordot(w, win, axes=([1, 2, 3], [0, 3, 4])) + b[:, None, None], win


def _conv3_backward_input(dout, w):
    _, h, wd = dout.shape
    dxp = np.zeros((w.shape[1], h + 2, wd + 2), dtype=dout.dtype)
    for i in range(3):
        for j in range(3):
            dxp[:, i:i + h, j:j + wd] += np.tensordot(w[:, :, i, j], dout, axes=([0], [0]))
    return dxp[:, 1:-1, 1:-1]


def _forward(net: TinyNet, image):
    p = net.params
    x = _as_input(image, net.dtype)
    z1, win1 = _conv3(x, p["conv1.weight"], p["conv1.bias"])
    a1 = np.maximum(z1, 0)
    z2, win2 = _conv3(a1, p["conv2.weight"], p["conv2.bias"])
    a2 = np.maximum(z2, 0)
    scores = np.tensordot(p["conv3.weight"][:, :, 0, 0], a2, axes=([1], [0])) + p["conv3.bias"][:, None, None]
    return scores, (win1, z1, win2, z2, a2)


def forward(net: TinyNet, image) -> np.ndarray:
    """Class scores of shape ``(num_classes, height, width)``."""
    return _forward(net, image)[0]


def softmax(scores: np.ndarray) -> np.ndarray:
    e = np.exp(scores - scores.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def _loss_grad_sum(net: TinyNet, image, target: SemanticMap, ignore_background: bool):
    """Summed (not averaged) loss and gradients, plus the number of counted pixels."""
    t = target.classes.astype(np.intp)
    scores, (win1, z1, win2, z2, a2) = _forward(net, image)
    if scores.shape[1:] != t.shape:
        raise ValueError(f"target shape {t.shape} != image shape {scores.shape[1:]}")
    if t.max() >= net.num_classes:
        raise ValueError(f"target class {t.max()} exceeds network's {net.num_classes} classes")
    mask = t != BACKGROUND if ignore_background else np.ones(t.shape, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("no pixels counted in the loss")

    shifted = scores - scores.max(axis=0, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=0))
    rr, cc = np.indices(t.shape)
    logp_true = shifted[t, rr, cc] - logz
    loss = float(-logp_true[mask].sum(dtype=np.float64))

    d = np.exp(shifted - logz)  # softmax
    d[t, rr, cc] -= 1
    d *= mask

    p = net.params
    g = {}
    g["conv3.weight"] = np.tensordot(d, a2, axes=([1, 2], [1, 2]))[:, :, None, None]
    g["conv3.bias"] = d.sum(axis=(1, 2))
    da2 = np.tensordot(p["conv3.weight"][:, :, 0, 0], d, axes=([0], [0]))
    dz2 = da2 * (z2 > 0)
    g["conv2.weight"] = np.tensordot(dz2, win2, axes=([1, 2], [1, 2]))
    g["conv2.bias"] = dz2.sum(axis=(1, 2))
    dz1 = _conv3_backward_input(dz2, p["conv2.weight"]) * (z1 > 0)
    g["conv1.weight"] = np.tensordot(dz1, win1, axes=([1, 2], [1, 2]))
    g["conv1.bias"] = dz1.sum(axis=(1, 2))
    return loss, {k: g[k] for k in p}, n


def loss_and_grad(net: TinyNet, image, target: SemanticMap, ignore_background: bool = False):
    """Mean per-pixel cross-entropy and its gradient for every parameter."""
    loss, g, n = _loss_grad_sum(net, image, target, ignore_background)
    return loss / n, {k: v / v.dtype.type(n) for k, v in g.items()}


def batch_loss_and_grad(net: TinyNet, batch: Sequence, ignore_background: bool = False):
    """Cross-entropy averaged over every counted pixel of the batch, summed in list order."""
    total, grads, count = 0.0, None, 0
    for image, target in batch:
        loss, g, n = _loss_grad_sum(net, image, target, ignore_background)
        total += loss
        count += n
        grads = g if grads is None else {k: grads[k] + g[k] for k in grads}
    return total / count, {k: v / v.dtype.type(count) for k, v in grads.items()}


def sgd_step(net: TinyNet, grads: dict, lr: float, momentum: float, weight_decay: float,
             state: Optional[dict] = None):
    """One momentum-SGD update; returns ``(new_net, new_state)``. Biases skip weight decay."""
    state = state or {}
    params, vel = {}, {}
    for name, w in net.params.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {w.shape}")
        if not name.endswith(".bias"):
            g = g + weight_decay * w
        v = momentum * state.get(name, np.zeros_like(w)) - lr * g
        vel[name] = v.astype(w.dtype)
        params[name] = (w + v).astype(w.dtype)
    return TinyNet(params), vel


def _fingerprint(item) -> bytes:
    image, target = item
    px = image.pixels if isinstance(image, Radargram) else np.asarray(image)
    h = hashlib.sha256()
    for a in (px, target.classes):
        h.update(np.asarray(a.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(a).tobytes())
    return h.digest()


def train(net: TinyNet, corpus: Sequence, cfg: TrainConfig, log=None):
    """Mini-batch training. Returns ``(trained_net, loss_history)``.

    The corpus is put in a content-hash order before the seeded per-epoch
    shuffles, so the result does not depend on the order it was passed in.
    """
    if not corpus:
        raise ValueError("empty corpus")
    items = sorted(corpus, key=_fingerprint)
    per_epoch = math.ceil(len(items) / cfg.batch_size)
    total = cfg.epochs * per_epoch
    if cfg.max_steps is not None:
        total = min(total, cfg.max_steps)
    policy = sched.policy(cfg.scheduler)
    params = dict(cfg.schedule_params)
    params.setdefault("base_lr", cfg.base_lr)
    if cfg.scheduler == "poly":
        params.setdefault("momentum", cfg.momentum)
    else:
        params.setdefault("m_high", cfg.momentum)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    state, history, step = None, [], 0
    while step < total:
        order = rng.permutation(len(items))
        for start in range(0, len(items), cfg.batch_size):
            if step >= total:
                break
            batch = [items[i] for i in order[start:start + cfg.batch_size]]
            loss, grads = batch_loss_and_grad(net, batch, cfg.ignore_background)
            lr, mom = policy(sched.step_fraction(step, total), **params)
            net, state = sgd_step(net, grads, lr, mom, cfg.weight_decay, state)
            history.append(loss)
            if log is not None:
                log(step, loss, lr, mom)
            step += 1
    return net, history


def predict(net: TinyNet, image) -> SemanticMap:
    """Per-pixel argmax; ties go to the smaller class id."""
    return SemanticMap(np.argmax(forward(net, image), axis=0).astype(np.uint8))


def dumps_weights(net: TinyNet) -> bytes:
    head = [MAGIC.decode()]
    for name, w in net.params.items():
        head.append(" ".join([name, *map(str, w.shape)]))
    body = b"".join(np.ascontiguousarray(w, dtype="<f4").tobytes() for w in net.params.values())
    return ("\n".join(head) + "\n\n").encode("ascii") + body


def loads_weights(data: bytes) -> TinyNet:
    sep = data.find(b"\n\n")
    if not data.startswith(MAGIC + b"\n") or sep < 0:
        raise ValueError("not a TSEG1 weights file")
    lines = data[:sep].decode("ascii").split("\n")[1:]
    offset = sep + 2
    params = {}
    for lineno, line in enumerate(lines, start=2):
        name, *dims = line.split()
        shape = tuple(int(d) for d in dims)
        nbytes = 4 * int(np.prod(shape))
        if offset + nbytes > len(data):
            raise ValueError(f"line {lineno}: tensor {name} truncated at byte {len(data)}")
        params[name] = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=offset) \
            .reshape(shape).astype(np.float32)
        offset += nbytes
    if offset != len(data):
        raise ValueError(f"{len(data) - offset} trailing bytes after last tensor")
    expected = param_shapes(params.get("conv3.bias", np.zeros(0)).shape[0] or NUM_CLASSES)
    if {k: v.shape for k, v in params.items()} != expected:
        raise ValueError("tensor names or shapes do not match the TinyNet layout")
    return TinyNet(params)


def save_weights(net: TinyNet, path) -> None:
    from .dataio import atomic_write
    atomic_write(path, dumps_weights(net))


def load_weights(path) -> TinyNet:
    with open(path, "rb") as f:
        return loads_weights(f.read())
