"""Seeded synthetic radargrams with ground-truth and degraded layer annotations.

Random numbers come from ``numpy.random.Generator(PCG64(seed))`` and are drawn
in this fixed order, so a corpus is reproducible from its config alone:

1. ``num_layers`` uniforms in [-1, 1) for the spacing jitter,
2. 3 uniforms in [0, 2*pi) for the undulation phases,
3. a ``height x width`` grid of uniforms in [-1, 1) for speckle,
4. ``width`` uniforms in [0, 1) deciding which columns get a streak, then
   ``width`` uniforms in [-1, 1) for the streak gains,
5. for every layer: one uniform in [0, 1) for dropout, then (only if dropped)
   an integer span length in [1, width // 2] and an integer start column in
   [0, width - length].

Image model, per pixel::

    background = background_level * exp(-depth_attenuation * row / height)
    band_i     = peak_intensity * contrast_decay**i * exp(-(row - curve_i)**2 / (2 * band_width_px**2))
    value      = (background + sum_i band_i) * (1 + noise_level * speckle) * streak_gain
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import MISSING, LayerMap, Radargram

UNDULATION_WEIGHTS = (0.6, 0.3, 0.1)


@dataclass(frozen=True)
class SynthConfig:
    height: int = 256
    width: int = 256
    num_layers: int = 12
    mean_spacing_px: float = 14.0
    spacing_jitter: float = 0.2
    undulation_amplitude_px: float = 4.0
    undulation_wavelength_px: float = 200.0
    contrast_decay: float = 0.9
    noise_level: float = 0.3
    perturbation_rate: float = 0.02
    annotation_dropout: float = 0.3
    seed: int = 0
    background_level: float = 60.0
    depth_attenuation: float = 1.0
    peak_intensity: float = 180.0
    band_width_px: float = 1.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.num_layers < 1:
            raise ValueError("height, width and num_layers must be positive")
        if self.mean_spacing_px <= 0 or self.undulation_wavelength_px <= 0 or self.band_width_px <= 0:
            raise ValueError("spacing, wavelength and band width must be positive")
        if min(self.spacing_jitter, self.undulation_amplitude_px, self.noise_level,
               self.depth_attenuation, self.background_level, self.peak_intensity) < 0:
            raise ValueError("negative knob in SynthConfig")
        if not 0 <= self.contrast_decay <= 1 or not 0 <= self.perturbation_rate <= 1:
            raise ValueError("contrast_decay and perturbation_rate must lie in [0, 1]")
        if not 0 <= self.annotation_dropout < 1:
            raise ValueError("annotation_dropout must lie in [0, 1)")
        if self.num_layers * self.mean_spacing_px >= self.height:
            raise ValueError("layers do not fit in the image height")


def _curves(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    jitter = rng.uniform(-1.0, 1.0, cfg.num_layers)
    phases = rng.uniform(0.0, 2 * math.pi, 3)
    spacing = np.maximum(cfg.mean_spacing_px * (1.0 + cfg.spacing_jitter * jitter), 2.0)
    offsets = np.concatenate([[0.0], np.cumsum(spacing[1:])])
    x = np.arange(cfg.width)
    und = np.zeros(cfg.width)
    for k, (w, ph) in enumerate(zip(UNDULATION_WEIGHTS, phases), start=1):
        und += w * np.sin(2 * math.pi * k * x / cfg.undulation_wavelength_px + ph)
    und *= cfg.undulation_amplitude_px
    amp = cfg.undulation_amplitude_px
    extent = offsets[-1] + 2 * amp + 1
    if extent > cfg.height:
        raise ValueError(f"layer stack spans {extent:.1f} rows, image has {cfg.height}")
    top = amp + min(float(spacing[0]), cfg.height - extent)
    # offsets differ by >= 2 so rounding keeps rows strictly increasing
    return np.round(top + offsets[:, None] + und[None, :]).astype(np.int64)


def _render(cfg: SynthConfig, curves: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    rows = np.arange(cfg.height, dtype=float)[:, None]
    img = np.repeat(cfg.background_level * np.exp(-cfg.depth_attenuation * rows / cfg.height),
                    cfg.width, axis=1)
    for i, curve in enumerate(curves):
        a = cfg.peak_intensity * cfg.contrast_decay ** i
        img += a * np.exp(-((rows - curve[None, :]) ** 2) / (2 * cfg.band_width_px ** 2))
    img *= 1.0 + cfg.noise_level * rng.uniform(-1.0, 1.0, img.shape)
    streak = rng.uniform(0.0, 1.0, cfg.width) < cfg.perturbation_rate
    gain = 1.0 + 0.5 * rng.uniform(-1.0, 1.0, cfg.width)
    img[:, streak] *= gain[streak]
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def _degrade(cfg: SynthConfig, curves: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = curves.copy()
    for i in range(len(out)):
        if rng.uniform() < cfg.annotation_dropout:
            length = int(rng.integers(1, max(cfg.width // 2, 1), endpoint=True))
            start = int(rng.integers(0, cfg.width - length, endpoint=True))
            out[i, start:start + length] = MISSING
    return out


def generate(cfg: SynthConfig) -> tuple[Radargram, LayerMap, LayerMap]:
    """Return ``(image, full_annotation, degraded_annotation)``; layer ids start at 1."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    curves = _curves(cfg, rng)
    image = Radargram(_render(cfg, curves, rng))
    degraded = _degrade(cfg, curves, rng)
    ids = range(1, cfg.num_layers + 1)
    full = LayerMap(cfg.width, dict(zip(ids, curves)))
    return image, full, LayerMap(cfg.width, dict(zip(ids, degraded)))


def generate_corpus(cfg: SynthConfig, count: int) -> list[tuple[Radargram, LayerMap, LayerMap]]:
    if count < 1:
        raise ValueError("count must be at least 1")
    return [generate(replace(cfg, seed=cfg.seed + i)) for i in range(count)]


def gapped_annotation(width: int = 64, spacing: int = 12, seed: int = 0) -> tuple[Radargram, LayerMap]:
    """Image plus an annotation labelled 2,3,5..14,18,19,20 where layer 12 stops short.

    Handy fixture for the label-cleaning pipeline: it should yield the sets
    {2,3}, {5..11}, {13,14} and {18,19,20}.
    """
    ids = [2, 3, *range(5, 15), 18, 19, 20]
    height = spacing * 22
    x = np.arange(width)
    wiggle = np.round(2 * np.sin(2 * math.pi * x / width)).astype(np.int64)
    layers = {lid: spacing * lid + wiggle for lid in ids}
    layers[12] = layers[12].copy()
    layers[12][width // 2:] = MISSING
    cfg = SynthConfig(height=height, width=width, num_layers=20, mean_spacing_px=float(spacing),
                      spacing_jitter=0.0, undulation_amplitude_px=0.0, annotation_dropout=0.0,
                      perturbation_rate=0.0, seed=seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    curves = np.stack([spacing * lid + wiggle for lid in range(1, 21)])
    image = Radargram(_render(cfg, curves, rng))
    return image, LayerMap(width, layers)
