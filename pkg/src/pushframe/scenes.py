"""Deterministic synthetic scenes for sweeps and tests.

``natural_scene`` is piecewise smooth: a shaded background, overlapping
ellipses and bars with soft edges, and a little low-pass texture. The colour
scene shares that structure across bands with band-specific tints, so the bands
are correlated but not identical.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from pushframe.capture_sim.model import Image


def _grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    return np.meshgrid(np.linspace(0.0, 1.0, h), np.linspace(0.0, 1.0, w), indexing="ij")


def _shapes(h: int, w: int, rng: np.random.Generator, count: int) -> np.ndarray:
    rows, cols = _grid(h, w)
    canvas = np.zeros((h, w))
    for _ in range(count):
        level = rng.uniform(-0.35, 0.35)
        if rng.random() < 0.6:
            cy, cx = rng.uniform(0.1, 0.9, size=2)
            ry, rx = rng.uniform(0.05, 0.3, size=2)
            inside = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0
        else:
            top, left = rng.uniform(0.0, 0.8, size=2)
            height, width = rng.uniform(0.05, 0.4, size=2)
            inside = (rows >= top) & (rows <= top + height) & (cols >= left) & (cols <= left + width)
        canvas += level * inside
    return canvas


def natural_scene(h: int = 256, w: int = 256, seed: int = 7) -> Image:
    rng = np.random.default_rng(seed)
    rows, cols = _grid(h, w)
    background = 0.45 + 0.2 * np.sin(2.1 * rows + 0.7) * np.cos(1.3 * cols)
    shapes = gaussian_filter(_shapes(h, w, rng, 14), sigma=0.6)
    # Low-pass mottling, correlated over several pixels.
    texture = gaussian_filter(rng.normal(0.0, 1.0, (h, w)), sigma=4.0)
    texture *= 0.02 / max(float(texture.std()), 1e-12)
    return Image(np.clip(background + shapes + texture, 0.02, 0.98))


def colour_scene(h: int = 256, w: int = 256, seed: int = 11) -> Image:
    rng = np.random.default_rng(seed)
    luminance = natural_scene(h, w, seed).pixels
    rows, cols = _grid(h, w)
    bands = []
    for band in range(3):
        tint = 0.85 + 0.3 * np.cos(np.pi * (rows * (band + 1) / 2 + cols * (2 - band) / 2 + band / 3))
        accents = gaussian_filter(_shapes(h, w, rng, 5), sigma=0.6) * 0.5
        bands.append(np.clip(luminance * tint + accents, 0.02, 0.98))
    return Image(np.stack(bands, axis=-1))


def two_level_column(n: int, split: int, low: float = 0.2, high: float = 0.8) -> np.ndarray:
    column = np.full(n, low)
    column[split:] = high
    return column


def scene_for(kind: str, h: int, w: int, seed: int) -> Image:
    if kind == "natural":
        return natural_scene(h, w, seed)
    if kind == "colour":
        return colour_scene(h, w, seed)
    if kind == "white":
        return Image(np.ones((h, w)))
    if kind == "zero":
        return Image(np.zeros((h, w)))
    raise ValueError(f"Unknown synthetic scene '{kind}' (expected natural, colour, white or zero)")
