"""Procedural datasets used by the demos and the test suite."""

from __future__ import annotations

import numpy as np

from .dataset import LabeledDataset

SHAPE_CLASSES = ("circle", "square", "triangle")


def _grid(res: int):
    y, x = np.mgrid[0:res, 0:res]
    return (x + 0.5) / res, (y + 0.5) / res


def _shape_mask(kind: str, res: int, rng: np.random.Generator) -> np.ndarray:
    x, y = _grid(res)
    cx, cy = rng.uniform(0.35, 0.65, size=2)
    r = rng.uniform(0.18, 0.3)
    if kind == "circle":
        return ((x - cx) ** 2 + (y - cy) ** 2 <= r * r).astype(float)
    if kind == "square":
        return ((np.abs(x - cx) <= r * 0.85) & (np.abs(y - cy) <= r * 0.85)).astype(float)
    # upward triangle: inside when below the apex and within the widening edges
    top, base = cy - r, cy + r
    half = (y - top) / (2 * r) * r
    return ((y >= top) & (y <= base) & (np.abs(x - cx) <= half)).astype(float)


def make_shapes(n_per_class: int = 40, resolution: int = 32, seed: int = 0) -> LabeledDataset:
    """Three classes of bright filled shapes on a noisy dark background."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c, kind in enumerate(SHAPE_CLASSES):
        for _ in range(n_per_class):
            bg = rng.uniform(0.05, 0.25)
            fg = rng.uniform(0.7, 0.95)
            mask = _shape_mask(kind, resolution, rng)
            img = bg + (fg - bg) * mask + rng.normal(0, 0.03, size=mask.shape)
            images.append(np.clip(img, 0, 1)[None])
            labels.append(c)
    return LabeledDataset(np.stack(images), np.array(labels), SHAPE_CLASSES, source=f"toy-shapes(seed={seed})")


def make_two_tone(n: int = 200, resolution: int = 16, seed: int = 0, orientation: str = "horizontal") -> np.ndarray:
    """Images split into a bright and a dark part at a random boundary; (n, 1, H, W) in [0, 1]."""
    rng = np.random.default_rng(seed)
    x, y = _grid(resolution)
    coord = y if orientation == "horizontal" else x
    out = np.empty((n, 1, resolution, resolution))
    for i in range(n):
        cut = rng.uniform(0.3, 0.7)
        hi, lo = rng.uniform(0.75, 0.95), rng.uniform(0.05, 0.25)
        img = np.where(coord < cut, hi, lo) + rng.normal(0, 0.02, size=coord.shape)
        out[i, 0] = np.clip(img, 0, 1)
    return out


def make_two_tone_classes(n_per_class: int = 100, resolution: int = 16, seed: int = 0) -> LabeledDataset:
    """Horizontal vs vertical two-tone images; used to train an embedder for two-tone GAN checks."""
    a = make_two_tone(n_per_class, resolution, seed, "horizontal")
    b = make_two_tone(n_per_class, resolution, seed + 1, "vertical")
    labels = np.repeat([0, 1], n_per_class)
    return LabeledDataset(np.concatenate([a, b]), labels, ("horizontal", "vertical"), source="toy-two-tone")


def make_bright_dark(n_per_class: int = 40, resolution: int = 32, seed: int = 0) -> LabeledDataset:
    """Linearly separable pair: bright noisy images vs dark noisy images."""
    rng = np.random.default_rng(seed)
    shape = (n_per_class, 1, resolution, resolution)
    bright = np.clip(rng.normal(0.7, 0.1, size=shape), 0, 1)
    dark = np.clip(rng.normal(0.3, 0.1, size=shape), 0, 1)
    labels = np.repeat([0, 1], n_per_class)
    return LabeledDataset(np.concatenate([bright, dark]), labels, ("bright", "dark"), source="toy-bright-dark")
