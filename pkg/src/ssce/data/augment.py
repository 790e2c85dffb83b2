"""Training-time augmentation: random horizontal flips and small rotations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class AugmentConfig:
    hflip: bool = True
    rotate_deg: float = 10.0

    def __post_init__(self):
        if self.rotate_deg < 0:
            raise ValueError(f"rotate_deg must be non-negative, got {self.rotate_deg}")

    @property
    def enabled(self) -> bool:
        return self.hflip or self.rotate_deg > 0


def hflip(images: np.ndarray) -> np.ndarray:
    return images[..., ::-1]


def rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """Bilinear rotation of a (C, H, W) image about its centre, edge-replicate fill."""
    if degrees == 0.0:
        return image.copy()
    return ndimage.rotate(image, degrees, axes=(2, 1), reshape=False, order=1, mode="nearest")


def augment(images: np.ndarray, config: AugmentConfig, rng: np.random.Generator, force_flip: bool | None = None):
    """Independently flip (p=0.5) and rotate (uniform in +-rotate_deg) each image.

    ``force_flip`` overrides the coin toss (True flips every image).
    """
    images = np.asarray(images, dtype=np.float64)
    if not config.enabled and force_flip is None:
        return images.copy()
    out = np.empty_like(images)
    for i, img in enumerate(images):
        flip = rng.random() < 0.5 if force_flip is None else force_flip
        if config.hflip or force_flip is not None:
            img = hflip(img) if flip else img
        if config.rotate_deg > 0:
            img = rotate(img, rng.uniform(-config.rotate_deg, config.rotate_deg))
        out[i] = img
    return out
