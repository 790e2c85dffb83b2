"""Reading class-per-directory image trees and writing images back out."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .dataset import DatasetError, LabeledDataset

log = logging.getLogger(__name__)

EXTENSIONS = (".png", ".pgm", ".ppm")


def _load(path: Path, resolution: int, channels: int) -> np.ndarray:
    with Image.open(path) as im:
        im = im.convert("L" if channels == 1 else "RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    planes = [arr] if channels == 1 else [arr[..., i] for i in range(3)]
    out = []
    for plane in planes:
        if plane.shape != (resolution, resolution):
            plane = np.asarray(
                Image.fromarray(plane.astype(np.float32), mode="F").resize(
                    (resolution, resolution), Image.BILINEAR
                ),
                dtype=np.float64,
            )
        out.append(np.clip(plane, 0.0, 1.0))
    return np.stack(out)


def ingest_directory(root, resolution: int, channels: int = 1, skip_undecodable: bool = False) -> LabeledDataset:
    """Load ``<root>/<class_name>/*.{png,pgm,ppm}`` into a dataset.

    Classes are ordered by directory name and files by path, so the result
    does not depend on filesystem listing order.
    """
    root = Path(root)
    if channels not in (1, 3):
        raise DatasetError(f"channels must be 1 or 3, got {channels}")
    if not root.is_dir():
        raise DatasetError(f"dataset root '{root}' is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if len(class_dirs) < 2:
        raise DatasetError(f"'{root}' must contain at least 2 class directories, found {len(class_dirs)}")
    images, labels = [], []
    for c, d in enumerate(class_dirs):
        files = sorted(p for p in d.iterdir() if p.suffix.lower() in EXTENSIONS)
        loaded = 0
        for f in files:
            try:
                images.append(_load(f, resolution, channels))
            except (UnidentifiedImageError, OSError, ValueError) as exc:
                if not skip_undecodable:
                    raise DatasetError(f"cannot decode '{f}': {exc}") from None
                log.warning("skipping undecodable image %s: %s", f, exc)
                continue
            labels.append(c)
            loaded += 1
        if loaded == 0:
            raise DatasetError(f"class directory '{d}' contains no readable images")
    return LabeledDataset(
        np.stack(images), np.array(labels), tuple(d.name for d in class_dirs), source=str(root)
    )


def to_uint8(img: np.ndarray) -> np.ndarray:
    """(C, H, W) in [0, 1] -> 8-bit array suitable for PIL."""
    arr = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    return arr[0] if arr.shape[0] == 1 else np.moveaxis(arr, 0, -1)


def write_dataset(ds: LabeledDataset, root) -> Path:
    root = Path(root)
    for c, name in enumerate(ds.class_names):
        (root / name).mkdir(parents=True, exist_ok=True)
    counters = [0] * ds.num_classes
    for img, c in zip(ds.images, ds.labels):
        Image.fromarray(to_uint8(img)).save(root / ds.class_names[c] / f"{counters[c]:05d}.png")
        counters[c] += 1
    return root


def save_grid(images: np.ndarray, path, ncols: int = 8) -> Path:
    """Tile (N, C, H, W) images in [0, 1] into one PNG."""
    images = np.asarray(images)
    n, c, h, w = images.shape
    ncols = min(ncols, n)
    nrows = -(-n // ncols)
    grid = np.zeros((c, nrows * (h + 1) + 1, ncols * (w + 1) + 1))
    for i, img in enumerate(images):
        r, q = divmod(i, ncols)
        grid[:, 1 + r * (h + 1) : 1 + r * (h + 1) + h, 1 + q * (w + 1) : 1 + q * (w + 1) + w] = img
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(grid)).save(path)
    return path
