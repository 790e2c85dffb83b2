"""Labeled image datasets, stratified splits, extension plans and merging."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Images (N, C, H, W) in [0, 1] with class labels and provenance.

    ``synthesized[i]`` marks pseudo-labeled generator output; ``ids`` gives
    every item a stable identity (real items count up from 0, synthesized
    items count down from -1) so splits and merges can be audited.
    """

    images: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    synthesized: np.ndarray = None
    ids: np.ndarray = None
    source: str = ""

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        n = len(images)
        synth = np.zeros(n, bool) if self.synthesized is None else np.asarray(self.synthesized, bool)
        ids = np.arange(n, dtype=np.int64) if self.ids is None else np.asarray(self.ids, np.int64)
        if images.ndim != 4:
            raise DatasetError(f"images must be (N, C, H, W), got shape {images.shape}")
        if labels.shape != (n,) or synth.shape != (n,) or ids.shape != (n,):
            raise DatasetError("labels, provenance and ids must each have one entry per image")
        k = len(self.class_names)
        if k < 2:
            raise DatasetError(f"need at least 2 classes, got {k}")
        if n and (labels.min() < 0 or labels.max() >= k):
            raise DatasetError(f"labels must lie in [0, {k})")
        for name, arr in (("images", images), ("labels", labels), ("synthesized", synth), ("ids", ids)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def image_shape(self) -> tuple[int, ...]:
        return self.images.shape[1:]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def proportions(self) -> np.ndarray:
        return self.class_counts() / max(len(self), 1)

    def subset(self, index) -> LabeledDataset:
        index = np.asarray(index)
        return LabeledDataset(
            self.images[index], self.labels[index], self.class_names,
            self.synthesized[index], self.ids[index], self.source,
        )

    def of_class(self, c: int) -> LabeledDataset:
        return self.subset(np.flatnonzero(self.labels == c))

    def provenance_counts(self) -> dict[str, int]:
        n_synth = int(self.synthesized.sum())
        return {"real": len(self) - n_synth, "synthesized": n_synth}


@dataclass(frozen=True)
class SplitPair:
    train: LabeledDataset
    test: LabeledDataset
    seed: int
    ratio: float


def largest_remainder(weights, total: int) -> np.ndarray:
    """Apportion ``total`` integer units proportionally to ``weights``.

    Floors of the exact quotas first, then the remaining units go to the
    largest fractional parts (ties to the lower index). Exact rational
    arithmetic, so integer quotas are never perturbed by rounding.
    """
    w = [Fraction(int(x)) if float(x).is_integer() else Fraction(x) for x in weights]
    s = sum(w)
    if s <= 0 or total < 0:
        raise ValueError("largest_remainder: weights must have a positive sum and total must be >= 0")
    quotas = [x * total / s for x in w]
    base = [int(q) for q in quotas]
    rem = total - sum(base)
    order = sorted(range(len(w)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:rem]:
        base[i] += 1
    return np.array(base, dtype=np.int64)


def stratified_split(ds: LabeledDataset, ratio: float = 0.8, seed: int = 0) -> SplitPair:
    """Per-class seeded shuffle; floor(ratio * n_c) per class to train, then
    largest-remainder top-up until the overall train size is round(ratio * N).
    Every class keeps at least one test item.
    """
    if not 0.0 < ratio < 1.0:
        raise DatasetError(f"split ratio must lie in (0, 1), got {ratio}")
    counts = ds.class_counts()
    small = [ds.class_names[c] for c in range(ds.num_classes) if counts[c] < 2]
    if small:
        raise DatasetError(f"classes with fewer than 2 items cannot be split: {small}")
    r = Fraction(ratio).limit_denominator(10**6)
    quotas = [r * int(n) for n in counts]
    n_train = [int(q) for q in quotas]
    target = int(r * len(ds) + Fraction(1, 2))
    order = sorted(range(len(counts)), key=lambda c: (-(quotas[c] - n_train[c]), c))
    for c in order:
        if sum(n_train) >= target:
            break
        if n_train[c] < counts[c] - 1:
            n_train[c] += 1
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == c)
        perm = members[rng.permutation(len(members))]
        train_idx.append(perm[: n_train[c]])
        test_idx.append(perm[n_train[c] :])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return SplitPair(ds.subset(train_idx), ds.subset(test_idx), seed, ratio)


@dataclass(frozen=True)
class ExtensionPlan:
    """How many synthesized images each class receives for extension factor ``gamma``."""

    gamma: int
    counts: tuple[int, ...] = field(default=())

    @classmethod
    def from_base(cls, base_counts, gamma: int) -> ExtensionPlan:
        if int(gamma) != gamma or gamma < 1:
            raise ValueError(f"gamma must be a positive integer, got {gamma}")
        base_counts = np.asarray(base_counts, dtype=np.int64)
        total = int(gamma) * int(base_counts.sum())
        return cls(int(gamma), tuple(int(x) for x in largest_remainder(base_counts, total)))

    @property
    def total(self) -> int:
        return sum(self.counts)


def synthesize_pseudo_labeled(
    generators, plan: ExtensionPlan, class_names, seed: int, batch: int = 64
) -> LabeledDataset:
    """Draw ``plan.counts[c]`` images from generator ``c`` and label them ``c``.

    ``generators`` maps class index to an object with ``sample(n, rng)``
    returning images in [-1, 1]; outputs are mapped to [0, 1].
    """
    gens = dict(enumerate(generators)) if isinstance(generators, (list, tuple)) else dict(generators)
    missing = [class_names[c] for c, n in enumerate(plan.counts) if n > 0 and c not in gens]
    if missing:
        raise DatasetError(f"no generator for classes {missing}")
    ss = np.random.SeedSequence(seed)
    streams = ss.spawn(len(plan.counts))
    images, labels = [], []
    for c, n in enumerate(plan.counts):
        if n == 0:
            continue
        imgs = gens[c].sample(n, np.random.default_rng(streams[c]), batch=batch)
        images.append(np.clip((imgs + 1.0) * 0.5, 0.0, 1.0))
        labels.append(np.full(n, c))
    images = np.concatenate(images)
    n = len(images)
    return LabeledDataset(
        images, np.concatenate(labels), tuple(class_names), np.ones(n, bool),
        -np.arange(1, n + 1), f"synthesized(gamma={plan.gamma}, seed={seed})",
    )


def merge(base: LabeledDataset, extended: LabeledDataset) -> LabeledDataset:
    if base.class_names != extended.class_names:
        raise DatasetError(f"class tables differ: {base.class_names} vs {extended.class_names}")
    if base.image_shape != extended.image_shape:
        raise DatasetError(f"image shapes differ: {base.image_shape} vs {extended.image_shape}")
    return LabeledDataset(
        np.concatenate([base.images, extended.images]),
        np.concatenate([base.labels, extended.labels]),
        base.class_names,
        np.concatenate([base.synthesized, extended.synthesized]),
        np.concatenate([base.ids, extended.ids]),
        f"{base.source} + {extended.source}",
    )
