"""GAN sample quality against real data, using a trained classifier as the embedder."""

from __future__ import annotations

import numpy as np

from .scores import feature_stats, frechet_distance, inception_score


def to_unit_range(images: np.ndarray) -> np.ndarray:
    """Map generator output from [-1, 1] to [0, 1]."""
    return np.clip((np.asarray(images) + 1.0) * 0.5, 0.0, 1.0)


def evaluate_gan_quality(generator, embedder, real_images: np.ndarray, n_synth: int, seed: int,
                         real_stats=None, is_splits: int = 1) -> tuple[float, float]:
    """Return ``(FID, IS)`` of ``n_synth`` generated images.

    ``generator`` is anything with ``sample(n, rng)`` producing images in
    [-1, 1], or a plain callable ``(n, rng) -> images``. Real images are in
    [0, 1]. IS uses the embedder's own class probabilities.
    """
    if n_synth < 2:
        raise ValueError(f"evaluate_gan_quality: n_synth must be >= 2, got {n_synth}")
    rng = np.random.default_rng(seed)
    sample = generator.sample if hasattr(generator, "sample") else generator
    fake = to_unit_range(sample(n_synth, rng))
    if real_stats is None:
        real_stats = feature_stats(embedder.embed(real_images))
    fid = frechet_distance(feature_stats(embedder.embed(fake)), real_stats)
    score = inception_score(embedder.predict_proba(fake), splits=is_splits)
    return fid, score


def two_sample_baseline(embedder, real_images: np.ndarray, seed: int) -> float:
    """FID between two disjoint random halves of the real set: the sampling-noise floor."""
    n = len(real_images)
    if n < 4:
        raise ValueError(f"two_sample_baseline: need at least 4 real images, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    half = n // 2
    feats = embedder.embed(real_images)
    return frechet_distance(feature_stats(feats[perm[:half]]), feature_stats(feats[perm[half : 2 * half]]))
