"""Inception score, Frechet distance, accuracy and the training efficiency index."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import psd_sqrt_of_product, trace_sqrt_product_lowrank

LOG_FLOOR = 1e-12
FID_CLAMP = 1e-6


def inception_score(probs, splits: int = 1) -> float:
    """exp of the mean KL divergence between each row and the column mean.

    With ``splits > 1`` the rows are partitioned into contiguous chunks and
    the mean of the per-chunk scores is returned.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise ValueError(f"inception_score: need a non-empty N x K matrix, got shape {p.shape}")
    if np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("inception_score: rows must be probability distributions")
    if not 1 <= splits <= len(p):
        raise ValueError(f"inception_score: splits must lie in [1, {len(p)}], got {splits}")
    scores = []
    for part in np.array_split(p, splits):
        marginal = part.mean(axis=0, keepdims=True)
        logp = np.log(np.clip(part, LOG_FLOOR, None))
        logm = np.log(np.clip(marginal, LOG_FLOOR, None))
        kl = np.sum(part * (logp - logm), axis=1)
        scores.append(math.exp(float(np.mean(kl))))
    return float(np.mean(scores))


@dataclass(frozen=True)
class FeatureStatistics:
    """Mean ``m``, unbiased covariance ``C`` and sample count ``n`` of embedded features.

    ``factor`` (centered features divided by sqrt(n - 1), so that
    ``C = factor.T @ factor``) is kept when ``n <= d`` and enables the
    low-rank Frechet path.
    """

    m: np.ndarray
    C: np.ndarray
    n: int
    factor: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return len(self.m)


def feature_stats(features) -> FeatureStatistics:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"feature_stats: expected an N x d matrix, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise ValueError(f"feature_stats: need at least 2 samples, got {n}")
    m = x.mean(axis=0)
    centered = (x - m) / math.sqrt(n - 1)
    cov = centered.T @ centered
    cov = 0.5 * (cov + cov.T)
    return FeatureStatistics(m, cov, n, centered if n <= d else None)


def frechet_distance(a: FeatureStatistics, b: FeatureStatistics) -> float:
    """||m_a - m_b||^2 + Tr(C_a + C_b - 2 (C_a C_b)^{1/2}), clamped at 0 near zero."""
    if a.dim != b.dim or a.C.shape != b.C.shape:
        raise ValueError(f"frechet_distance: dimension mismatch ({a.dim} vs {b.dim})")
    diff = a.m - b.m
    if a.factor is not None and b.factor is not None:
        cross = trace_sqrt_product_lowrank(a.factor, b.factor)
    else:
        cross = float(np.trace(psd_sqrt_of_product(a.C, b.C)))
    fid = float(diff @ diff + np.trace(a.C) + np.trace(b.C) - 2.0 * cross)
    if -FID_CLAMP <= fid < 0.0:
        fid = 0.0
    return fid


def accuracy(predictions, labels) -> float:
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    if pred.shape != lab.shape or pred.ndim != 1:
        raise ValueError(f"accuracy: length mismatch {pred.shape} vs {lab.shape}")
    if pred.size == 0:
        raise ValueError("accuracy: empty input")
    return float(np.mean(pred == lab))


@dataclass(frozen=True)
class TEIInputs:
    """Accuracies in percentage points, times in seconds (``_b``: CNN-only baseline)."""

    acc: float
    acc_b: float
    t: float
    t_b: float


def tei(inp: TEIInputs) -> float:
    """Training efficiency index: accuracy gain per log-second of extra training.

    ``(acc - acc_b) / ln(t - t_b)``. Undefined (ValueError) unless the extra
    time exceeds one second, where the logarithm would be non-positive.
    """
    for name in ("acc", "acc_b"):
        v = getattr(inp, name)
        if not 0.0 <= v <= 100.0:
            raise ValueError(f"tei: {name}={v} is not a percentage in [0, 100]")
    dt = inp.t - inp.t_b
    if not dt > 1.0:
        raise ValueError(f"tei: t - t_b = {dt:.6g} s must exceed 1 s")
    return (inp.acc - inp.acc_b) / math.log(dt)
