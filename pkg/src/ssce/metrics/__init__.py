"""Evaluation metrics: IS, FID, accuracy and TEI."""

from .linalg import ConvergenceError, jacobi_eigh, psd_sqrt, psd_sqrt_of_product, trace_sqrt_product_lowrank
from .quality import evaluate_gan_quality, to_unit_range, two_sample_baseline
from .scores import (
    FeatureStatistics,
    TEIInputs,
    accuracy,
    feature_stats,
    frechet_distance,
    inception_score,
    tei,
)
