"""Loss functions."""

from __future__ import annotations

import numpy as np

from ..tensor import Tensor, as_tensor, ops

PROB_FLOOR = 1e-12


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under softmax(``logits``)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ValueError(f"cross_entropy: logits {logits.shape} and labels {labels.shape} disagree")
    k = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"cross_entropy: labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    onehot = np.zeros(logits.shape)
    onehot[np.arange(len(labels)), labels] = 1.0
    logp = ops.log_softmax(logits, axis=1, floor=PROB_FLOOR)
    return ops.neg(ops.mean(ops.sum(ops.mul(logp, Tensor(onehot)), axis=1)))


def binary_cross_entropy(probs: Tensor, target: float) -> Tensor:
    """Mean BCE of probabilities against a constant target in {0, 1}."""
    probs = as_tensor(probs)
    if target == 1.0:
        return ops.neg(ops.mean(ops.log(ops.clamp_min(probs, PROB_FLOOR))))
    if target == 0.0:
        return ops.neg(ops.mean(ops.log(ops.clamp_min(ops.sub(1.0, probs), PROB_FLOOR))))
    raise ValueError(f"binary_cross_entropy: target must be 0 or 1, got {target}")
