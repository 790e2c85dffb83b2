"""Adam and RMSprop with optional coupled L2 weight decay, plus WGAN weight clipping."""

from __future__ import annotations

import numpy as np

from .layers import Parameter


class NonFiniteGradientError(FloatingPointError):
    pass


class Optimizer:
    kind = "base"

    def __init__(self, params, lr: float, weight_decay: float = 0.0, exempt_bias_and_norm: bool = False):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if weight_decay < 0:
            raise ValueError(f"weight decay must be non-negative, got {weight_decay}")
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.exempt_bias_and_norm = exempt_bias_and_norm
        self.step_count = 0

    def _decay_for(self, p) -> float:
        if self.exempt_bias_and_norm and getattr(p, "kind", "weight") != "weight":
            return 0.0
        return self.weight_decay

    def _effective_grads(self, grads) -> list[np.ndarray]:
        if grads is None:
            grads = [None if p.grad is None else p.grad.data for p in self.params]
        out = []
        for i, (p, g) in enumerate(zip(self.params, grads)):
            g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
            if not np.all(np.isfinite(g)):
                bad = int(np.size(g) - np.isfinite(g).sum())
                raise NonFiniteGradientError(
                    f"{self.kind}: parameter {i} (shape {p.shape}) has {bad} non-finite gradient entries"
                )
            wd = self._decay_for(p)
            out.append(g + wd * p.data if wd else g)
        return out

    def step(self, grads=None) -> None:
        """Update parameters in place from ``grads`` (defaults to each ``p.grad``)."""
        gs = self._effective_grads(grads)
        self.step_count += 1
        for i, (p, g) in enumerate(zip(self.params, gs)):
            self._update(i, p, g)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def _update(self, i, p, g):
        raise NotImplementedError

    def state_arrays(self) -> dict[str, np.ndarray]:
        raise NotImplementedError


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, params, lr=0.003, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0, exempt_bias_and_norm=False):
        super().__init__(params, lr, weight_decay, exempt_bias_and_norm)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def _update(self, i, p, g):
        m, v = self.m[i], self.v[i]
        m *= self.beta1
        m += (1 - self.beta1) * g
        v *= self.beta2
        v += (1 - self.beta2) * g * g
        m_hat = m / (1 - self.beta1**self.step_count)
        v_hat = v / (1 - self.beta2**self.step_count)
        p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_arrays(self):
        out = {"step": np.array([self.step_count], dtype=np.float64)}
        for i in range(len(self.params)):
            out[f"m.{i}"], out[f"v.{i}"] = self.m[i], self.v[i]
        return out


class RMSprop(Optimizer):
    kind = "rmsprop"

    def __init__(self, params, lr=5e-5, alpha=0.99, eps=1e-8, weight_decay=0.0, exempt_bias_and_norm=False):
        super().__init__(params, lr, weight_decay, exempt_bias_and_norm)
        self.alpha, self.eps = alpha, eps
        self.v = [np.zeros_like(p.data) for p in self.params]

    def _update(self, i, p, g):
        v = self.v[i]
        v *= self.alpha
        v += (1 - self.alpha) * g * g
        p.data -= self.lr * g / (np.sqrt(v) + self.eps)

    def state_arrays(self):
        out = {"step": np.array([self.step_count], dtype=np.float64)}
        for i in range(len(self.params)):
            out[f"v.{i}"] = self.v[i]
        return out


def clip_weights(params: list[Parameter], c: float = 0.01) -> None:
    """Clamp every parameter entry into [-c, c] in place."""
    if c <= 0:
        raise ValueError(f"clip bound must be positive, got {c}")
    for p in params:
        np.clip(p.data, -c, c, out=p.data)


def make_optimizer(kind: str, params, lr: float, weight_decay: float = 0.0, **kw) -> Optimizer:
    if kind == "adam":
        return Adam(params, lr=lr, weight_decay=weight_decay, **kw)
    if kind == "rmsprop":
        return RMSprop(params, lr=lr, weight_decay=weight_decay, **kw)
    raise ValueError(f"unknown optimizer '{kind}'")
