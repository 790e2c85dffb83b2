"""Declarative layer chains, validated by shape inference before construction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers as L

KINDS = ("linear", "conv", "transposed-conv", "norm", "activation", "dropout", "pool", "flatten", "reshape")


class SpecError(ValueError):
    """An incompatible or malformed layer chain."""


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a chain.

    ``attrs`` by kind:
      linear: out
      conv / transposed-conv: out, kernel, stride, padding
      norm: type ('batch' | 'layer')
      activation: fn ('relu' | 'leaky_relu' | 'tanh' | 'sigmoid'), slope
      dropout: p
      pool: kernel
      reshape: shape
    """

    kind: str
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown layer kind '{self.kind}'")


def linear(out: int) -> LayerSpec:
    return LayerSpec("linear", {"out": out})


def conv(out: int, kernel: int = 3, stride: int = 1, padding: int = 1) -> LayerSpec:
    return LayerSpec("conv", {"out": out, "kernel": kernel, "stride": stride, "padding": padding})


def tconv(out: int, kernel: int = 4, stride: int = 2, padding: int = 1) -> LayerSpec:
    return LayerSpec("transposed-conv", {"out": out, "kernel": kernel, "stride": stride, "padding": padding})


def norm(type: str) -> LayerSpec:  # noqa: A002
    return LayerSpec("norm", {"type": type})


def act(fn: str, slope: float = 0.2) -> LayerSpec:
    return LayerSpec("activation", {"fn": fn, "slope": slope})


def dropout(p: float) -> LayerSpec:
    return LayerSpec("dropout", {"p": p})


def pool(kernel: int = 2) -> LayerSpec:
    return LayerSpec("pool", {"kernel": kernel})


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def reshape(*shape: int) -> LayerSpec:
    return LayerSpec("reshape", {"shape": tuple(shape)})


def _positive(i: int, spec: LayerSpec, *keys: str) -> None:
    for k in keys:
        v = spec.attrs.get(k)
        if not isinstance(v, (int, np.integer)) or v <= 0:
            raise SpecError(f"layer {i} ({spec.kind}): '{k}' must be a positive integer, got {v!r}")


def infer_shapes(specs: list[LayerSpec], input_shape: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Per-sample output shape after each layer; raises ``SpecError`` naming the layer index."""
    shape = tuple(input_shape)
    shapes = []
    for i, spec in enumerate(specs):
        a = spec.attrs
        if spec.kind == "linear":
            _positive(i, spec, "out")
            if len(shape) != 1:
                raise SpecError(f"layer {i} (linear): expects a flat feature vector, got shape {shape}")
            shape = (a["out"],)
        elif spec.kind in ("conv", "transposed-conv"):
            _positive(i, spec, "out", "kernel", "stride")
            if len(shape) != 3:
                raise SpecError(f"layer {i} ({spec.kind}): expects (C, H, W) input, got shape {shape}")
            k, s, p = a["kernel"], a["stride"], a.get("padding", 0)
            if spec.kind == "conv":
                h, w = ((n + 2 * p - k) // s + 1 for n in shape[1:])
            else:
                h, w = ((n - 1) * s - 2 * p + k for n in shape[1:])
            if h <= 0 or w <= 0:
                raise SpecError(f"layer {i} ({spec.kind}): spatial size {shape[1:]} too small for kernel {k}")
            shape = (a["out"], h, w)
        elif spec.kind == "pool":
            _positive(i, spec, "kernel")
            k = a["kernel"]
            if len(shape) != 3 or shape[1] < k or shape[2] < k:
                raise SpecError(f"layer {i} (pool): cannot pool shape {shape} with window {k}")
            shape = (shape[0], shape[1] // k, shape[2] // k)
        elif spec.kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif spec.kind == "reshape":
            target = tuple(a["shape"])
            if int(np.prod(target)) != int(np.prod(shape)):
                raise SpecError(f"layer {i} (reshape): cannot reshape {shape} into {target}")
            shape = target
        elif spec.kind == "norm":
            if a.get("type") not in ("batch", "layer"):
                raise SpecError(f"layer {i} (norm): type must be 'batch' or 'layer'")
        elif spec.kind == "activation":
            if a.get("fn") not in ("relu", "leaky_relu", "tanh", "sigmoid"):
                raise SpecError(f"layer {i} (activation): unknown function {a.get('fn')!r}")
        elif spec.kind == "dropout":
            if not 0.0 <= a.get("p", -1) < 1.0:
                raise SpecError(f"layer {i} (dropout): probability must lie in [0, 1)")
        shapes.append(shape)
    return shapes


def init_parameters(specs: list[LayerSpec], input_shape: tuple[int, ...], seed: int) -> L.Sequential:
    """Build a layer chain with fan-in scaled uniform weights and zero biases.

    The same ``(specs, input_shape, seed)`` always yields identical parameters
    and identical dropout streams.
    """
    shapes = infer_shapes(specs, input_shape)
    ss = np.random.SeedSequence(seed)
    weight_rng = np.random.default_rng(ss.spawn(1)[0])
    dropout_seeds = iter(ss.spawn(len(specs)))
    prev = tuple(input_shape)
    built: list[L.Module] = []
    for spec, out in zip(specs, shapes):
        a = spec.attrs
        if spec.kind == "linear":
            layer = L.Linear(prev[0], a["out"], weight_rng)
        elif spec.kind == "conv":
            layer = L.Conv2d(prev[0], a["out"], a["kernel"], a["stride"], a.get("padding", 0), weight_rng)
        elif spec.kind == "transposed-conv":
            layer = L.ConvTranspose2d(prev[0], a["out"], a["kernel"], a["stride"], a.get("padding", 0), weight_rng)
        elif spec.kind == "norm":
            layer = L.BatchNorm(prev[0]) if a["type"] == "batch" else L.LayerNorm(prev)
        elif spec.kind == "activation":
            layer = {
                "relu": L.ReLU,
                "tanh": L.Tanh,
                "sigmoid": L.Sigmoid,
            }.get(a["fn"], lambda: L.LeakyReLU(a.get("slope", 0.2)))()
        elif spec.kind == "dropout":
            layer = L.Dropout(a["p"], int(next(dropout_seeds).generate_state(1)[0]))
        elif spec.kind == "pool":
            layer = L.MaxPool2d(a["kernel"])
        elif spec.kind == "flatten":
            layer = L.Flatten()
        else:
            layer = L.Reshape(a["shape"])
        built.append(layer)
        prev = out
    return L.Sequential(built)
