"""Layer modules and parameter containers."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from ..tensor import Tensor, as_tensor, ops


class Parameter(Tensor):
    """Trainable tensor; ``kind`` is one of ``weight``, ``bias`` or ``norm``."""

    def __init__(self, data, kind: str = "weight"):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.kind = kind


class Module:
    training = True

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x) -> Tensor:
        return self.forward(as_tensor(x))

    def _children(self) -> Iterator[tuple[str, object]]:
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, list) and value and isinstance(value[0], Module):
                for i, m in enumerate(value):
                    yield str(i), m

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Parameter]]:
        out = []
        for name, child in self._children():
            full = f"{prefix}{name}"
            if isinstance(child, Parameter):
                out.append((full, child))
            else:
                out.extend(child.named_parameters(full + "."))
        return out

    def named_buffers(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        out = [(f"{prefix}{k}", v) for k, v in getattr(self, "_buffers", {}).items()]
        for name, child in self._children():
            if isinstance(child, Module):
                out.extend(child.named_buffers(f"{prefix}{name}."))
        return out

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator[Module]:
        yield self
        for _, child in self._children():
            if isinstance(child, Module):
                yield from child.modules()

    def train(self, mode: bool = True) -> Module:
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> Module:
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({name: b.copy() for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        if strict:
            missing = (set(params) | set(buffers)) - set(state)
            if missing:
                raise KeyError(f"state is missing entries: {sorted(missing)}")
        for name, value in state.items():
            target = params[name].data if name in params else buffers.get(name)
            if target is None:
                if strict:
                    raise KeyError(f"unexpected state entry '{name}'")
                continue
            if target.shape != value.shape:
                raise ValueError(f"{name}: shape {value.shape} != {target.shape}")
            target[...] = value

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


class Sequential(Module):
    def __init__(self, layers: list[Module]):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, i):
        return self.layers[i]


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    """Affine map ``x @ W + b`` with ``W`` of shape (in, out)."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        self.in_features, self.out_features = in_features, out_features
        self.weight = Parameter(_uniform(rng, (in_features, out_features), in_features))
        self.bias = Parameter(np.zeros(out_features), kind="bias")

    def forward(self, x):
        return ops.add(ops.matmul(x, self.weight), self.bias)


class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int, padding: int, rng):
        self.stride, self.padding = stride, padding
        self.weight = Parameter(_uniform(rng, (out_ch, in_ch, kernel, kernel), in_ch * kernel * kernel))
        self.bias = Parameter(np.zeros(out_ch), kind="bias")

    def forward(self, x):
        y = ops.conv2d(x, self.weight, self.stride, self.padding)
        return ops.add(y, ops.reshape(self.bias, (1, -1, 1, 1)))


class ConvTranspose2d(Module):
    """Transposed convolution; weight shape (in, out, k, k)."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int, padding: int, rng):
        self.stride, self.padding = stride, padding
        self.weight = Parameter(_uniform(rng, (in_ch, out_ch, kernel, kernel), in_ch * kernel * kernel))
        self.bias = Parameter(np.zeros(out_ch), kind="bias")

    def forward(self, x):
        y = ops.conv2d_transpose(x, self.weight, self.stride, self.padding)
        return ops.add(y, ops.reshape(self.bias, (1, -1, 1, 1)))


class BatchNorm(Module):
    """Batch norm over channels for (N, C) or (N, C, H, W) inputs."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.momentum, self.eps = momentum, eps
        self.weight = Parameter(np.ones(channels), kind="norm")
        self.bias = Parameter(np.zeros(channels), kind="norm")
        self._buffers = {"running_mean": np.zeros(channels), "running_var": np.ones(channels)}

    def forward(self, x):
        return ops.batch_norm(
            x,
            self.weight,
            self.bias,
            self._buffers["running_mean"],
            self._buffers["running_var"],
            self.training,
            self.momentum,
            self.eps,
        )


class LayerNorm(Module):
    """Per-sample normalization over every non-batch axis with elementwise affine."""

    def __init__(self, shape: tuple[int, ...], eps: float = 1e-5):
        self.eps = eps
        self.weight = Parameter(np.ones(shape), kind="norm")
        self.bias = Parameter(np.zeros(shape), kind="norm")

    def forward(self, x):
        return ops.layer_norm(x, self.weight, self.bias, self.eps)


class ReLU(Module):
    def forward(self, x):
        return ops.relu(x)


class LeakyReLU(Module):
    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def forward(self, x):
        return ops.leaky_relu(x, self.slope)


class Tanh(Module):
    def forward(self, x):
        return ops.tanh(x)


class Sigmoid(Module):
    def forward(self, x):
        return ops.sigmoid(x)


class Dropout(Module):
    """Inverted dropout with its own seeded random stream."""

    def __init__(self, p: float, seed: int):
        self.p = p
        self.rng = np.random.default_rng(seed)

    def forward(self, x):
        return ops.dropout(x, self.p, self.rng, self.training)


class MaxPool2d(Module):
    def __init__(self, kernel: int = 2):
        self.kernel = kernel

    def forward(self, x):
        return ops.max_pool(x, self.kernel)


class Flatten(Module):
    def forward(self, x):
        return ops.flatten(x)


class Reshape(Module):
    """Reshape the non-batch axes."""

    def __init__(self, shape: tuple[int, ...]):
        self.shape = tuple(shape)

    def forward(self, x):
        return ops.reshape(x, (x.shape[0],) + self.shape)
