"""Differentiable operations.

Primitive ops are ``Function`` subclasses whose backward rules are built from
other primitives, which makes them differentiable to any order. ``max_pool``
is the exception: its backward is a raw scatter and is first-order only.
Composite ops (mean, layer_norm, batch_norm, l2_norm, dropout) are plain
functions over primitives.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import kernels
from .core import Function, ShapeError, Tensor, as_tensor


def _broadcast_shape(op: str, a: tuple, b: tuple) -> tuple:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a} and {b}") from None


def sum_to(t: Tensor, shape: tuple) -> Tensor:
    """Reduce a broadcast result back to ``shape`` (the adjoint of broadcasting)."""
    if t.shape == tuple(shape):
        return t
    lead = t.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and t.shape[i + lead] != 1
    )
    out = Sum.apply(t, axis=axes, keepdims=True) if axes else t
    return reshape(out, tuple(shape))


# -- elementwise binary -------------------------------------------------------


class Add(Function):
    name = "add"

    def forward(self, a, b):
        _broadcast_shape(self.name, a.shape, b.shape)
        return a + b

    def backward(self, g):
        a, b = self.inputs
        return sum_to(g, a.shape), sum_to(g, b.shape)


class Sub(Function):
    name = "sub"

    def forward(self, a, b):
        _broadcast_shape(self.name, a.shape, b.shape)
        return a - b

    def backward(self, g):
        a, b = self.inputs
        return sum_to(g, a.shape), sum_to(neg(g), b.shape)


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        _broadcast_shape(self.name, a.shape, b.shape)
        return a * b

    def backward(self, g):
        a, b = self.inputs
        ga = sum_to(mul(g, b), a.shape) if a.requires_grad else None
        gb = sum_to(mul(g, a), b.shape) if b.requires_grad else None
        return ga, gb


class Div(Function):
    name = "div"

    def forward(self, a, b):
        _broadcast_shape(self.name, a.shape, b.shape)
        return a / b

    def backward(self, g):
        a, b = self.inputs
        ga = sum_to(div(g, b), a.shape) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = sum_to(neg(div(mul(g, a), mul(b, b))), b.shape)
        return ga, gb


class Neg(Function):
    name = "neg"

    def forward(self, a):
        return -a

    def backward(self, g):
        return (neg(g),)


class Power(Function):
    """Elementwise power with a constant exponent."""

    name = "pow"

    def forward(self, a):
        return a ** self.attrs["p"]

    def backward(self, g):
        (a,) = self.inputs
        p = self.attrs["p"]
        if p == 1:
            return (g,)
        return (mul(g, mul(power(a, p - 1), p)),)


# -- elementwise unary --------------------------------------------------------


class Exp(Function):
    name = "exp"

    def forward(self, a):
        return np.exp(a)

    def backward(self, g):
        return (mul(g, self.output),)


class Log(Function):
    name = "log"

    def forward(self, a):
        return np.log(a)

    def backward(self, g):
        return (div(g, self.inputs[0]),)


class Sqrt(Function):
    name = "sqrt"

    def forward(self, a):
        return np.sqrt(a)

    def backward(self, g):
        return (div(g, mul(self.output, 2.0)),)


class Tanh(Function):
    name = "tanh"

    def forward(self, a):
        return np.tanh(a)

    def backward(self, g):
        y = self.output
        return (mul(g, sub(1.0, mul(y, y))),)


class Sigmoid(Function):
    name = "sigmoid"

    def forward(self, a):
        # split by sign so exp never overflows
        out = np.empty_like(a)
        pos = a >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
        e = np.exp(a[~pos])
        out[~pos] = e / (1.0 + e)
        return out

    def backward(self, g):
        y = self.output
        return (mul(g, mul(y, sub(1.0, y))),)


class ReLU(Function):
    name = "relu"

    def forward(self, a):
        return np.maximum(a, 0.0)

    def backward(self, g):
        mask = Tensor((self.inputs[0].data > 0).astype(np.float64))
        return (mul(g, mask),)


class LeakyReLU(Function):
    # second derivative is zero everywhere, kink included
    name = "leaky_relu"

    def forward(self, a):
        return np.where(a > 0, a, a * self.attrs["slope"])

    def backward(self, g):
        slope = self.attrs["slope"]
        scale = Tensor(np.where(self.inputs[0].data > 0, 1.0, slope))
        return (mul(g, scale),)


class ClampMin(Function):
    name = "clamp_min"

    def forward(self, a):
        return np.maximum(a, self.attrs["lo"])

    def backward(self, g):
        mask = Tensor((self.inputs[0].data > self.attrs["lo"]).astype(np.float64))
        return (mul(g, mask),)


class Softmax(Function):
    name = "softmax"

    def forward(self, a):
        axis = self.attrs["axis"]
        z = np.exp(a - a.max(axis=axis, keepdims=True))
        return z / z.sum(axis=axis, keepdims=True)

    def backward(self, g):
        y = self.output
        axis = self.attrs["axis"]
        inner = sum(mul(g, y), axis=axis, keepdims=True)
        return (mul(y, sub(g, inner)),)


# -- shape ops ----------------------------------------------------------------


class Sum(Function):
    name = "sum"

    def forward(self, a):
        return np.sum(a, axis=self.attrs["axis"], keepdims=self.attrs["keepdims"])

    def backward(self, g):
        (a,) = self.inputs
        axis = self.attrs["axis"]
        if not self.attrs["keepdims"]:
            axes = range(a.ndim) if axis is None else np.atleast_1d(axis)
            axes = sorted(int(ax) % a.ndim for ax in axes)
            kept = list(a.shape)
            for ax in axes:
                kept[ax] = 1
            g = reshape(g, tuple(kept))
        return (broadcast_to(g, a.shape),)


class BroadcastTo(Function):
    name = "broadcast_to"

    def forward(self, a):
        return np.broadcast_to(a, self.attrs["shape"]).copy()

    def backward(self, g):
        return (sum_to(g, self.inputs[0].shape),)


class Reshape(Function):
    name = "reshape"

    def forward(self, a):
        try:
            return a.reshape(self.attrs["shape"])
        except ValueError:
            raise ShapeError(f"reshape: cannot reshape {a.shape} into {self.attrs['shape']}") from None

    def backward(self, g):
        return (reshape(g, self.inputs[0].shape),)


class Transpose(Function):
    name = "transpose"

    def forward(self, a):
        return np.transpose(a, self.attrs["axes"])

    def backward(self, g):
        axes = self.attrs["axes"]
        inv = None if axes is None else tuple(np.argsort(axes))
        return (transpose(g, inv),)


class Pad(Function):
    """Zero padding of the trailing two axes."""

    name = "pad"

    def forward(self, a):
        p = self.attrs["padding"]
        width = [(0, 0)] * (a.ndim - 2) + [(p, p), (p, p)]
        return np.pad(a, width)

    def backward(self, g):
        return (crop(g, self.attrs["padding"]),)


class Crop(Function):
    name = "crop"

    def forward(self, a):
        p = self.attrs["padding"]
        return a[..., p : a.shape[-2] - p, p : a.shape[-1] - p].copy()

    def backward(self, g):
        return (pad(g, self.attrs["padding"]),)


class MatMul(Function):
    name = "matmul"

    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        return a @ b

    def backward(self, g):
        a, b = self.inputs
        ga = matmul(g, transpose(b)) if a.requires_grad else None
        gb = matmul(transpose(a), g) if b.requires_grad else None
        return ga, gb


# -- convolution --------------------------------------------------------------
#
# conv2d, its input adjoint (the transposed convolution) and its weight adjoint
# form a closed set: each one's backward is expressed with the other two.


class Conv2d(Function):
    name = "conv2d"

    def forward(self, x, w):
        if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
            raise ShapeError(f"conv2d: input {x.shape} incompatible with kernel {w.shape}")
        s, p = self.attrs["stride"], self.attrs["padding"]
        if x.shape[2] + 2 * p < w.shape[2] or x.shape[3] + 2 * p < w.shape[3]:
            raise ShapeError(f"conv2d: kernel {w.shape[2:]} larger than padded input {x.shape[2:]}")
        return kernels.conv2d(x, w, s, p)

    def backward(self, g):
        x, w = self.inputs
        s, p = self.attrs["stride"], self.attrs["padding"]
        gx = conv2d_transpose(g, w, s, p, x.shape[2:]) if x.requires_grad else None
        gw = conv2d_weight_grad(x, g, s, p, w.shape[2:]) if w.requires_grad else None
        return gx, gw


class Conv2dTranspose(Function):
    name = "conv2d_transpose"

    def forward(self, y, w):
        if y.ndim != 4 or w.ndim != 4 or y.shape[1] != w.shape[0]:
            raise ShapeError(f"conv2d_transpose: input {y.shape} incompatible with kernel {w.shape}")
        s, p, hw = self.attrs["stride"], self.attrs["padding"], self.attrs["out_hw"]
        expect = tuple(kernels.conv_out_size(n, k, s, p) for n, k in zip(hw, w.shape[2:]))
        if expect != y.shape[2:]:
            raise ShapeError(f"conv2d_transpose: input spatial {y.shape[2:]} does not map to {hw}")
        return kernels.conv2d_input_adjoint(y, w, s, p, tuple(hw))

    def backward(self, g):
        y, w = self.inputs
        s, p = self.attrs["stride"], self.attrs["padding"]
        gy = conv2d(g, w, s, p) if y.requires_grad else None
        gw = conv2d_weight_grad(g, y, s, p, w.shape[2:]) if w.requires_grad else None
        return gy, gw


class Conv2dWeightGrad(Function):
    name = "conv2d_weight_grad"

    def forward(self, x, gy):
        s, p = self.attrs["stride"], self.attrs["padding"]
        return kernels.conv2d_weight_adjoint(x, gy, s, p, tuple(self.attrs["kernel"]))

    def backward(self, g):
        x, gy = self.inputs
        s, p = self.attrs["stride"], self.attrs["padding"]
        gx = conv2d_transpose(gy, g, s, p, x.shape[2:]) if x.requires_grad else None
        ggy = conv2d(x, g, s, p) if gy.requires_grad else None
        return gx, ggy


class MaxPool2d(Function):
    name = "max_pool"
    second_order = False

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeError(f"max_pool: expected NCHW input, got {x.shape}")
        k, s = self.attrs["kernel"], self.attrs["stride"]
        if x.shape[2] < k or x.shape[3] < k:
            raise ShapeError(f"max_pool: window {k} larger than input {x.shape[2:]}")
        out, self._idx = kernels.max_pool(x, k, s)
        return out

    def backward(self, g):
        x = self.inputs[0]
        k, s = self.attrs["kernel"], self.attrs["stride"]
        return (Tensor(kernels.max_pool_backward(g.data, self._idx, x.shape, k, s)),)


# -- functional API -----------------------------------------------------------


def add(a, b):
    return Add.apply(a, b)


def sub(a, b):
    return Sub.apply(a, b)


def mul(a, b):
    return Mul.apply(a, b)


def div(a, b):
    return Div.apply(a, b)


def neg(a):
    return Neg.apply(a)


def power(a, p: float):
    return Power.apply(a, p=p)


def exp(a):
    return Exp.apply(a)


def log(a):
    return Log.apply(a)


def sqrt(a):
    return Sqrt.apply(a)


def tanh(a):
    return Tanh.apply(a)


def sigmoid(a):
    return Sigmoid.apply(a)


def relu(a):
    return ReLU.apply(a)


def leaky_relu(a, slope: float = 0.2):
    return LeakyReLU.apply(a, slope=slope)


def clamp_min(a, lo: float):
    return ClampMin.apply(a, lo=lo)


def softmax(a, axis: int = -1):
    return Softmax.apply(a, axis=axis)


def sum(a, axis=None, keepdims: bool = False):  # noqa: A001 - mirrors numpy
    if isinstance(axis, list):
        axis = tuple(axis)
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims: bool = False):
    a = as_tensor(a)
    if axis is None:
        n = a.size
    else:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        n = int(np.prod([a.shape[ax] for ax in axes]))
    return div(sum(a, axis=axis, keepdims=keepdims), float(n))


def broadcast_to(a, shape):
    a = as_tensor(a)
    if a.shape == tuple(shape):
        return a
    return BroadcastTo.apply(a, shape=tuple(shape))


def reshape(a, shape):
    return Reshape.apply(a, shape=tuple(shape))


def transpose(a, axes=None):
    return Transpose.apply(a, axes=None if axes is None else tuple(axes))


def pad(a, padding: int):
    return a if padding == 0 else Pad.apply(a, padding=padding)


def crop(a, padding: int):
    return a if padding == 0 else Crop.apply(a, padding=padding)


def matmul(a, b):
    return MatMul.apply(a, b)


def _check_conv_attrs(op: str, **vals):
    for key, v in vals.items():
        if key == "padding":
            if v < 0:
                raise ShapeError(f"{op}: padding must be non-negative, got {v}")
        elif v <= 0:
            raise ShapeError(f"{op}: {key} must be positive, got {v}")


def conv2d(x, w, stride: int = 1, padding: int = 0):
    _check_conv_attrs("conv2d", stride=stride, padding=padding)
    return Conv2d.apply(x, w, stride=stride, padding=padding)


def conv2d_transpose(y, w, stride: int = 1, padding: int = 0, out_hw=None):
    """Transposed convolution with kernel ``w`` of shape (C_in, C_out, kh, kw).

    ``out_hw`` defaults to the smallest spatial size that maps onto ``y``.
    """
    _check_conv_attrs("conv2d_transpose", stride=stride, padding=padding)
    y, w = as_tensor(y), as_tensor(w)
    if out_hw is None:
        out_hw = tuple((n - 1) * stride - 2 * padding + k for n, k in zip(y.shape[2:], w.shape[2:]))
    return Conv2dTranspose.apply(y, w, stride=stride, padding=padding, out_hw=tuple(out_hw))


def conv2d_weight_grad(x, gy, stride: int, padding: int, kernel):
    return Conv2dWeightGrad.apply(x, gy, stride=stride, padding=padding, kernel=tuple(kernel))


def max_pool(x, kernel: int = 2, stride: int | None = None):
    stride = kernel if stride is None else stride
    _check_conv_attrs("max_pool", kernel=kernel, stride=stride)
    return MaxPool2d.apply(x, kernel=kernel, stride=stride)


def l2_norm(x, axis=None, keepdims: bool = False, eps: float = 1e-12):
    """Euclidean norm; ``eps`` under the root keeps the gradient finite at zero."""
    return sqrt(add(sum(mul(x, x), axis=axis, keepdims=keepdims), eps))


def layer_norm(x, weight=None, bias=None, eps: float = 1e-5):
    """Normalize each sample over all non-batch axes."""
    x = as_tensor(x)
    axes = tuple(range(1, x.ndim))
    mu = mean(x, axis=axes, keepdims=True)
    xc = sub(x, mu)
    var = mean(mul(xc, xc), axis=axes, keepdims=True)
    out = div(xc, sqrt(add(var, eps)))
    if weight is not None:
        out = mul(out, weight)
    if bias is not None:
        out = add(out, bias)
    return out


def batch_norm(
    x,
    weight,
    bias,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
):
    """Batch normalization over every axis except channels (axis 1).

    In training mode batch statistics are used and the running buffers are
    updated in place; otherwise the running buffers are used.
    """
    x = as_tensor(x)
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, x.shape[1]) + (1,) * (x.ndim - 2)
    if training:
        n = x.size // x.shape[1]
        if n < 2:
            raise ShapeError(f"batch_norm: need more than one value per channel, got input {x.shape}")
        mu = mean(x, axis=axes, keepdims=True)
        xc = sub(x, mu)
        var = mean(mul(xc, xc), axis=axes, keepdims=True)
        running_mean *= 1 - momentum
        running_mean += momentum * mu.data.reshape(-1)
        running_var *= 1 - momentum
        running_var += momentum * var.data.reshape(-1) * n / (n - 1)
        out = div(xc, sqrt(add(var, eps)))
    else:
        rm = Tensor(running_mean.reshape(bshape))
        rs = Tensor(np.sqrt(running_var.reshape(bshape) + eps))
        out = div(sub(x, rm), rs)
    return add(mul(out, reshape(weight, bshape)), reshape(bias, bshape))


def dropout(x, p: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout: kept activations are scaled by 1/(1-p)."""
    if not training or p == 0.0:
        return as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: probability must lie in [0, 1), got {p}")
    x = as_tensor(x)
    keep = (rng.random(x.shape) >= p).astype(np.float64) / (1.0 - p)
    return mul(x, Tensor(keep))


def flatten(x):
    x = as_tensor(x)
    return reshape(x, (x.shape[0], -1 if x.size else 0))


def log_softmax(a, axis: int = -1, floor: float = 1e-12):
    return log(clamp_min(softmax(a, axis=axis), floor))


OPS: dict[str, Callable[..., Tensor]] = {
    "add": add,
    "mul": mul,
    "matmul": matmul,
    "conv2d": conv2d,
    "conv2d_transpose": conv2d_transpose,
    "relu": relu,
    "leaky_relu": leaky_relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "softmax": softmax,
    "log": log,
    "mean": mean,
    "sum": sum,
    "reshape": reshape,
    "pad": pad,
    "max_pool": max_pool,
    "batch_norm": batch_norm,
    "layer_norm": layer_norm,
    "dropout": dropout,
    "l2_norm": l2_norm,
}


def forward_op(op: str, inputs, attrs: dict | None = None) -> Tensor:
    """Dispatch a registered op by name."""
    try:
        fn = OPS[op]
    except KeyError:
        raise ValueError(f"unknown op '{op}'; registered: {sorted(OPS)}") from None
    return fn(*inputs, **(attrs or {}))

