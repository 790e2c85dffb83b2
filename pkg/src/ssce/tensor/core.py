"""Tensor type and the reverse-mode differentiation engine.

Every backward rule is written in terms of differentiable tensor operations,
so running a backward pass with ``create_graph=True`` records a new graph
whose outputs can be differentiated again. This is what the gradient penalty
of a WGAN-GP critic needs.
"""

from __future__ import annotations

import contextlib
import threading
import weakref
from typing import Iterable, Sequence

import numpy as np

_state = threading.local()


class ShapeError(ValueError):
    """Raised when operand shapes are invalid for an operation."""


class UnsupportedOpError(RuntimeError):
    """Raised when an op has no rule for the requested differentiation order."""


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def _grad_mode(enabled: bool):
    prev = is_grad_enabled()
    _state.enabled = enabled
    try:
        yield
    finally:
        _state.enabled = prev


def no_grad():
    """Context manager that disables graph recording."""
    return _grad_mode(False)


def enable_grad():
    return _grad_mode(True)


class Tensor:
    """Dense float64 array that can take part in a differentiation graph."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Tensor | None = None
        self._fn: Function | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._fn is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = Tensor(np.zeros_like(self.data))

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # Arithmetic sugar; the op implementations live in ``ops``.
    def __add__(self, other):
        return _ops().add(self, other)

    def __radd__(self, other):
        return _ops().add(other, self)

    def __sub__(self, other):
        return _ops().sub(self, other)

    def __rsub__(self, other):
        return _ops().sub(other, self)

    def __mul__(self, other):
        return _ops().mul(self, other)

    def __rmul__(self, other):
        return _ops().mul(other, self)

    def __truediv__(self, other):
        return _ops().div(self, other)

    def __rtruediv__(self, other):
        return _ops().div(other, self)

    def __neg__(self):
        return _ops().neg(self)

    def __pow__(self, p: float):
        return _ops().power(self, p)

    def __matmul__(self, other):
        return _ops().matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        return _ops().sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        return _ops().mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops().reshape(self, shape)

    def transpose(self, axes=None) -> Tensor:
        return _ops().transpose(self, axes)

    @property
    def T(self) -> Tensor:
        return self.transpose()

    def backward(self, create_graph: bool = False) -> None:
        backward(self, create_graph=create_graph)


def _ops():
    from . import ops

    return ops


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Function:
    """One recorded operation.

    Subclasses implement ``forward`` on raw arrays and ``backward`` on
    tensors; ``backward`` returns one gradient (or None) per input.
    """

    name = "op"
    second_order = True

    def __init__(self, **attrs):
        self.attrs = attrs
        self.inputs: tuple[Tensor, ...] = ()
        self._out = None

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: Tensor) -> Sequence[Tensor | None]:
        raise NotImplementedError

    @property
    def output(self) -> Tensor:
        out = self._out()
        if out is None:  # pragma: no cover - consumers keep outputs alive
            raise RuntimeError(f"{self.name}: output released before backward")
        return out

    @classmethod
    def apply(cls, *inputs, **attrs) -> Tensor:
        tensors = tuple(as_tensor(x) for x in inputs)
        fn = cls(**attrs)
        out = Tensor(fn.forward(*(t.data for t in tensors)))
        if is_grad_enabled() and any(t.requires_grad for t in tensors):
            out.requires_grad = True
            fn.inputs = tensors
            fn._out = weakref.ref(out)
            out._fn = fn
        return out


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t._fn is not None:
            for inp in t._fn.inputs:
                if inp.requires_grad and id(inp) not in seen:
                    stack.append((inp, False))
    return order


def _propagate(root: Tensor, seed: Tensor, create_graph: bool) -> dict[int, tuple[Tensor, Tensor]]:
    """Run one reverse sweep; returns ``id -> (tensor, grad)`` for every visited node."""
    order = _topological_order(root)
    grads: dict[int, Tensor] = {id(root): seed}
    visited: dict[int, tuple[Tensor, Tensor]] = {}
    with _grad_mode(create_graph):
        for t in reversed(order):
            g = grads.pop(id(t), None)
            if g is None:
                continue
            visited[id(t)] = (t, g)
            fn = t._fn
            if fn is None:
                continue
            if create_graph and not fn.second_order:
                raise UnsupportedOpError(
                    f"op '{fn.name}' has no second-order rule; "
                    "it cannot appear under a create_graph backward pass"
                )
            in_grads = fn.backward(g)
            for inp, ig in zip(fn.inputs, in_grads):
                if ig is None or not inp.requires_grad:
                    continue
                if ig.shape != inp.shape:  # pragma: no cover - rule bug guard
                    raise ShapeError(
                        f"{fn.name}: gradient shape {ig.shape} != input shape {inp.shape}"
                    )
                prev = grads.get(id(inp))
                grads[id(inp)] = ig if prev is None else prev + ig
    return visited


def backward(root: Tensor, create_graph: bool = False) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
    if root.data.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    if not root.requires_grad:
        return
    seed = Tensor(np.ones_like(root.data))
    for t, g in _propagate(root, seed, create_graph).values():
        if t._fn is not None:
            continue
        if not create_graph:
            g = g.detach()
        t.grad = g if t.grad is None else (t.grad + g if create_graph else Tensor(t.grad.data + g.data))


def grad(
    output: Tensor,
    inputs: Iterable[Tensor],
    grad_output: Tensor | None = None,
    create_graph: bool = False,
) -> list[Tensor]:
    """Return d(output)/d(input) for each input without touching ``.grad``.

    Inputs the output does not depend on get an exact zero gradient. With
    ``create_graph=True`` the returned tensors are themselves differentiable.
    """
    inputs = list(inputs)
    if grad_output is None:
        if output.data.size != 1:
            raise ShapeError(f"grad: non-scalar output {output.shape} needs grad_output")
        grad_output = Tensor(np.ones_like(output.data))
    if not output.requires_grad:
        return [Tensor(np.zeros_like(x.data)) for x in inputs]
    visited = _propagate(output, as_tensor(grad_output), create_graph)
    result = []
    for x in inputs:
        hit = visited.get(id(x))
        if hit is None:
            result.append(Tensor(np.zeros_like(x.data)))
        else:
            result.append(hit[1] if create_graph else hit[1].detach())
    return result
