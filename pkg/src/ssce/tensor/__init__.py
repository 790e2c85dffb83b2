"""Dense float64 tensors with reverse-mode automatic differentiation."""

from . import ops
from .core import (
    Function,
    ShapeError,
    Tensor,
    UnsupportedOpError,
    as_tensor,
    backward,
    enable_grad,
    grad,
    is_grad_enabled,
    no_grad,
)
from .ops import OPS, forward_op

__all__ = [
    "Function",
    "OPS",
    "ShapeError",
    "Tensor",
    "UnsupportedOpError",
    "as_tensor",
    "backward",
    "enable_grad",
    "forward_op",
    "grad",
    "is_grad_enabled",
    "no_grad",
    "ops",
]
