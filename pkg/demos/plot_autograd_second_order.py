"""
Second-order gradients with the numpy autograd engine
=====================================================

Differentiate a small function twice and compare with the closed form.
"""

# %%
# A scalar function of a vector: f(x) = sum(tanh(x) * x**2)
import numpy as np

from ssce.tensor import Tensor, grad, ops

x = Tensor(np.linspace(-1.0, 1.0, 5), requires_grad=True)
f = ops.sum(ops.mul(ops.tanh(x), ops.power(x, 2.0)))

# %%
# ``create_graph=True`` keeps the first gradient differentiable.
(g,) = grad(f, [x], create_graph=True)
(h_diag,) = grad(ops.sum(g), [x])

t = np.tanh(x.data)
s = 1.0 - t**2
g_exact = s * x.data**2 + 2 * t * x.data
h_exact = -2 * t * s * x.data**2 + 4 * s * x.data + 2 * t
print("first  order error:", np.abs(g.data - g_exact).max())
print("second order error:", np.abs(h_diag.data - h_exact).max())
