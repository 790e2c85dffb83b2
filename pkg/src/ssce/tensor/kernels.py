"""Raw numpy kernels for 2-D convolution and pooling (NCHW layout)."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _windows(x: np.ndarray, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    # (N, C, Ho, Wo, kh, kw) view over the padded input
    win = sliding_window_view(_pad(x, padding), (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d(x: np.ndarray, w: np.ndarray, stride: int, padding: int) -> np.ndarray:
    """Cross-correlation of ``x`` (N,C,H,W) with ``w`` (O,C,kh,kw)."""
    _, _, kh, kw = w.shape
    win = _windows(x, kh, kw, stride, padding)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # N,Ho,Wo,O
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_input_adjoint(
    g: np.ndarray, w: np.ndarray, stride: int, padding: int, in_hw: tuple[int, int]
) -> np.ndarray:
    """Adjoint of ``conv2d`` with respect to its input.

    Maps ``g`` (N,O,Ho,Wo) back to (N,C,H,W) with ``(H, W) = in_hw``; this is
    also the forward pass of a transposed convolution.
    """
    n, _, ho, wo = g.shape
    _, c, kh, kw = w.shape
    h, wd = in_hw
    hp, wp = h + 2 * padding, wd + 2 * padding
    cols = np.tensordot(w, g, axes=([0], [1]))  # C,kh,kw,N,Ho,Wo
    out = np.zeros((c, n, hp, wp))
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += cols[:, i, j]
    out = out[:, :, padding : padding + h, padding : padding + wd]
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def conv2d_weight_adjoint(
    x: np.ndarray, g: np.ndarray, stride: int, padding: int, kernel: tuple[int, int]
) -> np.ndarray:
    """Adjoint of ``conv2d`` with respect to its weight: returns (O,C,kh,kw)."""
    kh, kw = kernel
    win = _windows(x, kh, kw, stride, padding)
    ho, wo = g.shape[2], g.shape[3]
    win = win[:, :, :ho, :wo]
    return np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))


def max_pool(x: np.ndarray, kernel: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Max pooling; returns the pooled map and flat argmax indices per window."""
    win = sliding_window_view(x, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, ho, wo = win.shape[:4]
    flat = win.reshape(n, c, ho, wo, kernel * kernel)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return out, idx


def max_pool_backward(
    g: np.ndarray, idx: np.ndarray, in_shape: tuple[int, ...], kernel: int, stride: int
) -> np.ndarray:
    n, c, ho, wo = g.shape
    out = np.zeros(in_shape)
    di, dj = np.divmod(idx, kernel)
    rows = np.arange(ho)[None, None, :, None] * stride + di
    cols = np.arange(wo)[None, None, None, :] * stride + dj
    nn = np.arange(n)[:, None, None, None]
    cc = np.arange(c)[None, :, None, None]
    np.add.at(out, (nn, cc, rows, cols), g)
    return out
