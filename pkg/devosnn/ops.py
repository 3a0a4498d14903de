"""Window-based conv and pool kernels (forward and backward) on NCHW arrays."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def windows(x: np.ndarray, size: int, stride: int, padding: int = 0) -> np.ndarray:
    """Read-only view of shape (B, C, H_out, W_out, size, size)."""
    view = sliding_window_view(_pad(x, padding), (size, size), axis=(2, 3))
    return view[:, :, ::stride, ::stride]


def _scatter_windows(
    grad_windows: np.ndarray,
    input_shape: tuple[int, ...],
    stride: int,
    padding: int,
) -> np.ndarray:
    """Sum per-window gradients (B, C, Ho, Wo, k, k) back onto the input grid."""
    b, c, h, w = input_shape
    _, _, ho, wo, k, _ = grad_windows.shape
    out = np.zeros((b, c, h + 2 * padding, w + 2 * padding), dtype=grad_windows.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += grad_windows[:, :, :, :, i, j]
    if padding:
        out = out[:, :, padding:-padding, padding:-padding]
    return out


def conv2d(x: np.ndarray, weight: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlation without bias: (B, C, H, W) * (O, C, k, k) -> (B, O, Ho, Wo)."""
    k = weight.shape[-1]
    return np.einsum("bchwij,ocij->bohw", windows(x, k, stride, padding), weight, optimize=True)


def conv2d_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    weight: np.ndarray,
    stride: int = 1,
    padding: int = 0,
    need_input_grad: bool = True,
) -> tuple[np.ndarray | None, np.ndarray]:
    """Return (dL/dx, dL/dweight) for :func:`conv2d`."""
    k = weight.shape[-1]
    win = windows(x, k, stride, padding)
    grad_weight = np.einsum("bchwij,bohw->ocij", win, grad_out, optimize=True)
    if not need_input_grad:
        return None, grad_weight
    grad_win = np.einsum("bohw,ocij->bchwij", grad_out, weight, optimize=True)
    return _scatter_windows(grad_win, x.shape, stride, padding), grad_weight


def avgpool2d(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    return windows(x, window, stride).mean(axis=(-2, -1))


def avgpool2d_backward(grad_out: np.ndarray, input_shape: tuple[int, ...], window: int, stride: int) -> np.ndarray:
    share = grad_out / float(window * window)
    grad_win = np.broadcast_to(share[..., None, None], share.shape + (window, window))
    return _scatter_windows(grad_win, input_shape, stride, 0)


def maxpool2d(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    return windows(x, window, stride).max(axis=(-2, -1))


def maxpool2d_backward(grad_out: np.ndarray, x: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Route each gradient to the first maximal element of its window (row-major)."""
    win = windows(x, window, stride)
    flat = win.reshape(win.shape[:4] + (window * window,))
    first = flat.argmax(axis=-1)
    onehot = np.zeros(flat.shape, dtype=grad_out.dtype)
    np.put_along_axis(onehot, first[..., None], 1.0, axis=-1)
    grad_win = (onehot * grad_out[..., None]).reshape(win.shape)
    return _scatter_windows(grad_win, x.shape, stride, 0)
