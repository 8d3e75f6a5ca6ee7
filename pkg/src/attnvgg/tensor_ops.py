"""Dense float64 tensor primitives used by every layer.

All functions are pure: inputs are never mutated. Images and feature maps
use (height, width, channels) axis order throughout the library.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

_ELEMENTWISE = {"add": np.add, "sub": np.subtract, "mul": np.multiply}
_REDUCE = {"sum": np.sum, "mean": np.mean, "max": np.max}


def _channel_broadcast_ok(a_shape: tuple, b_shape: tuple) -> bool:
    # The only sanctioned broadcast: b has extent 1 on the trailing channel
    # axis (an H x W x 1 attention map scaling an H x W x C feature map).
    return (
        len(a_shape) == len(b_shape)
        and len(b_shape) >= 1
        and b_shape[-1] == 1
        and a_shape[:-1] == b_shape[:-1]
    )


def elementwise(a: np.ndarray, b: np.ndarray, op: str) -> np.ndarray:
    """Pointwise add/sub/mul; shapes equal, or b broadcast over channels."""
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op {op!r}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape and not _channel_broadcast_ok(a.shape, b.shape):
        raise ShapeError(
            f"elementwise {op}: shape {b.shape} neither equals {a.shape} "
            "nor is a trailing-channel broadcast of it"
        )
    return _ELEMENTWISE[op](a, b)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two rank-2 tensors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: expected rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner extents differ, {a.shape} vs {b.shape}")
    return a @ b


def reduce(t: np.ndarray, axes, op: str):
    """Reduce over the given axes (None means all) with sum, mean, or max."""
    t = np.asarray(t, dtype=np.float64)
    if op not in _REDUCE:
        raise ValueError(f"unknown reduce op {op!r}")
    if axes is None:
        ax = tuple(range(t.ndim))
    else:
        if isinstance(axes, (int, np.integer)):
            axes = (int(axes),)
        ax = tuple(int(a) for a in axes)
        if len(set(ax)) != len(ax) or any(a < 0 or a >= t.ndim for a in ax):
            raise ShapeError(f"reduce: invalid axes {axes!r} for rank-{t.ndim} tensor")
    return _REDUCE[op](t, axis=ax)


def _sample_coords(n_in: int, n_out: int):
    """Half-pixel-center source coordinates, clamped to the valid range."""
    x = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    x = np.clip(x, 0.0, float(n_in - 1))
    lo = np.floor(x).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, x - lo


def bilinear_resize(t: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample an H x W x C tensor to out_h x out_w x C.

    Uses half-pixel sampling with edge clamping. Written in incremental
    (lerp) form so constant inputs are reproduced exactly and a same-size
    resize is the exact identity.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise ShapeError(f"bilinear_resize: expected H x W x C input, got {t.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"bilinear_resize: target {out_h} x {out_w} must be >= 1 x 1")
    in_h, in_w, _ = t.shape
    y0, y1, wy = _sample_coords(in_h, out_h)
    x0, x1, wx = _sample_coords(in_w, out_w)
    wx = wx[None, :, None]
    rows0 = t[y0]
    rows1 = t[y1]
    top = rows0[:, x0, :] + wx * (rows0[:, x1, :] - rows0[:, x0, :])
    bot = rows1[:, x0, :] + wx * (rows1[:, x1, :] - rows1[:, x0, :])
    return top + wy[:, None, None] * (bot - top)


def bilinear_resize_backward(d_out: np.ndarray, in_h: int, in_w: int) -> np.ndarray:
    """Adjoint of bilinear_resize: scatter output gradients back to the source grid."""
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.ndim != 3:
        raise ShapeError(f"bilinear_resize_backward: expected rank-3 gradient, got {d_out.shape}")
    out_h, out_w, c = d_out.shape
    y0, y1, wy = _sample_coords(in_h, out_h)
    x0, x1, wx = _sample_coords(in_w, out_w)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    d_in = np.zeros((in_h, in_w, c), dtype=np.float64)
    rows0, rows1 = y0[:, None], y1[:, None]
    cols0, cols1 = x0[None, :], x1[None, :]
    np.add.at(d_in, (rows0, cols0), (1.0 - wy) * (1.0 - wx) * d_out)
    np.add.at(d_in, (rows0, cols1), (1.0 - wy) * wx * d_out)
    np.add.at(d_in, (rows1, cols0), wy * (1.0 - wx) * d_out)
    np.add.at(d_in, (rows1, cols1), wy * wx * d_out)
    return d_in
