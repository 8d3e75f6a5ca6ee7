"""Network layers with hand-derived backward passes.

Every layer is a pair of pure functions: ``*_forward`` returns the output
plus an opaque cache, and ``*_backward`` consumes that cache together with
the upstream gradient. A cache is valid for exactly the forward call that
produced it. Trainable state lives in :class:`Parameter`, which bundles a
value with its gradient accumulator and optimizer state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError


@dataclass
class Parameter:
    """Named tensor with gradient accumulator and optimizer state."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(default=None, repr=False)
    opt_state: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.value = np.array(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.opt_state is None:
            self.opt_state = np.zeros_like(self.value)
        if self.grad.shape != self.value.shape or self.opt_state.shape != self.value.shape:
            raise ShapeError(f"parameter {self.name!r}: value/grad/opt_state shapes differ")

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


# ---------------------------------------------------------------------------
# Convolution (stride 1, zero padding preserving H x W)
# ---------------------------------------------------------------------------

def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None):
    """Same-padded stride-1 convolution of H x W x Cin with kh x kw x Cin x Cout."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 3 or w.ndim != 4:
        raise ShapeError(f"conv2d: expected rank-3 input and rank-4 weights, got {x.shape}, {w.shape}")
    h, wd, cin = x.shape
    kh, kw, wcin, cout = w.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d: kernel extents must be odd, got {kh} x {kw}")
    if wcin != cin:
        raise ShapeError(f"conv2d: input has {cin} channels but weights expect {wcin}")
    if b is not None and np.shape(b) != (cout,):
        raise ShapeError(f"conv2d: bias shape {np.shape(b)} does not match {cout} filters")
    ph, pw = kh // 2, kw // 2
    if ph or pw:
        padded = np.zeros((h + 2 * ph, wd + 2 * pw, cin), dtype=np.float64)
        padded[ph:ph + h, pw:pw + wd, :] = x
    else:
        padded = x
    win = sliding_window_view(padded, (kh, kw), axis=(0, 1))  # (h, wd, cin, kh, kw)
    cols = np.ascontiguousarray(win.transpose(0, 1, 3, 4, 2)).reshape(h * wd, kh * kw * cin)
    out = cols @ w.reshape(-1, cout)
    if b is not None:
        out = out + np.asarray(b, dtype=np.float64)
    cache = (cols, x.shape, w, b is not None)
    return out.reshape(h, wd, cout), cache


def conv2d_backward(cache, d_out: np.ndarray):
    """Gradients w.r.t. input, weights, and bias (None when the layer had none)."""
    cols, x_shape, w, has_bias = cache
    h, wd, cin = x_shape
    kh, kw, _, cout = w.shape
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != (h, wd, cout):
        raise ShapeError(f"conv2d backward: gradient shape {d_out.shape} does not match output {(h, wd, cout)}")
    d_mat = d_out.reshape(-1, cout)
    d_b = d_out.sum(axis=(0, 1)) if has_bias else None
    d_w = (cols.T @ d_mat).reshape(w.shape)
    d_win = (d_mat @ w.reshape(-1, cout).T).reshape(h, wd, kh, kw, cin)
    ph, pw = kh // 2, kw // 2
    d_pad = np.zeros((h + 2 * ph, wd + 2 * pw, cin), dtype=np.float64)
    for e in range(kh):
        for f in range(kw):
            d_pad[e:e + h, f:f + wd, :] += d_win[:, :, e, f, :]
    d_x = d_pad[ph:ph + h, pw:pw + wd, :]
    return np.ascontiguousarray(d_x), d_w, d_b


# ---------------------------------------------------------------------------
# 2x2 max pooling, stride 2
# ---------------------------------------------------------------------------

def maxpool2_forward(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"maxpool2: expected H x W x C input, got {x.shape}")
    h, w, c = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2: spatial extents must be even, got {h} x {w}")
    windows = x.reshape(h // 2, 2, w // 2, 2, c).transpose(0, 2, 1, 3, 4).reshape(h // 2, w // 2, 4, c)
    # argmax takes the first maximum, i.e. row-major scan order within the window
    idx = windows.argmax(axis=2)
    out = np.take_along_axis(windows, idx[:, :, None, :], axis=2)[:, :, 0, :]
    return out, (idx, x.shape)


def maxpool2_backward(cache, d_out: np.ndarray):
    idx, (h, w, c) = cache
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != (h // 2, w // 2, c):
        raise ShapeError(f"maxpool2 backward: gradient shape {d_out.shape} does not match output")
    d_win = np.zeros((h // 2, w // 2, 4, c), dtype=np.float64)
    np.put_along_axis(d_win, idx[:, :, None, :], d_out[:, :, None, :], axis=2)
    return d_win.reshape(h // 2, w // 2, 2, 2, c).transpose(0, 2, 1, 3, 4).reshape(h, w, c)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def relu_forward(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0), x


def relu_backward(cache, d_out: np.ndarray):
    # derivative defined as 0 at exactly 0
    return np.asarray(d_out, dtype=np.float64) * (cache > 0.0)


def sigmoid_forward(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out, out


def sigmoid_backward(cache, d_out: np.ndarray):
    s = cache
    return np.asarray(d_out, dtype=np.float64) * s * (1.0 - s)


# ---------------------------------------------------------------------------
# Dense, dropout, global average pooling
# ---------------------------------------------------------------------------

def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if x.ndim != 1 or w.ndim != 2 or x.shape[0] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"dense: incompatible shapes x{x.shape}, w{w.shape}, b{b.shape}")
    return x @ w + b, (x, w)


def dense_backward(cache, d_out: np.ndarray):
    x, w = cache
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != (w.shape[1],):
        raise ShapeError(f"dense backward: gradient shape {d_out.shape} does not match output ({w.shape[1]},)")
    return w @ d_out, np.outer(x, d_out), d_out.copy()


def dropout_forward(x: np.ndarray, rate: float, training: bool, rng=None, mask: np.ndarray | None = None):
    """Inverted dropout: survivors scaled by 1/(1-rate); identity in evaluation."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout: rate must be in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if not training or rate == 0.0:
        return x, (None, 1.0)
    if mask is None:
        if rng is None:
            raise ValueError("dropout: training mode needs an rng or an explicit mask")
        mask = rng.random(x.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    return x * mask * scale, (mask, scale)


def dropout_backward(cache, d_out: np.ndarray):
    mask, scale = cache
    d_out = np.asarray(d_out, dtype=np.float64)
    if mask is None:
        return d_out
    return d_out * mask * scale


def global_avg_pool_forward(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"global_avg_pool: expected H x W x C input, got {x.shape}")
    return x.mean(axis=(0, 1)), x.shape


def global_avg_pool_backward(cache, d_out: np.ndarray):
    h, w, c = cache
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != (c,):
        raise ShapeError(f"global_avg_pool backward: gradient shape {d_out.shape} does not match ({c},)")
    d_x = np.empty((h, w, c), dtype=np.float64)
    d_x[...] = d_out / (h * w)
    return d_x


# ---------------------------------------------------------------------------
# Finite-difference gradient checking
# ---------------------------------------------------------------------------

def gradient_check(fn, inputs: dict, h: float = 1e-5) -> dict:
    """Compare analytic gradients with central finite differences.

    ``fn(inputs, with_grads)`` must return ``(loss, grads)`` where ``grads``
    maps every key of ``inputs`` to an array of the same shape (``None`` is
    allowed when ``with_grads`` is False). The forward must be deterministic;
    check dropout with a frozen mask. Returns the max relative error per
    entry, with relative error |a - n| / max(1, |a|, |n|).
    """
    inputs = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
    loss0, analytic = fn(inputs, True)
    loss1, _ = fn(inputs, False)
    if loss0 != loss1:
        raise ValueError("gradient_check: fn is not deterministic; freeze dropout masks")
    report = {}
    for name, arr in inputs.items():
        if name not in analytic:
            raise KeyError(f"gradient_check: fn returned no gradient for {name!r}")
        grad = np.asarray(analytic[name], dtype=np.float64).reshape(-1)
        flat = arr.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up, _ = fn(inputs, False)
            flat[i] = orig - h
            down, _ = fn(inputs, False)
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            denom = max(1.0, abs(grad[i]), abs(numeric))
            worst = max(worst, abs(grad[i] - numeric) / denom)
        report[name] = worst
    return report


def max_error(report: dict) -> float:
    return max(report.values()) if report else 0.0
