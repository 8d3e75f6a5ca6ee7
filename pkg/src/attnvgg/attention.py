"""Soft attention gate.

The gate looks at a fine feature map ``x`` and a coarser gating signal ``g``
from deeper in the network, computes a per-pixel coefficient in [0, 1], and
rescales ``x`` by it. Both inputs are first projected by 1x1 convolutions to
a shared intermediate width; ``x`` is resampled down to the gating grid for
the additive join, and the coefficient map is resampled back up to ``x``'s
grid before the final rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .layers import (
    Parameter,
    conv2d_backward,
    conv2d_forward,
    relu_backward,
    relu_forward,
    sigmoid_backward,
    sigmoid_forward,
)
from .tensor_ops import bilinear_resize, bilinear_resize_backward, elementwise


@dataclass
class AttentionGateParams:
    """Learnable pieces of the gate.

    w_x projects the fine features (no bias), w_g/b_g project the gating
    signal, and psi/b_psi collapse the joined map to a single channel.
    """

    w_x: Parameter   # 1 x 1 x F_x x F_int
    w_g: Parameter   # 1 x 1 x F_g x F_int
    b_g: Parameter   # F_int
    psi: Parameter   # 1 x 1 x F_int x 1
    b_psi: Parameter  # scalar, stored as shape (1,)

    def as_list(self) -> list[Parameter]:
        return [self.w_x, self.w_g, self.b_g, self.psi, self.b_psi]

    @property
    def f_x(self) -> int:
        return self.w_x.value.shape[2]

    @property
    def f_g(self) -> int:
        return self.w_g.value.shape[2]

    @property
    def f_int(self) -> int:
        return self.w_x.value.shape[3]


@dataclass
class GateOutput:
    gated: np.ndarray         # H x W x F_x, equal to x * alpha_fine
    alpha_fine: np.ndarray    # H x W x 1
    alpha_coarse: np.ndarray  # Hg x Wg x 1


def init_attention_params(f_x: int, f_g: int, f_int: int, rng, sigma: float = 0.01,
                          prefix: str = "gate") -> AttentionGateParams:
    """Near-zero weights and zero biases, so the initial gate is neutral (alpha ~ 0.5)."""
    if f_int < 1:
        raise ValueError(f"intermediate width must be >= 1, got {f_int}")
    return AttentionGateParams(
        w_x=Parameter(f"{prefix}_wx", rng.normal(0.0, sigma, (1, 1, f_x, f_int))),
        w_g=Parameter(f"{prefix}_wg", rng.normal(0.0, sigma, (1, 1, f_g, f_int))),
        b_g=Parameter(f"{prefix}_bg", np.zeros(f_int)),
        psi=Parameter(f"{prefix}_psi", rng.normal(0.0, sigma, (1, 1, f_int, 1))),
        b_psi=Parameter(f"{prefix}_bpsi", np.zeros(1)),
    )


@dataclass
class _GateCache:
    conv_x: tuple
    conv_g: tuple
    relu: np.ndarray
    conv_psi: tuple
    sig: np.ndarray
    x: np.ndarray
    alpha_fine: np.ndarray
    gated_shape: tuple
    coarse_hw: tuple
    consumed: bool = False


def attention_forward(x: np.ndarray, g: np.ndarray, params: AttentionGateParams):
    """Compute gated features and attention maps; returns (GateOutput, cache)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if x.ndim != 3 or g.ndim != 3:
        raise ShapeError(f"attention: expected rank-3 inputs, got {x.shape} and {g.shape}")
    h, w, f_x = x.shape
    hg, wg, f_g = g.shape
    if h < hg or w < wg:
        raise ShapeError(f"attention: input grid {h} x {w} must be at least the gating grid {hg} x {wg}")
    if f_x != params.f_x:
        raise ShapeError(f"attention: input has {f_x} channels but w_x expects {params.f_x}")
    if f_g != params.f_g:
        raise ShapeError(f"attention: gating signal has {f_g} channels but w_g expects {params.f_g}")

    x_proj, conv_x_cache = conv2d_forward(x, params.w_x.value, None)
    x_coarse = bilinear_resize(x_proj, hg, wg)
    g_proj, conv_g_cache = conv2d_forward(g, params.w_g.value, params.b_g.value)
    joined, relu_cache = relu_forward(x_coarse + g_proj)
    q, conv_psi_cache = conv2d_forward(joined, params.psi.value, params.b_psi.value)
    alpha_coarse, sig_cache = sigmoid_forward(q)
    alpha_fine = bilinear_resize(alpha_coarse, h, w)
    gated = elementwise(x, alpha_fine, "mul")

    out = GateOutput(gated=gated, alpha_fine=alpha_fine, alpha_coarse=alpha_coarse)
    cache = _GateCache(
        conv_x=conv_x_cache,
        conv_g=conv_g_cache,
        relu=relu_cache,
        conv_psi=conv_psi_cache,
        sig=sig_cache,
        x=x,
        alpha_fine=alpha_fine,
        gated_shape=gated.shape,
        coarse_hw=(hg, wg),
    )
    return out, cache


@dataclass
class AttentionGateGrads:
    d_x: np.ndarray
    d_g: np.ndarray
    d_w_x: np.ndarray
    d_w_g: np.ndarray
    d_b_g: np.ndarray
    d_psi: np.ndarray
    d_b_psi: np.ndarray


def attention_backward(cache: _GateCache, d_gated: np.ndarray) -> AttentionGateGrads:
    """Chain rule through the whole gate, including both resampling adjoints."""
    d_gated = np.asarray(d_gated, dtype=np.float64)
    if cache.consumed:
        raise ValueError("attention cache already consumed by a previous backward call")
    if d_gated.shape != cache.gated_shape:
        raise ShapeError(
            f"attention backward: gradient shape {d_gated.shape} does not match gated output {cache.gated_shape}"
        )
    cache.consumed = True
    h, w, _ = cache.gated_shape
    hg, wg = cache.coarse_hw

    d_x_direct = d_gated * cache.alpha_fine
    d_alpha_fine = (d_gated * cache.x).sum(axis=2, keepdims=True)
    d_alpha_coarse = bilinear_resize_backward(d_alpha_fine, hg, wg)
    d_q = sigmoid_backward(cache.sig, d_alpha_coarse)
    d_joined, d_psi, d_b_psi = conv2d_backward(cache.conv_psi, d_q)
    d_pre = relu_backward(cache.relu, d_joined)
    d_g, d_w_g, d_b_g = conv2d_backward(cache.conv_g, d_pre)
    d_x_proj = bilinear_resize_backward(d_pre, h, w)
    d_x_from_proj, d_w_x, _ = conv2d_backward(cache.conv_x, d_x_proj)

    return AttentionGateGrads(
        d_x=d_x_direct + d_x_from_proj,
        d_g=d_g,
        d_w_x=d_w_x,
        d_w_g=d_w_g,
        d_b_g=d_b_g,
        d_psi=d_psi,
        d_b_psi=d_b_psi,
    )
