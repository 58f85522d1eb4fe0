"""Wavelet-based self-attention.

Queries come from the full-resolution feature map; Keys and Values come
from a channel-reduced copy pushed through the Haar DWT, so the KV token
count is a quarter of the query token count while the downsampling stays
invertible. The inverse transform of the same subbands is concatenated to
the attention heads before the output projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError
from .tensor import Tensor
from .wavelet import dwt2_stack, idwt2_stack


@dataclass
class WsmParams:
    w_d: Tensor        # (C, C/4) channel reduction before the DWT
    w_q: Tensor        # (C, C) query projection, identity at init
    kv_conv: Tensor    # (C, 2C) fused 1x1 conv producing K and V
    w_o: Tensor        # (C + C/4, C) output projection over heads + reconstruction
    n_heads: int

    @property
    def d_head(self) -> int:
        return self.w_q.shape[0] // self.n_heads


def _check_dims(c: int, n_heads: int):
    if c % 4:
        raise ConfigError(f"embed dim {c} must be divisible by 4")
    if c % n_heads:
        raise ConfigError(f"embed dim {c} must be divisible by n_heads={n_heads}")


def init_wsm_params(c: int, n_heads: int, rng: np.random.Generator) -> WsmParams:
    _check_dims(c, n_heads)

    def u(fan_in, shape):
        bound = 1.0 / math.sqrt(fan_in)
        return T.uniform(shape, -bound, bound, rng, requires_grad=True)

    return WsmParams(
        w_d=u(c, (c, c // 4)),
        w_q=T.eye(c, requires_grad=True),
        kv_conv=u(c, (c, 2 * c)),
        w_o=u(c + c // 4, (c + c // 4, c)),
        n_heads=n_heads,
    )


def wavelet_downsample(x: Tensor, w_d: Tensor) -> Tensor:
    """(..., H, W, C) -> (..., H/2, W/2, C): reduce channels to C/4, DWT, stack."""
    c = x.shape[-1]
    if c % 4:
        raise ConfigError(f"channel count {c} must be divisible by 4")
    return dwt2_stack(T.linear(x, w_d))


def wave_attention(x: Tensor, p: WsmParams, return_attn: bool = False,
                   include_reconstruction: bool = True):
    """Multi-head attention with wavelet-downsampled KV; shape-preserving.

    ``include_reconstruction=False`` zeroes the IDWT path (ablation hook).
    """
    h, w, c = x.shape[-3], x.shape[-2], x.shape[-1]
    _check_dims(c, p.n_heads)
    lead = x.shape[:-3]
    n_tok = h * w
    dh = c // p.n_heads

    x_hat = wavelet_downsample(x, p.w_d)                    # (..., H/2, W/2, C)
    q = T.linear(T.reshape(x, lead + (n_tok, c)), p.w_q)    # (..., HW, C)
    kv = T.linear(T.reshape(x_hat, lead + (n_tok // 4, c)), p.kv_conv)
    k = T.narrow(kv, -1, 0, c)
    v = T.narrow(kv, -1, c, c)
    if include_reconstruction:
        x_r = idwt2_stack(x_hat)                            # (..., H, W, C/4)
        x_r_tok = T.reshape(x_r, lead + (n_tok, c // 4))
    else:
        x_r_tok = T.zeros(lead + (n_tok, c // 4))

    heads = []
    attn_maps = []
    for i in range(p.n_heads):
        qi = T.narrow(q, -1, i * dh, dh)
        ki = T.narrow(k, -1, i * dh, dh)
        vi = T.narrow(v, -1, i * dh, dh)
        scores = T.scale(T.matmul(qi, T.transpose_last2(ki)), 1.0 / math.sqrt(dh))
        attn = T.softmax_rows(scores)                       # (..., HW, HW/4)
        if return_attn:
            attn_maps.append(attn.data.copy())
        heads.append(T.matmul(attn, vi))

    fused = T.concat(heads + [x_r_tok], axis=-1)            # (..., HW, C + C/4)
    out = T.reshape(T.linear(fused, p.w_o), lead + (h, w, c))
    if return_attn:
        return out, attn_maps
    return out
