"""Vision projector: a two-layer GeLU MLP applied per token."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


@dataclass
class VisionProjectorParams:
    """fc1 (hidden, d_raw), fc2 (d, hidden) with biases."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def d_raw(self) -> int:
        return self.w1.shape[1]

    @property
    def d(self) -> int:
        return self.w2.shape[0]


@dataclass
class VisionCache:
    raw: np.ndarray
    pre_act: np.ndarray
    hidden: np.ndarray
    params: VisionProjectorParams


@dataclass
class VisionGrads:
    d_w1: np.ndarray
    d_b1: np.ndarray
    d_w2: np.ndarray
    d_b2: np.ndarray
    d_raw: np.ndarray


def init_vision_projector(
    d_raw: int, d: int, hidden: int | None = None, seed: int = 0
) -> VisionProjectorParams:
    if d_raw < 1 or d < 1:
        raise ValueError("dimensions must be >= 1")
    hidden = d if hidden is None else hidden
    rng = np.random.default_rng(seed)
    bound1 = 1.0 / np.sqrt(d_raw)
    bound2 = 1.0 / np.sqrt(hidden)
    return VisionProjectorParams(
        w1=rng.uniform(-bound1, bound1, size=(hidden, d_raw)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-bound2, bound2, size=(d, hidden)),
        b2=np.zeros(d),
    )


def vision_project(
    raw: np.ndarray, params: VisionProjectorParams, return_cache: bool = False
):
    """Project raw (T, N, d_raw) features into (T, N, d) visual tokens."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3 or raw.shape[2] != params.d_raw:
        raise ValueError(
            f"raw features must be (T, N, {params.d_raw}), got {raw.shape}"
        )
    pre = raw @ params.w1.T + params.b1
    hid = gelu(pre)
    out = hid @ params.w2.T + params.b2
    if not np.all(np.isfinite(out)):
        raise ValueError("vision projector produced non-finite output")
    if return_cache:
        return out, VisionCache(raw, pre, hid, params)
    return out


def vision_backward(cotangent: np.ndarray, cache: VisionCache) -> VisionGrads:
    if cache is None:
        raise ValueError("missing forward cache")
    g = np.asarray(cotangent, dtype=np.float64)
    params = cache.params
    d_hidden = g @ params.w2
    d_w2 = np.einsum("tnd,tnh->dh", g, cache.hidden)
    d_b2 = g.sum(axis=(0, 1))
    d_pre = d_hidden * gelu_grad(cache.pre_act)
    d_w1 = np.einsum("tnh,tnr->hr", d_pre, cache.raw)
    d_b1 = d_pre.sum(axis=(0, 1))
    d_raw = d_pre @ params.w1
    return VisionGrads(d_w1, d_b1, d_w2, d_b2, d_raw)
