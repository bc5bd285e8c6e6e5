"""Uniform quantization-aware operators with learnable clipping.

Signed tensors (weights, wavelet coefficients) use ``b - 1`` fractional bits on
``[-alpha, alpha * r_{b-1}]``; unsigned tensors (post-ReLU activations) use
``b`` bits on ``[0, alpha * r_b]``, where ``r_b = (2^b - 1) / 2^b``.
Rounding is half away from zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DataError

WEIGHT_NORM_EPS = 1e-6


def ratio(b: int) -> float:
    """r_b = (2^b - 1) / 2^b; exact in float64 for b <= 53."""
    return (2.0**b - 1.0) / 2.0**b


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def q_round(x, b: int):
    """Nearest multiple of 2^-b."""
    return np.ldexp(round_half_away(np.ldexp(np.asarray(x, dtype=np.float64), b)), -b)


@dataclass
class Quantizer:
    bits: int
    signed: bool
    clip: float | None = None  # set to max|x| on first use when None

    def __post_init__(self):
        if not 1 <= self.bits <= 32:
            raise DataError(f"bits must be in [1, 32], got {self.bits}")
        if self.clip is not None and not self.clip > 0:
            raise DataError("clip must be positive")

    @property
    def frac_bits(self) -> int:
        return self.bits - 1 if self.signed else self.bits

    @property
    def r(self) -> float:
        return ratio(self.frac_bits)

    @property
    def lower(self) -> float:
        return -self.clip if self.signed else 0.0

    @property
    def upper(self) -> float:
        return self.clip * self.r

    def initialize(self, x) -> None:
        if self.clip is None:
            m = float(np.max(np.abs(x))) if np.size(x) else 0.0
            self.clip = m if m > 0 else 1.0


@dataclass(frozen=True)
class QuantizedTensor:
    values: np.ndarray  # int64
    scale: float
    bits: int
    signed: bool

    def dequantize(self) -> np.ndarray:
        return self.scale * self.values


def _quantize(x, q: Quantizer):
    q.initialize(x)
    a = q.clip
    lo = -1.0 if q.signed else 0.0
    u = np.clip(np.asarray(x, dtype=np.float64) / a, lo, q.r)
    ints = round_half_away(np.ldexp(u, q.frac_bits))
    fake = a * np.ldexp(ints, -q.frac_bits)
    qt = QuantizedTensor(ints.astype(np.int64), float(np.ldexp(a, -q.frac_bits)), q.bits, q.signed)
    return fake, qt


def quantize_weights(W, q: Quantizer):
    """alpha * Q_{b-1}(clip(W / alpha, -1, r_{b-1})), plus its integer form."""
    if not q.signed:
        raise DataError("weight quantizer must be signed")
    return _quantize(W, q)


def quantize_activations(X, q: Quantizer):
    """alpha * Q_b(clip(X / alpha, 0, r_b)), plus its integer form."""
    if q.signed:
        raise DataError("activation quantizer must be unsigned")
    X = np.asarray(X, dtype=np.float64)
    if np.any(X < 0):
        raise DataError("activations must be non-negative for unsigned quantization")
    return _quantize(X, q)


def fake_quantize(x, q: Quantizer) -> np.ndarray:
    return _quantize(x, q)[0]


def clip_gradient(W, q: Quantizer, Wb=None) -> np.ndarray:
    """Per-entry d(W_b)/d(alpha) under the straight-through estimator.

    -1 below the range, r at or above the top, (W_b - W)/alpha inside.
    Callers sum the entries (weighted by the upstream gradient).
    """
    W = np.asarray(W, dtype=np.float64)
    if Wb is None:
        Wb = fake_quantize(W, q)
    a = q.clip
    out = (Wb - W) / a
    out[W >= a * q.r] = q.r
    if q.signed:
        out[W <= -a] = -1.0
    else:
        # the unsigned range bottoms out at 0 independent of alpha
        out[W <= 0] = 0.0
    return out


def ste_mask(x, q: Quantizer) -> np.ndarray:
    """1 where the input lies strictly inside the clipping range, else 0."""
    x = np.asarray(x, dtype=np.float64)
    inside = x < q.upper
    if q.signed:
        inside &= x > q.lower
    return inside.astype(np.float64)


def weight_normalize(W, eps: float = WEIGHT_NORM_EPS) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    return (W - W.mean()) / (W.std() + eps)


def weight_normalize_backward(W, grad, eps: float = WEIGHT_NORM_EPS) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    centered = W - W.mean()
    sigma = W.std()
    denom = sigma + eps
    g = (grad - grad.mean()) / denom
    if sigma > 0:
        g -= np.sum(grad * centered) / (denom**2 * sigma * W.size) * centered
    return g
