"""Channel-mixing layers applied inside the compressed wavelet domain.

Node features are ``n x c`` arrays; a 1x1 convolution with weight ``K``
(``c_out x c_in``) maps them to ``f @ K.T``. The compressed form
``W^T T^T K T W f`` runs that product on the ``ceil(alpha n)`` kept
coefficient rows only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend, haar, shrinkage
from .graph import DataError, Graph, gcn_propagation
from .quantization import Quantizer, fake_quantize, quantize_weights, weight_normalize


def relu(x):
    return np.maximum(x, 0.0)


def identity(x):
    return x


@dataclass
class Conv1x1:
    weight: np.ndarray  # c_out x c_in
    quantizer: Quantizer | None = None
    weight_norm: bool = False

    def __post_init__(self):
        self.weight = np.atleast_2d(np.asarray(self.weight, dtype=np.float64))
        if not np.all(np.isfinite(self.weight)):
            raise DataError("non-finite convolution weight")

    @property
    def c_out(self) -> int:
        return self.weight.shape[0]

    @property
    def c_in(self) -> int:
        return self.weight.shape[1]

    def effective_weight(self) -> np.ndarray:
        w = weight_normalize(self.weight) if self.weight_norm else self.weight
        if self.quantizer is not None:
            w = quantize_weights(w, self.quantizer)[0]
        return w


def _weight(k):
    return k.effective_weight() if isinstance(k, Conv1x1) else np.atleast_2d(np.asarray(k, dtype=np.float64))


def _matmul(f, w, counter=None):
    if f.shape[1] != w.shape[1]:
        raise DataError(f"input has {f.shape[1]} channels, weight expects {w.shape[1]}")
    if counter is not None:
        counter["multiplies"] = counter.get("multiplies", 0) + f.shape[0] * w.shape[0] * w.shape[1]
    return f @ w.T


def conv1x1(f, k, counter=None) -> np.ndarray:
    """Matrix product in channel space; ``k`` is a Conv1x1 or a raw weight."""
    return _matmul(haar._as_matrix(f), _weight(k), counter)


@dataclass
class WaveletConfig:
    alpha: float = 1.0
    levels: int = haar.DEFAULT_LEVELS
    quantizer: Quantizer | None = None  # signed, applied to the kept coefficient block

    def __post_init__(self):
        shrinkage._check_alpha(self.alpha)
        if self.quantizer is not None and not self.quantizer.signed:
            raise DataError("coefficient quantizer must be signed")


@dataclass
class WaveletConvLayer:
    convs: list[Conv1x1]
    config: WaveletConfig = field(default_factory=WaveletConfig)
    variant: str = "v1"

    def __post_init__(self):
        if isinstance(self.convs, Conv1x1):
            self.convs = [self.convs]
        if not self.convs:
            raise DataError("at least one convolution is required")
        if self.variant not in ("v1", "v2"):
            raise DataError(f"unknown variant {self.variant!r}")
        if self.variant == "v1" and len(self.convs) != 1:
            raise DataError("a v1 layer holds exactly one convolution")
        for a, b in zip(self.convs, self.convs[1:]):
            if b.c_in != a.c_out:
                raise DataError("chained convolution dimensions do not match")

    @property
    def conv(self) -> Conv1x1:
        return self.convs[0]

    @property
    def alpha(self) -> float:
        return self.config.alpha

    @property
    def levels(self) -> int:
        return self.config.levels


@dataclass(frozen=True)
class WaveletContext:
    """Hierarchy and shrinkage plan shared by every product on one input."""

    hierarchy: haar.HaarHierarchy
    plan: shrinkage.ShrinkagePlan


def wavelet_context(f, g: Graph, alpha: float, levels: int = haar.DEFAULT_LEVELS,
                    seed: int = 0, hierarchy=None) -> WaveletContext:
    h = hierarchy if hierarchy is not None else haar.build_hierarchy(g, f, levels, seed)
    plan = shrinkage.select_topk(haar.forward(h, f), alpha)
    return WaveletContext(h, plan)


def _compress(f, cfg, g, seed, context):
    f = haar._as_matrix(f)
    if context is None:
        context = wavelet_context(f, g, cfg.alpha, cfg.levels, seed)
    block = haar.forward(context.hierarchy, f)[context.plan.kept]
    if cfg.quantizer is not None:
        block = fake_quantize(block, cfg.quantizer)
    return block, context


def _expand(block, context):
    return haar.inverse(context.hierarchy, shrinkage.scatter(shrinkage.CompressedSignal(block, context.plan)))


def compressed_conv_v1(f, layer: WaveletConvLayer, g: Graph, seed: int = 0,
                       context: WaveletContext | None = None, counter=None) -> np.ndarray:
    """``W^T T^T K T W f``: the 1x1 conv runs on the dense kept block."""
    block, context = _compress(f, layer.config, g, seed, context)
    return _expand(conv1x1(block, layer.conv, counter), context)


def conv_then_compress(f, layer: WaveletConvLayer, g: Graph, seed: int = 0,
                       context: WaveletContext | None = None) -> np.ndarray:
    """``W^T T^T T W K f`` with the hierarchy and plan taken from ``f``."""
    f = haar._as_matrix(f)
    if context is None:
        context = wavelet_context(f, g, layer.alpha, layer.levels, seed)
    y = conv1x1(f, layer.conv)
    p = haar.forward(context.hierarchy, y)
    return _expand(p[context.plan.kept], context)


def compressed_conv_v2(f, layer: WaveletConvLayer, g: Graph, seed: int = 0,
                       context: WaveletContext | None = None, activation=relu) -> np.ndarray:
    """One transform around a chain of convs, with ``activation`` between them and after the inverse."""
    block, context = _compress(f, layer.config, g, seed, context)
    for k, conv in enumerate(layer.convs):
        block = conv1x1(block, conv)
        if k + 1 < len(layer.convs):
            block = activation(block)
    return activation(_expand(block, context))


def _aggregate(values, indptr, n, aggregator):
    if aggregator == "max":
        return _backend.kernels.segment_max(np.ascontiguousarray(values), indptr)
    if aggregator == "mean":
        out = np.zeros((n, values.shape[1]))
        deg = np.diff(indptr)
        nz = np.flatnonzero(deg)
        if len(nz):
            out[nz] = np.add.reduceat(values, indptr[nz], axis=0) / deg[nz, None]
        return out
    raise DataError(f"unknown aggregator {aggregator!r}")


def edge_conv(f, g: Graph, k, aggregator: str = "max", activation=relu, counter=None) -> np.ndarray:
    """Aggregate ``activation(K [f_i, f_i - f_j])`` over the neighbors j of each node i.

    ``K`` is ``c_out x 2 c_in``. Isolated nodes get a zero row.
    """
    f = haar._as_matrix(f)
    w = _weight(k)
    if w.shape[1] != 2 * f.shape[1]:
        raise DataError(f"edge conv weight needs {2 * f.shape[1]} input channels, has {w.shape[1]}")
    src, dst = g.directed_edges()
    x = np.concatenate([f[src], f[src] - f[dst]], axis=1)
    return _aggregate(activation(_matmul(x, w, counter)), g.indptr, g.n, aggregator)


@dataclass
class EdgeConvCheap:
    k1: Conv1x1
    k2: Conv1x1
    aggregator: str = "max"

    def __post_init__(self):
        if self.k1.weight.shape != self.k2.weight.shape:
            raise DataError("K1 and K2 must have the same shape")


def edge_conv_cheap(f, g: Graph, layer: EdgeConvCheap, wavelet: WaveletConfig | None = None,
                    seed: int = 0, context: WaveletContext | None = None, activation=relu,
                    counter=None) -> np.ndarray:
    """Aggregate ``activation(y_i + t_i - t_j)`` with ``y = K1 f`` and ``t = K2 f``.

    With ``wavelet`` set, both products run on one shared compressed block.
    """
    f = haar._as_matrix(f)
    if wavelet is None:
        y = conv1x1(f, layer.k1, counter)
        t = conv1x1(f, layer.k2, counter)
    else:
        block, context = _compress(f, wavelet, g, seed, context)
        y = _expand(conv1x1(block, layer.k1, counter), context)
        t = _expand(conv1x1(block, layer.k2, counter), context)
    src, dst = g.directed_edges()
    return _aggregate(activation(y[src] + t[src] - t[dst]), g.indptr, g.n, layer.aggregator)


def edge_conv_multiplies(g: Graph, c_in: int, c_out: int) -> int:
    """Multiplies of the plain edge conv: one ``c_out x 2 c_in`` product per directed edge."""
    return 2 * g.m * 2 * c_in * c_out


def edge_conv_cheap_multiplies(n: int, alpha: float, c_in: int, c_out: int) -> int:
    """Multiplies of the cheap form: two ``c_out x c_in`` products on ceil(alpha n) rows."""
    return 2 * shrinkage.kept_count(alpha, n) * c_in * c_out


def gcnii_beta(lam: float, layer_index: int) -> float:
    """log(lam / l + 1)."""
    return math.log(lam / layer_index + 1.0)


@dataclass
class WGCNIILayer:
    conv: Conv1x1
    alpha_l: float = 0.1
    beta_l: float = 0.1

    @classmethod
    def from_lambda(cls, conv, alpha_l: float, lam: float, layer_index: int) -> "WGCNIILayer":
        return cls(conv, alpha_l, gcnii_beta(lam, layer_index))

    def mixing_weight(self) -> np.ndarray:
        w = self.conv.effective_weight()
        if w.shape[0] != w.shape[1]:
            raise DataError("GCNII channel mixing needs a square weight")
        return (1.0 - self.beta_l) * np.eye(w.shape[0]) + self.beta_l * w


def gcnii_spatial(f, f0, P, alpha_l: float) -> np.ndarray:
    return (1.0 - alpha_l) * (P @ f) + alpha_l * f0


def wgcnii_layer(f, f0, g: Graph, layer: WGCNIILayer, wavelet: WaveletConfig | None = None,
                 seed: int = 0, context: WaveletContext | None = None, P=None,
                 activation=relu) -> np.ndarray:
    """``activation(W^T T^T K_gcnii T W S f)`` with the GCNII spatial step S."""
    f = haar._as_matrix(f)
    f0 = haar._as_matrix(f0)
    if f.shape != f0.shape:
        raise DataError("f and f0 must have the same shape")
    kg = layer.mixing_weight()
    if P is None:
        P = gcn_propagation(g)
    s = gcnii_spatial(f, f0, P, layer.alpha_l)
    wavelet = wavelet or WaveletConfig()
    block, context = _compress(s, wavelet, g, seed, context)
    return activation(_expand(conv1x1(block, kg), context))


def count_activation_compression(bits_a: float, alpha: float) -> float:
    """Total activation compression: (32 / bits) x (1 / alpha)."""
    if not 0 < bits_a <= 32:
        raise DataError("activation bits must be in (0, 32]")
    shrinkage._check_alpha(alpha)
    return (32.0 / bits_a) / alpha
