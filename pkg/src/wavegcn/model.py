"""Network layers with cached forward state and closed-form backward passes.

Quantizers use the straight-through estimator: rounding is the identity in the
backward pass, saturated entries pass no gradient, and each clip value gets
the summed d(x_b)/d(alpha) contributions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import haar, layers, shrinkage
from .graph import DataError, Graph, gcn_propagation
from .quantization import (
    Quantizer,
    clip_gradient,
    fake_quantize,
    ste_mask,
    weight_normalize,
    weight_normalize_backward,
)

SPATIAL_BY_KIND = {"wconv_v1": "none", "wgcn": "gcn", "wgcnii": "gcnii"}
KINDS = ("linear", "wconv_v1", "wconv_v2", "edgeconv_cheap", "wgcn", "wgcnii")


@dataclass
class ForwardContext:
    graph: Graph
    seed: int = 0
    P: object = None
    f0: np.ndarray | None = None

    def propagation(self):
        if self.P is None:
            self.P = gcn_propagation(self.graph)
        return self.P


@dataclass
class GradientTape:
    """Forward intermediates of one layer call; plan and hierarchy stay fixed for backward."""

    values: dict = field(default_factory=dict)
    context: layers.WaveletContext | None = None

    def __getitem__(self, key):
        return self.values[key]

    def __setitem__(self, key, value):
        self.values[key] = value


def _glorot(rng, c_out, c_in):
    lim = np.sqrt(6.0 / (c_in + c_out))
    return rng.uniform(-lim, lim, size=(c_out, c_in))


class _Quantized:
    """Fake-quantize on the way in; remember what backward needs."""

    @staticmethod
    def apply(x, q, tape, key):
        if q is None:
            return x
        xq = fake_quantize(x, q)
        tape[key + "_mask"] = ste_mask(x, q)
        tape[key + "_dclip"] = clip_gradient(x, q, xq)
        return xq

    @staticmethod
    def backward(g, q, tape, key, grads):
        if q is None:
            return g
        grads[key + "_clip"] = float(np.sum(g * tape[key + "_dclip"]))
        return g * tape[key + "_mask"]


class Linear:
    """Plain 1x1 convolution, kept at full precision (first and last layers)."""

    kind = "linear"

    def __init__(self, weight, activation: str = "relu"):
        self.weight = np.atleast_2d(np.asarray(weight, dtype=np.float64))
        self.activation = activation
        self.grads: dict = {}
        self.tape: GradientTape | None = None

    @classmethod
    def init(cls, rng, c_in, c_out, activation="relu"):
        return cls(_glorot(rng, c_out, c_in), activation)

    @property
    def dims(self):
        return self.weight.shape

    def quantizers(self):
        return {}

    def forward(self, x, ctx: ForwardContext):
        y = layers.conv1x1(x, self.weight)
        self.tape = GradientTape({"x": x, "y": y})
        return layers.relu(y) if self.activation == "relu" else y

    def backward(self, gout):
        t = self.tape
        gy = gout * (t["y"] > 0) if self.activation == "relu" else gout
        self.grads = {"weight": gy.T @ t["x"]}
        return gy @ self.weight, None


class WaveletGCN:
    """Compressed wavelet 1x1 conv with an optional GCN or GCNII spatial step.

    ``spatial``: "none" (``W^T T^T K T W x``), "gcn" (on ``P x``) or "gcnii"
    (on ``(1 - alpha_l) P x + alpha_l f0``, mixing with ``(1-beta) I + beta K``).
    """

    def __init__(self, weight, spatial="gcn", alpha=1.0, levels=haar.DEFAULT_LEVELS,
                 bits_w=None, bits_a=None, alpha_l=0.1, beta_l=0.1, weight_norm=False,
                 activation="relu", clips=(None, None, None)):
        if spatial not in ("none", "gcn", "gcnii"):
            raise DataError(f"unknown spatial op {spatial!r}")
        self.weight = np.atleast_2d(np.asarray(weight, dtype=np.float64))
        if spatial == "gcnii" and self.weight.shape[0] != self.weight.shape[1]:
            raise DataError("GCNII channel mixing needs a square weight")
        shrinkage._check_alpha(alpha)
        self.spatial = spatial
        self.alpha = float(alpha)
        self.levels = int(levels)
        self.bits_w = bits_w
        self.bits_a = bits_a
        self.alpha_l = float(alpha_l)
        self.beta_l = float(beta_l)
        self.weight_norm = bool(weight_norm)
        self.activation = activation
        cw, cx, cc = clips
        self.q_w = Quantizer(bits_w, True, cw) if bits_w else None
        self.q_x = Quantizer(bits_a, False, cx) if bits_a else None
        self.q_c = Quantizer(bits_a, True, cc) if bits_a else None
        self.frozen: layers.WaveletContext | None = None
        self.freeze_hierarchy = False
        self.grads: dict = {}
        self.tape: GradientTape | None = None

    @property
    def kind(self):
        return {v: k for k, v in SPATIAL_BY_KIND.items()}[self.spatial]

    @property
    def dims(self):
        return self.weight.shape

    def quantizers(self):
        return {"w": self.q_w, "x": self.q_x, "c": self.q_c}

    def mixing_weight(self, tape=None):
        w = weight_normalize(self.weight) if self.weight_norm else self.weight
        if tape is None:
            tape = GradientTape()
        wq = _Quantized.apply(w, self.q_w, tape, "w")
        if self.spatial == "gcnii":
            return (1.0 - self.beta_l) * np.eye(wq.shape[0]) + self.beta_l * wq
        return wq

    def forward(self, x, ctx: ForwardContext, context: layers.WaveletContext | None = None):
        tape = GradientTape()
        xq = _Quantized.apply(x, self.q_x, tape, "x")
        self._P = None if self.spatial == "none" else ctx.propagation()
        if self.spatial == "none":
            s = xq
        elif self.spatial == "gcn":
            s = self._P @ xq
        else:
            if ctx.f0 is None or ctx.f0.shape != xq.shape:
                raise DataError("GCNII layer needs f0 with the shape of its input")
            s = layers.gcnii_spatial(xq, ctx.f0, self._P, self.alpha_l)
        if context is None:
            context = self.frozen
        if context is None:
            context = layers.wavelet_context(s, ctx.graph, self.alpha, self.levels, ctx.seed)
            if self.freeze_hierarchy:
                self.frozen = context
        block = haar.forward(context.hierarchy, s)[context.plan.kept]
        bq = _Quantized.apply(block, self.q_c, tape, "c")
        k = self.mixing_weight(tape)
        z = layers._expand(bq @ k.T, context)
        tape.values.update(bq=bq, k=k, z=z)
        tape.context = context
        self.tape = tape
        return layers.relu(z) if self.activation == "relu" else z

    def backward(self, gout):
        """Return ``(grad_x, grad_f0)``; parameter gradients land in ``self.grads``."""
        t = self.tape
        if t is None:
            raise DataError("backward called before forward")
        ctx = t.context
        gz = gout * (t["z"] > 0) if self.activation == "relu" else gout
        # adjoint of W^T T^T is T W
        gblock = haar.forward(ctx.hierarchy, gz)[ctx.plan.kept]
        grads = {}
        gk = gblock.T @ t["bq"]
        gwq = self.beta_l * gk if self.spatial == "gcnii" else gk
        gw = _Quantized.backward(gwq, self.q_w, t, "w", grads)
        if self.weight_norm:
            gw = weight_normalize_backward(self.weight, gw)
        grads["weight"] = gw
        gbq = gblock @ t["k"]
        gb = _Quantized.backward(gbq, self.q_c, t, "c", grads)
        full = np.zeros((ctx.plan.n, gb.shape[1]))
        full[ctx.plan.kept] = gb
        gs = haar.inverse(ctx.hierarchy, full)
        gf0 = None
        if self.spatial == "none":
            gxq = gs
        elif self.spatial == "gcn":
            gxq = self._P.T @ gs
        else:
            gxq = (1.0 - self.alpha_l) * (self._P.T @ gs)
            gf0 = self.alpha_l * gs
        gx = _Quantized.backward(gxq, self.q_x, t, "x", grads)
        self.grads = grads
        return gx, gf0


class WaveletV2:
    """Several convs with ReLU in between inside one transform (inference only)."""

    kind = "wconv_v2"

    def __init__(self, weights, alpha=1.0, levels=haar.DEFAULT_LEVELS, bits_w=None, bits_a=None,
                 clips=(None, None, None)):
        self.weights = [np.atleast_2d(np.asarray(w, dtype=np.float64)) for w in weights]
        self.alpha, self.levels = float(alpha), int(levels)
        self.bits_w, self.bits_a = bits_w, bits_a
        cw, _, cc = clips
        self.q_w = Quantizer(bits_w, True, cw) if bits_w else None
        self.q_c = Quantizer(bits_a, True, cc) if bits_a else None

    @property
    def dims(self):
        return (self.weights[-1].shape[0], self.weights[0].shape[1])

    def quantizers(self):
        return {"w": self.q_w, "x": None, "c": self.q_c}

    def forward(self, x, ctx: ForwardContext):
        # one weight quantizer per layer, shared by the chained convs
        convs = [layers.Conv1x1(w, self.q_w) for w in self.weights]
        layer = layers.WaveletConvLayer(convs, layers.WaveletConfig(self.alpha, self.levels, self.q_c), "v2")
        return layers.compressed_conv_v2(x, layer, ctx.graph, ctx.seed)

    def backward(self, gout):
        raise NotImplementedError("training supports linear, wconv_v1, wgcn and wgcnii layers")


class EdgeConvCheapLayer:
    kind = "edgeconv_cheap"

    def __init__(self, k1, k2, aggregator="max", alpha=1.0, levels=haar.DEFAULT_LEVELS,
                 bits_w=None, bits_a=None, clips=(None, None, None)):
        self.weights = [np.atleast_2d(np.asarray(w, dtype=np.float64)) for w in (k1, k2)]
        self.aggregator = aggregator
        self.alpha, self.levels = float(alpha), int(levels)
        self.bits_w, self.bits_a = bits_w, bits_a
        cw, _, cc = clips
        self.q_w = Quantizer(bits_w, True, cw) if bits_w else None
        self.q_c = Quantizer(bits_a, True, cc) if bits_a else None

    @property
    def dims(self):
        return self.weights[0].shape

    def quantizers(self):
        return {"w": self.q_w, "x": None, "c": self.q_c}

    def forward(self, x, ctx: ForwardContext):
        cheap = layers.EdgeConvCheap(layers.Conv1x1(self.weights[0], self.q_w),
                                     layers.Conv1x1(self.weights[1], self.q_w), self.aggregator)
        cfg = layers.WaveletConfig(self.alpha, self.levels, self.q_c)
        return layers.edge_conv_cheap(x, ctx.graph, cheap, cfg, ctx.seed)

    def backward(self, gout):
        raise NotImplementedError("training supports linear, wconv_v1, wgcn and wgcnii layers")


class Model:
    """A stack of layers; GCNII layers read ``f0`` = output of layer 0."""

    def __init__(self, layer_list):
        self.layers = list(layer_list)
        if self.layers and getattr(self.layers[0], "spatial", None) == "gcnii":
            raise DataError("a GCNII layer cannot be the first layer")

    def forward(self, g: Graph, f, seed: int = 0, P=None):
        x = haar._as_matrix(f)
        ctx = ForwardContext(g, seed, P)
        for i, layer in enumerate(self.layers):
            ctx.seed = seed + i
            x = layer.forward(x, ctx)
            if i == 0:
                ctx.f0 = x
        return x

    def backward(self, gout):
        """Backpropagate ``gout``; per-layer parameter gradients land in ``layer.grads``."""
        g = gout
        gf0_total = None
        for i in range(len(self.layers) - 1, -1, -1):
            if i == 0 and gf0_total is not None:
                g = g + gf0_total
            g, gf0 = self.layers[i].backward(g)
            if gf0 is not None:
                gf0_total = gf0 if gf0_total is None else gf0_total + gf0
        return g


def _fmt(x):
    return "none" if x is None else repr(float(x))


def _bits(x):
    return "none" if not x else str(int(x))


def save_model(model: Model, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_model(model))


def format_model(model: Model) -> str:
    out = [f"layers: {len(model.layers)}"]
    for i, layer in enumerate(model.layers):
        c_out, c_in = layer.dims
        q = layer.quantizers()
        clip = lambda key: q.get(key).clip if q.get(key) is not None else None  # noqa: E731
        out.append(f"layer {i} {layer.kind}")
        out.append(f"dims {c_out} {c_in}")
        out.append(f"alpha {_fmt(getattr(layer, 'alpha', 1.0))}")
        out.append(f"levels {getattr(layer, 'levels', haar.DEFAULT_LEVELS)}")
        out.append(f"bits {_bits(getattr(layer, 'bits_w', None))} {_bits(getattr(layer, 'bits_a', None))}")
        out.append(f"clip {_fmt(clip('w'))} {_fmt(clip('x'))} {_fmt(clip('c'))}")
        if isinstance(layer, WaveletGCN):
            out.append(f"gcnii {_fmt(layer.alpha_l)} {_fmt(layer.beta_l)}")
            out.append(f"weight_norm {int(layer.weight_norm)}")
        if isinstance(layer, (Linear, WaveletGCN)):
            out.append(f"activation {layer.activation}")
        if isinstance(layer, EdgeConvCheapLayer):
            out.append(f"aggregator {layer.aggregator}")
        weights = getattr(layer, "weights", None) or [layer.weight]
        out.append(f"weights {len(weights)}")
        for w in weights:
            out.append(f"matrix {w.shape[0]} {w.shape[1]}")
            out += [" ".join(repr(float(v)) for v in row) for row in w]
    return "\n".join(out) + "\n"


def _num(tok):
    return None if tok == "none" else float(tok)


def _int_or_none(tok):
    return None if tok == "none" else int(tok)


def load_model(path) -> Model:
    with open(path) as fh:
        lines = [(k + 1, ln.split()) for k, ln in enumerate(fh) if ln.strip()]
    pos = 0

    def take(key=None):
        nonlocal pos
        if pos >= len(lines):
            raise DataError("unexpected end of model file")
        lineno, tok = lines[pos]
        pos += 1
        if key is not None and (not tok or tok[0] != key):
            raise DataError(f"line {lineno}: expected '{key}'")
        return lineno, tok

    try:
        lineno, tok = take("layers:")
        count = int(tok[1])
        model_layers = []
        for _ in range(count):
            lineno, tok = take("layer")
            kind = tok[2]
            if kind not in KINDS:
                raise DataError(f"line {lineno}: unknown layer kind {kind!r}")
            opts = {}
            while pos < len(lines) and lines[pos][1][0] != "weights":
                _, t = take()
                opts[t[0]] = t[1:]
            _, t = take("weights")
            mats = []
            for _ in range(int(t[1])):
                _, t = take("matrix")
                r, c = int(t[1]), int(t[2])
                rows = []
                for _ in range(r):
                    ln, vals = take()
                    if len(vals) != c:
                        raise DataError(f"line {ln}: expected {c} weights")
                    rows.append([float(v) for v in vals])
                mats.append(np.array(rows, dtype=np.float64).reshape(r, c))
            model_layers.append(_build_layer(kind, opts, mats))
    except (ValueError, IndexError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed model file near line {lines[min(pos, len(lines)) - 1][0]}: {exc}") from None
    return Model(model_layers)


def _build_layer(kind, opts, mats):
    alpha = float(opts.get("alpha", ["1.0"])[0])
    levels = int(opts.get("levels", [str(haar.DEFAULT_LEVELS)])[0])
    bw, ba = (_int_or_none(x) for x in opts.get("bits", ["none", "none"]))
    clips = tuple(_num(x) for x in opts.get("clip", ["none"] * 3))
    if kind == "linear":
        return Linear(mats[0], opts.get("activation", ["relu"])[0])
    if kind in SPATIAL_BY_KIND:
        al, bl = (float(x) for x in opts.get("gcnii", ["0.1", "0.1"]))
        return WaveletGCN(mats[0], SPATIAL_BY_KIND[kind], alpha, levels, bw, ba, al, bl,
                          bool(int(opts.get("weight_norm", ["0"])[0])),
                          opts.get("activation", ["relu"])[0], clips)
    if kind == "wconv_v2":
        return WaveletV2(mats, alpha, levels, bw, ba, clips)
    return EdgeConvCheapLayer(mats[0], mats[1], opts.get("aggregator", ["max"])[0], alpha, levels,
                              bw, ba, clips)
