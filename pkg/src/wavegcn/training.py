"""Full-batch SGD for small wavelet GCN / GCNII node classifiers."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .graph import DataError, Graph, gcn_propagation
from .layers import gcnii_beta
from .model import GradientTape, Linear, Model, WaveletGCN  # noqa: F401  (GradientTape re-exported)

TRACE_FIELDS = ("epoch", "loss", "train_acc", "val_acc")


def softmax_cross_entropy(logits, labels, mask):
    """Mean cross-entropy over ``mask`` and its gradient w.r.t. ``logits``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask, dtype=np.int64)
    if len(idx) == 0:
        raise DataError("empty mask")
    y = labels[idx]
    if np.any(y < 0) or np.any(y >= logits.shape[1]):
        raise DataError("label outside the class range")
    z = logits[idx] - logits[idx].max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -float(np.mean(logp[np.arange(len(idx)), y]))
    grad = np.zeros_like(logits)
    probs = np.exp(logp)
    probs[np.arange(len(idx)), y] -= 1.0
    grad[idx] = probs / len(idx)
    return loss, grad


def backward_wconv(grad_out, layer: WaveletGCN):
    """Gradients of one wavelet layer from its last forward tape.

    Returns ``(grads, grad_in, grad_f0)`` where ``grads`` has ``weight`` and,
    when quantized, ``w_clip``/``x_clip``/``c_clip``.
    """
    if layer.tape is None:
        raise DataError("layer has no forward tape")
    if np.shape(grad_out) != layer.tape["z"].shape:
        raise DataError("gradient shape does not match the taped forward output")
    gx, gf0 = layer.backward(grad_out)
    return layer.grads, gx, gf0


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.01
    weight_decay: float = 5e-4
    seed: int = 0
    bits_w: int | None = 8
    bits_a: int | None = 8
    alpha: float = 1.0
    levels: int = 3
    hidden: int = 16
    depth: int = 2
    spatial: str = "gcnii"
    alpha_l: float = 0.1
    lam: float = 0.1
    weight_norm: bool = True
    val_fraction: float = 0.2
    freeze_hierarchy: bool = False

    def __post_init__(self):
        if self.epochs <= 0:
            raise DataError("epochs must be positive")
        if self.lr < 0:
            raise DataError("learning rate must be non-negative")


def build_model(c_in: int, n_classes: int, cfg: TrainConfig) -> Model:
    """Full-precision input/output projections around ``cfg.depth`` quantized wavelet layers."""
    rng = np.random.default_rng(cfg.seed)
    out = [Linear.init(rng, c_in, cfg.hidden, "relu")]
    for l in range(1, cfg.depth + 1):
        w = Linear.init(rng, cfg.hidden, cfg.hidden).weight
        layer = WaveletGCN(w, cfg.spatial, cfg.alpha, cfg.levels, cfg.bits_w, cfg.bits_a,
                           cfg.alpha_l, gcnii_beta(cfg.lam, l), cfg.weight_norm)
        layer.freeze_hierarchy = cfg.freeze_hierarchy
        out.append(layer)
    out.append(Linear.init(rng, cfg.hidden, n_classes, "none"))
    return Model(out)


def split_labeled(labels, val_fraction: float, seed: int):
    labels = np.asarray(labels)
    labeled = np.flatnonzero(labels >= 0)
    perm = np.random.default_rng(seed).permutation(labeled)
    n_val = int(round(val_fraction * len(labeled)))
    train = np.zeros(len(labels), bool)
    val = np.zeros(len(labels), bool)
    train[perm[n_val:]] = True
    val[perm[:n_val]] = True
    return train, val


def accuracy(logits, labels, mask) -> float:
    if not np.any(mask):
        return float("nan")
    return float(np.mean(np.argmax(logits[mask], axis=1) == np.asarray(labels)[mask]))


def sgd_step(model: Model, lr: float, weight_decay: float) -> None:
    for layer in model.layers:
        g = layer.grads
        layer.weight -= lr * (g["weight"] + weight_decay * layer.weight)
        for key, q in layer.quantizers().items():
            if q is not None and f"{key}_clip" in g:
                q.clip = max(q.clip - lr * g[f"{key}_clip"], 1e-8)


def train_toy(g: Graph, f, labels, cfg: TrainConfig):
    """Train on the labeled nodes; returns ``(model, trace)`` with one dict per epoch."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != g.n:
        raise DataError("one label per node is required")
    n_classes = int(labels.max()) + 1
    if n_classes < 2:
        raise DataError("at least two classes are required")
    train, val = split_labeled(labels, cfg.val_fraction, cfg.seed)
    model = build_model(np.shape(f)[1], n_classes, cfg)
    P = gcn_propagation(g)
    trace = []
    for epoch in range(cfg.epochs):
        logits = model.forward(g, f, cfg.seed, P)
        loss, grad = softmax_cross_entropy(logits, labels, train)
        trace.append({"epoch": epoch, "loss": loss,
                      "train_acc": accuracy(logits, labels, train),
                      "val_acc": accuracy(logits, labels, val)})
        model.backward(grad)
        sgd_step(model, cfg.lr, cfg.weight_decay)
    return model, trace


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_FIELDS)
    for row in trace:
        w.writerow([row["epoch"]] + [repr(float(row[k])) for k in TRACE_FIELDS[1:]])
    return buf.getvalue()
