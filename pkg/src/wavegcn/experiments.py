"""Compression-vs-error sweep and activation bandwidth accounting."""
from __future__ import annotations

import csv
import io

import numpy as np

from . import haar, shrinkage
from .layers import count_activation_compression
from .model import Linear, Model
from .quantization import Quantizer, fake_quantize

SCHEMES = ("uniform-quant", "haar-joint", "haar-individual", "haar-joint+8bit", "haar-individual+8bit")
SWEEP_FIELDS = ("scheme", "compression_ratio", "alpha", "bits", "mse")
COEF_BITS = 8


def _quant(x, bits):
    q = Quantizer(bits, signed=True)
    return fake_quantize(x, q)


def mse_sweep(g, f, levels: int = haar.DEFAULT_LEVELS, seed: int = 0, qs=range(1, 8)):
    """MSE of each scheme at compression ratios 2^q.

    The uniform arm spends 32 / 2^q bits per value and is skipped below one
    bit. Haar arms keep ceil(2^-q n) rows (joint) or entries per channel
    (individual); the "+8bit" arms also quantize the kept coefficients.
    """
    f = haar._as_matrix(f)
    h = haar.build_hierarchy(g, f, levels, seed)
    p = haar.forward(h, f)
    rows = []
    for q in qs:
        ratio = 2**q
        alpha = 1.0 / ratio
        bits = 32 // ratio
        if 32 % ratio == 0 and bits >= 1:
            rows.append(("uniform-quant", ratio, 1.0, bits, shrinkage.mse(f, _quant(f, bits))))
        plan = shrinkage.select_topk(p, alpha)
        joint = np.zeros_like(p)
        joint[plan.kept] = p[plan.kept]
        indiv = shrinkage.shrink_per_channel(p, alpha)
        joint8 = np.zeros_like(p)
        joint8[plan.kept] = _quant(p[plan.kept], COEF_BITS)
        indiv8 = np.where(indiv != 0, _quant(indiv, COEF_BITS), 0.0)
        for name, coef, b in (("haar-joint", joint, 32), ("haar-individual", indiv, 32),
                              ("haar-joint+8bit", joint8, COEF_BITS),
                              ("haar-individual+8bit", indiv8, COEF_BITS)):
            rows.append((name, ratio, alpha, b, shrinkage.mse(f, haar.inverse(h, coef))))
    rows.sort(key=lambda r: (r[1], SCHEMES.index(r[0])))
    return rows


def sweep_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for scheme, ratio, alpha, bits, err in rows:
        w.writerow([scheme, ratio, repr(float(alpha)), bits, repr(float(err))])
    return buf.getvalue()


REPORT_FIELDS = ("layer", "kind", "c_in", "rows_dense", "rows_kept", "bits_a",
                 "dense_bytes", "compressed_bytes", "ratio")


def report_compression(model: Model | None, alpha: float, bits_a: int, n: int | None = None):
    """Activation bytes entering each layer's convolution, dense fp32 vs compressed.

    Full-precision ``linear`` layers (first and last) are not compressed.
    ``ratio`` is the nominal (32 / bits_a) / alpha; the ``total`` row covers the
    compressed layers.
    """
    nominal = count_activation_compression(bits_a, alpha)
    rows = []
    dense_total = comp_total = 0
    if model is not None and n is not None:
        kept = shrinkage.kept_count(alpha, n)
        for i, layer in enumerate(model.layers):
            c_in = layer.dims[1]
            dense = 4 * n * c_in
            if isinstance(layer, Linear):
                rows.append((i, layer.kind, c_in, n, n, 32, dense, dense, 1.0))
                continue
            comp = kept * c_in * bits_a / 8
            dense_total += dense
            comp_total += comp
            rows.append((i, layer.kind, c_in, n, kept, bits_a, dense, comp, nominal))
    rows.append(("total", "wavelet", "", n if n is not None else "", "", bits_a,
                 dense_total if rows else "", comp_total if rows else "", nominal))
    return rows


def report_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) else x for x in r])
    return buf.getvalue()
