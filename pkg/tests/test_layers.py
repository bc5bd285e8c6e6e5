import math

import numpy as np
import pytest

from wavegcn import haar, layers
from wavegcn.graph import DataError, Graph, gcn_propagation
from wavegcn.layers import (
    Conv1x1, EdgeConvCheap, WaveletConfig, WaveletConvLayer, WGCNIILayer,
    compressed_conv_v1, compressed_conv_v2, conv1x1, conv_then_compress, edge_conv,
    edge_conv_cheap, wavelet_context, wgcnii_layer,
)
from wavegcn.quantization import Quantizer

from conftest import dense_haar_oracle, random_graph


def loop_conv(f, K):
    n, c_in = f.shape
    out = np.zeros((n, K.shape[0]))
    for v in range(n):
        for o in range(K.shape[0]):
            for i in range(c_in):
                out[v, o] += K[o, i] * f[v, i]
    return out


def test_conv1x1_matches_triple_loop():
    rng = np.random.default_rng(0)
    f, K = rng.normal(size=(7, 4)), rng.normal(size=(3, 4))
    np.testing.assert_allclose(conv1x1(f, K), loop_conv(f, K), atol=1e-14)


def test_conv1x1_checks_channels():
    with pytest.raises(DataError):
        conv1x1(np.ones((3, 2)), np.ones((2, 3)))


def setup(n, c_in, c_out, alpha, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(n, rng)
    f = rng.normal(size=(n, c_in))
    layer = WaveletConvLayer(Conv1x1(rng.normal(size=(c_out, c_in))), WaveletConfig(alpha))
    return g, f, layer


@pytest.mark.parametrize("alpha", [1, 0.5, 0.25, 0.125])
def test_compressed_conv_matches_dense_formula(alpha):
    g, f, layer = setup(24, 5, 3, alpha, 1)
    ctx = wavelet_context(f, g, alpha)
    W = dense_haar_oracle(ctx.hierarchy)
    T = np.eye(24)[ctx.plan.kept]
    K = layer.conv.weight
    expected = W.T @ T.T @ (T @ W @ f) @ K.T
    np.testing.assert_allclose(compressed_conv_v1(f, layer, g, context=ctx), expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_conv_commutes_with_compression(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 120))
    alpha = float(rng.choice([1, 0.5, 0.25, 0.125]))
    g, f, layer = setup(n, int(rng.integers(1, 9)), int(rng.integers(1, 9)), alpha, seed)
    ctx = wavelet_context(f, g, alpha, seed=seed)
    a = compressed_conv_v1(f, layer, g, context=ctx)
    b = conv_then_compress(f, layer, g, context=ctx)
    np.testing.assert_allclose(a, b, atol=1e-10)
    if alpha == 1:
        np.testing.assert_allclose(a, conv1x1(f, layer.conv), atol=1e-10)


def test_builds_its_own_context_from_seed():
    g, f, layer = setup(30, 4, 2, 0.25, 2)
    a = compressed_conv_v1(f, layer, g, seed=5)
    b = compressed_conv_v1(f, layer, g, context=wavelet_context(f, g, 0.25, seed=5))
    np.testing.assert_array_equal(a, b)


def test_v2_composition():
    rng = np.random.default_rng(3)
    g = random_graph(20, rng)
    f = rng.normal(size=(20, 4))
    K1, K2 = rng.normal(size=(6, 4)), rng.normal(size=(3, 6))
    layer = WaveletConvLayer([Conv1x1(K1), Conv1x1(K2)], WaveletConfig(0.5), "v2")
    ctx = wavelet_context(f, g, 0.5)
    W = haar.dense_matrix(ctx.hierarchy)
    T = np.eye(20)[ctx.plan.kept]
    relu = lambda x: np.maximum(x, 0)  # noqa: E731
    expected = relu(W.T @ T.T @ (relu((T @ W @ f) @ K1.T) @ K2.T))
    np.testing.assert_allclose(compressed_conv_v2(f, layer, g, context=ctx), expected, atol=1e-12)


def test_layer_validation():
    with pytest.raises(DataError):
        WaveletConvLayer([Conv1x1(np.ones((2, 2))), Conv1x1(np.ones((2, 2)))], variant="v1")
    with pytest.raises(DataError):
        WaveletConvLayer([Conv1x1(np.ones((3, 2))), Conv1x1(np.ones((2, 2)))], variant="v2")
    with pytest.raises(DataError):
        WaveletConfig(0.5, quantizer=Quantizer(8, signed=False))


def test_quantized_coefficients_change_little():
    g, f, layer = setup(40, 4, 4, 0.5, 4)
    ctx = wavelet_context(f, g, 0.5)
    exact = compressed_conv_v1(f, layer, g, context=ctx)
    layer.config = WaveletConfig(0.5, quantizer=Quantizer(8, signed=True))
    approx = compressed_conv_v1(f, layer, g, context=ctx)
    assert np.max(np.abs(exact - approx)) < 0.1 * np.max(np.abs(exact))


def test_edge_conv_single_edge_by_hand():
    g = Graph.from_edges(2, [(0, 1)])
    f = np.array([[1.0], [3.0]])
    K = np.array([[1.0, 2.0]])  # out = f_i + 2 (f_i - f_j)
    out = edge_conv(f, g, K, activation=layers.identity)
    np.testing.assert_array_equal(out, [[-3.0], [7.0]])
    np.testing.assert_array_equal(edge_conv(f, g, K), [[0.0], [7.0]])


def test_edge_conv_isolated_node_and_mean():
    g = Graph.from_edges(3, [(0, 1), (0, 2)])
    f = np.array([[1.0], [2.0], [4.0]])
    K = np.array([[0.0, 1.0]])
    out = edge_conv(f, g, K, "mean", layers.identity)
    np.testing.assert_allclose(out, [[-2.0], [1.0], [3.0]])
    g2 = Graph.from_edges(3, [(0, 1)])
    assert edge_conv(f, g2, K, "max", layers.identity)[2, 0] == 0.0


@pytest.mark.parametrize("aggregator", ["max", "mean"])
def test_cheap_edge_conv_equals_edge_conv(aggregator, backend):
    rng = np.random.default_rng(6)
    g = random_graph(25, rng)
    f = rng.normal(size=(25, 3))
    K1, K2 = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    K = np.hstack([K1, K2])  # [K1 f_i + K2 (f_i - f_j)]
    a = edge_conv(f, g, K, aggregator)
    b = edge_conv_cheap(f, g, EdgeConvCheap(Conv1x1(K1), Conv1x1(K2), aggregator))
    np.testing.assert_allclose(a, b, atol=1e-12)
    c = edge_conv_cheap(f, g, EdgeConvCheap(Conv1x1(K1), Conv1x1(K2), aggregator), WaveletConfig(1.0))
    np.testing.assert_allclose(a, c, atol=1e-10)


def test_operation_counts_on_k4():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    rng = np.random.default_rng(7)
    f = rng.normal(size=(4, 2))
    K1, K2 = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    counter = {}
    edge_conv(f, g, np.hstack([K1, K2]), counter=counter)
    assert counter["multiplies"] == layers.edge_conv_multiplies(g, 2, 3) == 144
    counter = {}
    cheap = EdgeConvCheap(Conv1x1(K1), Conv1x1(K2))
    edge_conv_cheap(f, g, cheap, counter=counter)
    assert counter["multiplies"] == layers.edge_conv_cheap_multiplies(4, 1.0, 2, 3) == 48
    counter = {}
    edge_conv_cheap(f, g, cheap, WaveletConfig(0.25), counter=counter)
    assert counter["multiplies"] == layers.edge_conv_cheap_multiplies(4, 0.25, 2, 3) == 12


def test_gcnii_beta_values():
    assert layers.gcnii_beta(0.1, 2) == math.log(1.05)
    assert abs(layers.gcnii_beta(0.1, 2) - 0.04879) < 1e-5
    assert layers.gcnii_beta(0.5, 1) == math.log(1.5)


def test_wgcnii_matches_dense_formula():
    rng = np.random.default_rng(8)
    g = random_graph(18, rng)
    f, f0 = rng.normal(size=(18, 4)), rng.normal(size=(18, 4))
    layer = WGCNIILayer.from_lambda(Conv1x1(rng.normal(size=(4, 4))), 0.1, 0.5, 1)
    P = gcn_propagation(g).toarray()
    S = 0.9 * P @ f + 0.1 * f0
    ctx = wavelet_context(S, g, 0.5)
    W = dense_haar_oracle(ctx.hierarchy)
    T = np.eye(18)[ctx.plan.kept]
    Kg = (1 - layer.beta_l) * np.eye(4) + layer.beta_l * layer.conv.weight
    expected = np.maximum(W.T @ T.T @ (T @ W @ S) @ Kg.T, 0)
    out = wgcnii_layer(f, f0, g, layer, WaveletConfig(0.5), context=ctx)
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_wgcnii_needs_square_weight_and_matching_f0():
    layer = WGCNIILayer(Conv1x1(np.ones((2, 3))))
    with pytest.raises(DataError):
        layer.mixing_weight()
    g = Graph.from_edges(2, [(0, 1)])
    with pytest.raises(DataError):
        wgcnii_layer(np.ones((2, 2)), np.ones((2, 3)), g, WGCNIILayer(Conv1x1(np.eye(2))))


@pytest.mark.parametrize("bits,alpha,total", [
    (8, 1, 4), (4, 1, 8), (2, 1, 16), (1, 1, 32),
    (8, 1 / 2, 8), (8, 1 / 4, 16), (8, 1 / 8, 32), (8, 1 / 16, 64),
])
def test_activation_compression(bits, alpha, total):
    assert layers.count_activation_compression(bits, alpha) == total
