"""Synthetic graphs and signals, and label-file I/O."""
from __future__ import annotations

import numpy as np

from .graph import DataError, Graph, gcn_propagation, knn_graph


def gen_planted(n: int, communities: int = 2, p_in: float = 0.1, p_out: float = 0.01,
                seed: int = 0, channels: int = 16, noise: float = 1.0, separation: float = 1.0):
    """Stochastic block model with community-mean-plus-noise features.

    Community membership is drawn uniformly per node. The graph may be
    disconnected. Returns ``(graph, features, labels)``.
    """
    if not p_in > p_out:
        raise DataError("p_in must exceed p_out")
    if not (0 <= p_out and p_in <= 1):
        raise DataError("edge probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, communities, size=n)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    g = Graph.from_edges(n, np.stack([iu[keep], ju[keep]], axis=1))
    means = rng.normal(0.0, separation, size=(communities, channels))
    f = means[labels] + noise * rng.normal(size=(n, channels))
    return g, f, labels


def point_cloud_graph(n: int, k: int = 10, seed: int = 0, dim: int = 3) -> Graph:
    """kNN graph over uniform random points in the unit cube."""
    rng = np.random.default_rng(seed)
    return knn_graph(rng.random((n, dim)), k)


def smooth_features(g: Graph, channels: int = 16, steps: int = 10, seed: int = 0) -> np.ndarray:
    """Gaussian noise diffused ``steps`` times by the GCN propagation matrix."""
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(g.n, channels))
    P = gcn_propagation(g)
    for _ in range(steps):
        f = P @ f
    return f


def load_labels(path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise DataError(f"line {lineno}: label must be an integer") from None
    labels = np.asarray(out, dtype=np.int64)
    if np.any(labels < -1):
        raise DataError("labels must be >= -1 (-1 marks unlabeled nodes)")
    return labels


def save_labels(labels, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.writelines(f"{int(x)}\n" for x in labels)
