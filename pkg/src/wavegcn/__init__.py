"""Compressed graph Haar wavelet convolutions for graph neural networks."""
from ._backend import BACKEND
from .graph import DataError, Graph, gcn_propagation, knn_graph, load_features, load_graph
from .haar import HaarHierarchy, build_hierarchy, forward, inverse
from .matching import PairGraph, coarsen_graph, edge_dissimilarity, greedy_match
from .shrinkage import ShrinkagePlan, compress_reconstruct, gather, scatter, select_topk

__all__ = [
    "BACKEND", "DataError", "Graph", "HaarHierarchy", "PairGraph", "ShrinkagePlan",
    "build_hierarchy", "coarsen_graph", "compress_reconstruct", "edge_dissimilarity",
    "forward", "gather", "gcn_propagation", "greedy_match", "inverse", "knn_graph",
    "load_features", "load_graph", "scatter", "select_topk",
]
__version__ = "0.1.0"
