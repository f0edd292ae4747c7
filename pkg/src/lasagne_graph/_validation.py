"""Input coercion shared by the estimators and the CLI."""

import numpy as np
import scipy.sparse as sp

from .graph import CsrGraph


def check_graph(X) -> CsrGraph:
    """Accept a CsrGraph, a square sparse/dense adjacency, or an ``(m, 2)`` edge array."""
    if isinstance(X, CsrGraph):
        return X
    if hasattr(X, "edges") and hasattr(X, "nodes"):  # networkx-like
        nodes = list(X.nodes())
        index = {u: i for i, u in enumerate(nodes)}
        e = np.array([(index[a], index[b]) for a, b in X.edges()], dtype=np.int64)
        e = e.reshape(-1, 2)
        return CsrGraph.from_edges(e[:, 0], e[:, 1], len(nodes),
                                   tuple(str(u) for u in nodes))
    if sp.issparse(X):
        return CsrGraph.from_scipy(X)
    arr = np.asarray(X)
    if arr.ndim == 2 and arr.shape[1] == 2 and arr.shape[0] != 2:
        return CsrGraph.from_edges(arr[:, 0], arr[:, 1])
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        return CsrGraph.from_scipy(sp.coo_matrix(arr))
    raise TypeError(f"cannot interpret {type(X).__name__} of shape "
                    f"{getattr(arr, 'shape', None)} as a graph")


def check_nodes(nodes, num_nodes: int) -> np.ndarray:
    nodes = np.asarray(nodes)
    if nodes.dtype.kind not in "iu":
        raise TypeError("node ids must be integers")
    nodes = nodes.astype(np.int64).ravel()
    if nodes.size and (nodes.min() < 0 or nodes.max() >= num_nodes):
        raise IndexError(f"node ids must lie in [0, {num_nodes})")
    return nodes


def check_pairs(pairs, num_nodes: int) -> np.ndarray:
    pairs = np.asarray(pairs)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must have shape (m, 2)")
    return check_nodes(pairs, num_nodes).reshape(-1, 2)


def check_embedding(X) -> np.ndarray:
    X = np.asarray(getattr(X, "input_vecs", X), dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("embedding must be a 2-D array")
    if not np.isfinite(X).all():
        raise ValueError("embedding contains NaN or Inf")
    return X
