"""Weighted K-NN digraph construction and the row-stochastic diffusion kernel.

Distances are squared Euclidean in embedding space.  Rows hold exactly K
neighbors sorted by (distance, index), which makes the brute-force and
tree-backed construction paths return identical graphs, ties included.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .data import EmbeddingSet
from .errors import ConfigurationError, ShapeError

SIGMA_FLOOR = 1e-12

# Tree construction wins while KD-trees still prune; above this the brute
# scan is both exact and faster.
TREE_MAX_DIM = 32

_ROW_BLOCK_ELEMS = 1 << 24


def _as_vectors(data) -> np.ndarray:
    if isinstance(data, EmbeddingSet):
        return data.vectors
    x = np.ascontiguousarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected an (n, d) matrix, got shape {x.shape}")
    return x


@dataclass
class KnnGraph:
    """Exact K-NN digraph: per-row neighbor indices and squared distances.

    Rows are sorted ascending by (distance, index); ``sigma`` is therefore the
    last distance of each row.
    """

    neighbors: np.ndarray  # (n, k) int64
    distances: np.ndarray  # (n, k) float64, squared Euclidean

    @property
    def n_points(self) -> int:
        return self.neighbors.shape[0]

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    @property
    def sigma(self) -> np.ndarray:
        """Per-row local scale: the largest stored squared distance."""
        return self.distances[:, -1]

    def validate(self) -> None:
        n, k = self.neighbors.shape
        if not 1 <= k < n:
            raise ConfigurationError(f"need 1 <= K < N, got K={k}, N={n}")
        if np.any(self.neighbors == np.arange(n)[:, None]):
            raise ConfigurationError("graph contains a self-loop")
        for i in range(n):
            if np.unique(self.neighbors[i]).size != k:
                raise ConfigurationError(f"row {i} has duplicate neighbors")
        if np.any(self.distances > self.sigma[:, None]):
            raise ConfigurationError("stored distance exceeds row scale")

    def adjacency(self) -> sp.csr_matrix:
        """Boolean adjacency of the digraph (row i -> its neighbors)."""
        n, k = self.neighbors.shape
        indptr = np.arange(n + 1, dtype=np.int64) * k
        return sp.csr_matrix(
            (np.ones(n * k, dtype=np.float64), self.neighbors.ravel(), indptr),
            shape=(n, n),
        )


@dataclass
class Kernel:
    """Row-stochastic diffusion operator M = D^-1 W over a weighted digraph."""

    m: sp.csr_matrix
    weights: sp.csr_matrix
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return self.m.shape[0]

    @classmethod
    def from_weights(cls, weights) -> "Kernel":
        """Build a kernel from an explicit weight matrix (tests, hand graphs)."""
        w = sp.csr_matrix(np.asarray(weights, dtype=np.float64)
                          if not sp.issparse(weights) else weights.astype(np.float64))
        if w.shape[0] != w.shape[1]:
            raise ShapeError(f"weight matrix must be square, got {w.shape}")
        if w.nnz and w.data.min() < 0:
            raise ConfigurationError("weights must be non-negative")
        deg = np.asarray(w.sum(axis=1)).ravel()
        if np.any(deg <= 0):
            raise ConfigurationError("every row needs positive total weight")
        m = sp.csr_matrix(w.multiply(1.0 / deg[:, None]))
        m.sort_indices()
        return cls(m=m, weights=w, degrees=deg)


def _block_sq_dists(centers: np.ndarray, cands: np.ndarray) -> np.ndarray:
    """Canonical squared distances: (b, d) centers vs (b, m, d) candidates.

    Every construction path funnels through this one reduction so that the
    brute and tree methods agree bit-for-bit.
    """
    diff = cands - centers[:, None, :]
    return np.einsum("bij,bij->bi", diff, diff)


def _select_sorted(d2_block: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    # candidates are in ascending index order, so a stable sort on distance
    # breaks ties toward the lower index
    order = np.argsort(d2_block, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(d2_block, order, axis=1)


def _brute_knn(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    n, d = x.shape
    neighbors = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k), dtype=np.float64)
    block = max(1, _ROW_BLOCK_ELEMS // (n * d))
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = _block_sq_dists(x[start:stop], np.broadcast_to(x, (stop - start, n, d)))
        rows = np.arange(start, stop)
        d2[rows - start, rows] = np.inf  # exclude self
        order, vals = _select_sorted(d2, k)
        neighbors[start:stop] = order
        dists[start:stop] = vals
    return neighbors, dists


def _tree_knn(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    n, d = x.shape
    tree = cKDTree(x)
    k_query = min(k + 2, n)
    tree_d, cand = tree.query(x, k=k_query)
    if k_query == 1:
        tree_d = tree_d[:, None]
        cand = cand[:, None]

    # recompute candidate distances with the canonical formula, then select
    # exactly as the brute path does
    d2 = _block_sq_dists(x, x[cand])
    d2[cand == np.arange(n)[:, None]] = np.inf
    idx_order = np.argsort(cand, axis=1)
    cand_s = np.take_along_axis(cand, idx_order, axis=1)
    d2_s = np.take_along_axis(d2, idx_order, axis=1)
    order, dists = _select_sorted(d2_s, k)
    neighbors = np.take_along_axis(cand_s, order, axis=1).astype(np.int64)

    if k_query == n:
        return neighbors, dists

    # A row is certified when its k-th candidate distance sits strictly below
    # the tree's search horizon; otherwise ties or duplicates may straddle the
    # horizon and the row is resolved exactly with a ball query.
    horizon = tree_d[:, -1] ** 2
    uncertain = ~(dists[:, -1] < horizon * (1.0 - 1e-9))
    for i in np.flatnonzero(uncertain):
        radius = math.sqrt(dists[i, -1]) * (1.0 + 1e-9) + 1e-300
        ball = np.asarray(tree.query_ball_point(x[i], radius), dtype=np.int64)
        ball = np.sort(ball[ball != i])
        bd2 = _block_sq_dists(x[i : i + 1], x[ball][None, :, :])[0]
        order_i = np.argsort(bd2, kind="stable")[:k]
        neighbors[i] = ball[order_i]
        dists[i] = bd2[order_i]
    return neighbors, dists


def build_knn_graph(data, k: int, method: str = "auto") -> KnnGraph:
    """Exact K nearest neighbors under squared Euclidean distance.

    ``method`` is one of ``brute``, ``tree``, or ``auto`` (tree for dimension
    up to TREE_MAX_DIM, brute above).  Both explicit methods return identical
    graphs; distance ties are broken toward the lower index.
    """
    x = _as_vectors(data)
    n = x.shape[0]
    if not 1 <= k < n:
        raise ConfigurationError(f"need 1 <= K < N, got K={k}, N={n}")
    if method == "auto":
        method = "tree" if x.shape[1] <= TREE_MAX_DIM else "brute"
    if method == "brute":
        neighbors, dists = _brute_knn(x, k)
    elif method == "tree":
        neighbors, dists = _tree_knn(x, k)
    else:
        raise ConfigurationError(f"unknown method {method!r} (brute|tree|auto)")
    return KnnGraph(neighbors=neighbors, distances=dists)


def compute_kernel(graph: KnnGraph, symmetrize: bool = False) -> Kernel:
    """Exponential similarity weights with per-row scale, normalized row-stochastic.

    W_ij = exp(-rho_ij / sigma_i) on stored edges, sigma_i clamped below by
    SIGMA_FLOOR so duplicate points (sigma 0) degrade to uniform weights.
    ``symmetrize`` averages W with its transpose before normalizing, for the
    quadratic-energy reading of the fixed point; the default keeps the
    digraph exactly as constructed.
    """
    n, k = graph.neighbors.shape
    sigma = np.maximum(graph.sigma, SIGMA_FLOOR)
    w = np.exp(-graph.distances / sigma[:, None])
    indptr = np.arange(n + 1, dtype=np.int64) * k
    weights = sp.csr_matrix((w.ravel(), graph.neighbors.ravel().copy(), indptr), shape=(n, n))
    if symmetrize:
        weights = sp.csr_matrix((weights + weights.T) * 0.5)
    weights.sort_indices()
    degrees = np.asarray(weights.sum(axis=1)).ravel()
    m = sp.csr_matrix(weights.multiply(1.0 / degrees[:, None]))
    m.sort_indices()
    return Kernel(m=m, weights=weights, degrees=degrees)


def weak_components(adjacency: sp.spmatrix) -> tuple[np.ndarray, int]:
    """Weakly-connected component labels and count for a sparse digraph."""
    count, labels = connected_components(adjacency, directed=True, connection="weak")
    return labels, int(count)


def connectivity_report(graph: KnnGraph) -> tuple[np.ndarray, int]:
    """Component labels plus component count; count == 1 means connected."""
    return weak_components(graph.adjacency())


def suggest_params(n: int, k: int | None = None) -> tuple[int, int]:
    """Heuristic (K, T): K ~ 2 ln N keeps the graph connected, T ~ log_K N.

    Pass ``k`` to keep a chosen degree and only derive the diffusion time.
    """
    if n < 3:
        raise ConfigurationError(f"need at least 3 points, got {n}")
    if k is None:
        k = max(3, math.ceil(2.0 * math.log(n)))
    elif k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    k = min(k, n - 1)
    t = max(1, math.ceil(math.log(n) / math.log(k)))
    return k, t


def dump_graph_csv(graph: KnnGraph, path) -> None:
    """Debug dump: one row (i, j, rho, w, m) per stored edge."""
    sigma = np.maximum(graph.sigma, SIGMA_FLOOR)
    w = np.exp(-graph.distances / sigma[:, None])
    m = w / w.sum(axis=1, keepdims=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "rho", "w", "m"])
        for i in range(graph.n_points):
            for slot in range(graph.k):
                writer.writerow([
                    i,
                    int(graph.neighbors[i, slot]),
                    repr(float(graph.distances[i, slot])),
                    repr(float(w[i, slot])),
                    repr(float(m[i, slot])),
                ])
