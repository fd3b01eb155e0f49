"""Sparse undirected graph storage and adjacency normalization.

Graphs are stored in CSR form (indptr / indices / weights) with neighbor
lists sorted ascending, which fixes the floating-point accumulation order
and makes every downstream computation bit-reproducible. Both structures
are frozen after construction and safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, InputError

SYMMETRIC = "symmetric"
ROW_STOCHASTIC = "row-stochastic"
NORMALIZATION_MODES = (SYMMETRIC, ROW_STOCHASTIC)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph without self-loops or duplicate edges.

    ``indices[indptr[i]:indptr[i+1]]`` lists the neighbors of node ``i``
    in ascending order; ``degrees[i]`` is the row length.
    """

    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray

    @property
    def edge_count(self) -> int:
        return int(self.indices.size // 2)

    def neighbors(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node]:self.indptr[node + 1]]

    def edge_set(self) -> set[tuple[int, int]]:
        """All edges as (i, j) pairs with i < j."""
        src = np.repeat(np.arange(self.node_count), self.degrees)
        keep = src < self.indices
        return set(zip(src[keep].tolist(), self.indices[keep].tolist()))


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """Graph weights rescaled by node degrees; same sparsity pattern as Graph.

    ``mode`` is "symmetric" (w_ij = 1/sqrt(d_i d_j)) or "row-stochastic"
    (w_ij = 1/d_i, rows summing to 1). Isolated nodes keep empty rows.
    """

    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    mode: str
    _matrix: sp.csr_matrix = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self._matrix is None:
            n = self.node_count
            mat = sp.csr_matrix(
                (self.weights, self.indices, self.indptr), shape=(n, n), copy=False
            )
            object.__setattr__(self, "_matrix", mat)

    def matrix(self) -> sp.csr_matrix:
        """scipy view over the CSR arrays (no copy)."""
        return self._matrix

    def row_sums(self) -> np.ndarray:
        src = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
        return np.bincount(src, weights=self.weights, minlength=self.node_count)

    def with_weights(self, weights: np.ndarray) -> "NormalizedAdjacency":
        return NormalizedAdjacency(
            self.node_count, self.indptr, self.indices, _freeze(weights), self.mode
        )

    def dense(self) -> np.ndarray:
        return self._matrix.toarray()


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """k-means output: per-node cluster ids in [0, k), centroids and inertia."""

    labels: np.ndarray
    centroids: np.ndarray
    inertia: float

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def build_graph(edge_list, node_count: int) -> Graph:
    """Build a deduplicated symmetric CSR graph from an (i, j) pair sequence.

    Duplicate pairs and both orientations collapse to a single undirected
    edge. Self-loops and out-of-range indices are rejected.
    """
    if node_count < 0:
        raise InputError(f"node_count must be non-negative, got {node_count}")
    pairs = np.asarray(list(edge_list), dtype=np.int64)
    if pairs.size == 0:
        pairs = pairs.reshape(0, 2)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise InputError("edge list must be a sequence of (i, j) pairs")

    if pairs.shape[0]:
        bad = (pairs < 0) | (pairs >= node_count)
        if bad.any():
            i, j = pairs[bad.any(axis=1)][0]
            raise InputError(
                f"edge ({i}, {j}) references a node outside [0, {node_count})"
            )
        loops = pairs[:, 0] == pairs[:, 1]
        if loops.any():
            i, j = pairs[loops][0]
            raise InputError(f"self-loop ({i}, {j}) is not allowed")

    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    uniq = np.unique(lo * node_count + hi) if pairs.shape[0] else np.empty(0, np.int64)
    lo, hi = uniq // node_count, uniq % node_count

    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]

    degrees = np.bincount(src, minlength=node_count).astype(np.int64)
    indptr = np.zeros(node_count + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    return Graph(node_count, _freeze(indptr), _freeze(dst), _freeze(degrees))


def normalize(graph: Graph, mode: str = SYMMETRIC) -> NormalizedAdjacency:
    """Degree-normalize the adjacency; the sparsity pattern is unchanged."""
    if mode not in NORMALIZATION_MODES:
        raise ConfigError(f"unknown normalization mode {mode!r}; use one of {NORMALIZATION_MODES}")
    deg = graph.degrees.astype(np.float64)
    src = np.repeat(np.arange(graph.node_count), graph.degrees)
    dst = graph.indices
    if mode == SYMMETRIC:
        weights = 1.0 / np.sqrt(deg[src] * deg[dst])
    else:
        weights = 1.0 / deg[src]
    return NormalizedAdjacency(
        graph.node_count, graph.indptr, graph.indices, _freeze(weights), mode
    )


def reweight_edges(
    adj: NormalizedAdjacency,
    assignment: ClusterAssignment,
    alpha: float,
    beta: float,
    renormalize: bool = True,
) -> NormalizedAdjacency:
    """Scale intra-cluster weights by alpha and inter-cluster weights by beta.

    Weights are clipped to <= 1 afterwards. With ``renormalize`` (the
    default), every row whose sum exceeds 1 is rescaled back to sum 1;
    the rescale factor applied to entry (i, j) is min(scale_i, scale_j),
    which keeps the matrix symmetric and caps all row sums at 1 -- the
    contraction property the propagation stage relies on.
    """
    if not alpha > 1:
        raise ConfigError(f"alpha must be > 1 (intra-cluster boost), got {alpha}")
    if not 0 < beta < 1:
        raise ConfigError(f"beta must lie in (0, 1) (inter-cluster damping), got {beta}")
    labels = np.asarray(assignment.labels)
    if labels.shape[0] != adj.node_count:
        raise InputError(
            f"assignment covers {labels.shape[0]} nodes, graph has {adj.node_count}"
        )

    src = np.repeat(np.arange(adj.node_count), np.diff(adj.indptr))
    same = labels[src] == labels[adj.indices]
    weights = adj.weights * np.where(same, alpha, beta)
    np.minimum(weights, 1.0, out=weights)

    if renormalize:
        sums = np.bincount(src, weights=weights, minlength=adj.node_count)
        scale = np.ones(adj.node_count)
        over = sums > 1.0
        scale[over] = 1.0 / sums[over]
        weights = weights * np.minimum(scale[src], scale[adj.indices])

    return adj.with_weights(weights)
