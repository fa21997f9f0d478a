"""Erdős–Rényi graphs G(n, p) and the structural queries the harness needs."""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from hamring.randomness import RandomSource

# per-pair Bernoulli sampling up to this size, geometric skipping above
DENSE_SAMPLING_LIMIT = 1 << 14
_ROW_CHUNK = 256


def log2ceil(n: int) -> int:
    """⌈log2 n⌉ for n ≥ 1, exact on integers."""
    if n < 1:
        raise ValueError(f"log2ceil needs n >= 1, got {n}")
    return (n - 1).bit_length()


class Graph:
    """Immutable undirected simple graph on nodes 0..n-1."""

    def __init__(self, n: int, adjacency: np.ndarray):
        adjacency = np.array(adjacency, dtype=bool, copy=True)
        if adjacency.shape != (n, n):
            raise ValueError(f"adjacency must be {n}x{n}, got {adjacency.shape}")
        if np.any(np.diagonal(adjacency)):
            raise ValueError("self-loops are not allowed")
        if not np.array_equal(adjacency, adjacency.T):
            raise ValueError("adjacency must be symmetric")
        adjacency.setflags(write=False)
        self.n = n
        self.matrix = adjacency
        self.degree = adjacency.sum(axis=1).astype(np.int64)
        self.degree.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> Graph:
        adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) leaves the node range 0..{n - 1}")
            adj[u, v] = adj[v, u] = True
        return cls(n, adj)

    @classmethod
    def complete(cls, n: int) -> Graph:
        adj = np.ones((n, n), dtype=bool)
        np.fill_diagonal(adj, False)
        return cls(n, adj)

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = np.nonzero(self.matrix)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.n), out=indptr[1:])
        return indptr, cols.astype(np.int64)

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted neighbour ids of node i."""
        indptr, cols = self._csr
        return cols[indptr[i] : indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.matrix[i, j])

    @property
    def edge_count(self) -> int:
        return int(self.degree.sum() // 2)

    def edges(self):
        iu, ju = np.nonzero(np.triu(self.matrix, 1))
        return list(zip(iu.tolist(), ju.tolist()))

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and np.array_equal(self.matrix, other.matrix)

    def __hash__(self) -> int:
        return hash((self.n, np.packbits(self.matrix).tobytes()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.edge_count})"


def gen_gnp(n: int, p: float, src: RandomSource) -> Graph:
    """Sample G(n, p): every pair {i, j} independently with probability p."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = src.stream("edges")
    adj = np.zeros((n, n), dtype=bool)
    if n <= DENSE_SAMPLING_LIMIT:
        # one uniform per pair, row-major over the upper triangle
        for start in range(0, n, _ROW_CHUNK):
            stop = min(n, start + _ROW_CHUNK)
            block = rng.random((stop - start, n)) < p
            rows = np.arange(start, stop)[:, None]
            block &= np.arange(n)[None, :] > rows
            adj[start:stop] |= block
    elif p > 0.0:
        _geometric_fill(adj, n, p, rng)
    adj |= adj.T
    return Graph(n, adj)


def _geometric_fill(adj: np.ndarray, n: int, p: float, rng: np.random.Generator) -> None:
    # Batagelj–Brandes skipping over the linearised upper triangle
    total = n * (n - 1) // 2
    pos = -1
    while True:
        if p >= 1.0:
            gaps = np.ones(1 << 16, dtype=np.int64)
        else:
            gaps = rng.geometric(p, size=1 << 16).astype(np.int64)
        idx = pos + np.cumsum(gaps)
        idx = idx[idx < total]
        if idx.size:
            i, j = _unrank_pairs(idx, n)
            adj[i, j] = True
            pos = int(idx[-1])
        if idx.size < gaps.size:
            return


def _unrank_pairs(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # row i starts at offset i*n - i*(i+1)/2 - i ... solved by the quadratic formula
    kf = k.astype(np.float64)
    i = np.floor(n - 0.5 - np.sqrt((n - 0.5) ** 2 - 2.0 * kf)).astype(np.int64)
    start = i * (2 * n - i - 1) // 2
    # guard float rounding at row boundaries
    low = k < start
    i[low] -= 1
    start = i * (2 * n - i - 1) // 2
    high = k >= start + (n - i - 1)
    i[high] += 1
    start = i * (2 * n - i - 1) // 2
    j = k - start + i + 1
    return i, j


def p_formula(n: int) -> float:
    """Edge probability (log2 n)^1.5 / sqrt(n), capped at 1."""
    if n < 2:
        raise ValueError(f"p_formula needs n >= 2, got {n}")
    return min(1.0, math.log2(n) ** 1.5 / math.sqrt(n))


DISCONNECTED = "disconnected"


def empirical_diameter(g: Graph) -> int | str:
    """Exact diameter by simultaneous BFS from all nodes.

    Returns ``"disconnected"`` when some pair of nodes is unreachable.
    """
    n = g.n
    if n <= 1:
        return 0
    a = g.matrix.astype(np.float32)
    reached = np.eye(n, dtype=bool)
    for d in range(1, n):
        grown = reached | ((reached.astype(np.float32) @ a) > 0)
        if grown.all():
            return d
        if np.array_equal(grown, reached):
            return DISCONNECTED
        reached = grown
    return DISCONNECTED
