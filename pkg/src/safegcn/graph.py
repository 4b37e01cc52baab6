"""Sparse undirected graphs in CSR form and the symmetric GCN normalization.

The graph layer stores each undirected edge {u, v} as the two directed
entries (u, v) and (v, u), with column indices sorted inside every row.
All structures are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class SparseGraph:
    """Undirected graph as a CSR adjacency pattern (no values, no self loops)."""

    num_nodes: int
    row_offsets: np.ndarray  # int64, length num_nodes + 1
    col_indices: np.ndarray  # int64, one entry per directed edge

    def __post_init__(self):
        self.row_offsets.flags.writeable = False
        self.col_indices.flags.writeable = False

    @property
    def num_entries(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def num_edges(self) -> int:
        return self.num_entries // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, node: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[node]:self.row_offsets[node + 1]]

    def edge_pairs(self) -> np.ndarray:
        """All directed entries as an (entries, 2) array of (row, col)."""
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())
        return np.column_stack([rows, self.col_indices])

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        pairs = self.edge_pairs()
        a[pairs[:, 0], pairs[:, 1]] = 1.0
        return a


@dataclass(frozen=True)
class Propagator:
    """Symmetrically normalized augmented adjacency, ready for sparse products.

    Entry (i, j) is 1/sqrt(d_i * d_j) where d is the degree after adding a
    self loop to every node, so an isolated node carries the single entry 1.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray  # float64

    def __post_init__(self):
        self.row_offsets.flags.writeable = False
        self.col_indices.flags.writeable = False
        self.values.flags.writeable = False

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.num_nodes, self.num_nodes),
        )

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        rows = np.repeat(np.arange(self.num_nodes), np.diff(self.row_offsets))
        a[rows, self.col_indices] = self.values
        return a


@dataclass(frozen=True)
class NodeSubset:
    """Sorted, duplicate-free node indices over a parent graph."""

    nodes: np.ndarray  # int64, strictly increasing
    num_parent_nodes: int

    @staticmethod
    def of(parent: SparseGraph, nodes) -> "NodeSubset":
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.ndim != 1:
            raise ValueError("node subset must be one-dimensional")
        nodes = np.sort(nodes)
        if nodes.size and (nodes[0] < 0 or nodes[-1] >= parent.num_nodes):
            raise ValueError(
                f"subset index out of range for graph with {parent.num_nodes} nodes"
            )
        if np.any(np.diff(nodes) == 0):
            raise ValueError("node subset contains duplicate indices")
        return NodeSubset(nodes, parent.num_nodes)

    def __len__(self) -> int:
        return int(self.nodes.size)

    def local_index(self) -> np.ndarray:
        """Parent index -> local index map; -1 for nodes outside the subset."""
        local = np.full(self.num_parent_nodes, -1, dtype=np.int64)
        local[self.nodes] = np.arange(len(self), dtype=np.int64)
        return local


def _csr_from_directed(num_nodes: int, rows: np.ndarray, cols: np.ndarray):
    """Sort directed entries into CSR arrays (rows major, columns ascending)."""
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=num_nodes), out=offsets[1:])
    return offsets, cols.astype(np.int64, copy=False)


def build_graph(num_nodes: int, edges) -> SparseGraph:
    """Build a SparseGraph from unordered node pairs.

    Duplicate pairs (in either orientation) collapse to a single edge;
    self-loop pairs are rejected so the +I of the normalization stays exact.
    """
    if num_nodes < 0:
        raise ValueError("num_nodes must be non-negative")
    pairs = [tuple(e) for e in edges]
    if not pairs:
        return SparseGraph(
            num_nodes,
            np.zeros(num_nodes + 1, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
        )
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("edges must be pairs of node indices")
    if arr.min() < 0 or arr.max() >= num_nodes:
        raise ValueError(
            f"edge endpoint out of range for graph with {num_nodes} nodes"
        )
    loops = arr[:, 0] == arr[:, 1]
    if np.any(loops):
        bad = int(arr[loops][0, 0])
        raise ValueError(f"self-loop edge ({bad}, {bad}) is not allowed")
    both = np.vstack([arr, arr[:, ::-1]])
    keys = both[:, 0] * num_nodes + both[:, 1]
    uniq = np.unique(keys)
    rows, cols = uniq // num_nodes, uniq % num_nodes
    offsets, cols = _csr_from_directed(num_nodes, rows, cols)
    return SparseGraph(num_nodes, offsets, cols)


def normalize(g: SparseGraph) -> Propagator:
    """Normalized augmented adjacency of g: add self loops, scale by degrees.

    The result has one entry per adjacency entry plus one diagonal entry
    per node, valued 1/sqrt(d_i * d_j) with d the self-loop-augmented degree.
    """
    n = g.num_nodes
    deg = g.degrees() + 1  # +1 for the added self loop
    rows = np.repeat(np.arange(n, dtype=np.int64), g.degrees())
    all_rows = np.concatenate([rows, np.arange(n, dtype=np.int64)])
    all_cols = np.concatenate([g.col_indices, np.arange(n, dtype=np.int64)])
    order = np.lexsort((all_cols, all_rows))
    sorted_rows, sorted_cols = all_rows[order], all_cols[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(sorted_rows, minlength=n), out=offsets[1:])
    deg = deg.astype(np.float64)
    values = 1.0 / np.sqrt(deg[sorted_rows] * deg[sorted_cols])
    return Propagator(n, offsets, sorted_cols, values)


def induced_subgraph(g: SparseGraph, s: NodeSubset) -> SparseGraph:
    """Restrict g to the nodes of s, relabelled to the sorted order of s."""
    if s.num_parent_nodes != g.num_nodes:
        raise ValueError("subset was built over a different graph")
    local = s.local_index()
    rows = np.repeat(np.arange(g.num_nodes, dtype=np.int64), g.degrees())
    keep = (local[rows] >= 0) & (local[g.col_indices] >= 0)
    new_rows = local[rows[keep]]
    new_cols = local[g.col_indices[keep]]
    offsets, cols = _csr_from_directed(len(s), new_rows, new_cols)
    return SparseGraph(len(s), offsets, cols)


def spmm(p: Propagator, m: np.ndarray) -> np.ndarray:
    """Sparse-dense product p @ m with a fixed per-row summation order."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != p.num_nodes:
        raise ValueError(
            f"matrix has {m.shape[0] if m.ndim == 2 else '?'} rows, "
            f"propagator expects {p.num_nodes}"
        )
    return p._csr @ m
