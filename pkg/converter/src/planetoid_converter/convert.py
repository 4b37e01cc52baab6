"""Rebuild a citation dataset from the upstream Planetoid file layout.

The upstream distribution ships, per dataset NAME, eight files:

    ind.NAME.x           pickled scipy sparse matrix: features of the
                         originally supervised train nodes
    ind.NAME.y           pickled one-hot label array for those nodes
    ind.NAME.tx, .ty     features / one-hot labels of the test nodes,
                         ordered as listed in the test index file
    ind.NAME.allx, .ally features / one-hot labels of every node below the
                         test id range (train + validation + remainder)
    ind.NAME.graph       pickled dict: node id -> neighbor id list
    ind.NAME.test.index  test node ids, one per line, in shuffled order

Node ids 0 .. allx.rows-1 map straight to allx rows; the test id range
follows. Because the test index file is shuffled, the stacked rows must be
permuted so that row k of tx lands at the node id on line k. Some
distributions (citeseer) skip ids inside the test range entirely: those
nodes exist only in the graph, and their features stay zero and their
label falls back to class 0. They end up in neither the labeled nor the
test list of the emitted split.

The emitted split takes the first len(y) ids as train_labeled, the test
index list as test, and everything else (including the original
validation nodes) as train_unlabeled.
"""

from __future__ import annotations

import json
import os
import pickle
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

DATASET_NAMES = ("cora", "citeseer", "pubmed")

_PICKLE_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")

# published split tables for pubmed count 18170 train nodes, which leaves
# 547 of the 19717 - 1060 remaining nodes unaccounted; the upstream files
# carry no such exclusion, so the emitted split assigns all of them to
# train_unlabeled and this note records the difference.
_PUBMED_COMMENT = (
    "upstream-derived split: 60 labeled + 18657 unlabeled + 1000 test "
    "covers all 19717 nodes; commonly cited split tables list 18170 train "
    "nodes instead, leaving 547 nodes out of both sides"
)


class ConversionError(ValueError):
    pass


@dataclass(frozen=True)
class UpstreamBundle:
    """Paths of one dataset's upstream files, all verified to exist."""

    name: str
    directory: str

    @staticmethod
    def of(directory: str, name: str) -> "UpstreamBundle":
        if name not in DATASET_NAMES:
            raise ConversionError(
                f"unknown dataset name {name!r}; expected one of {DATASET_NAMES}")
        bundle = UpstreamBundle(name=name, directory=directory)
        for part in _PICKLE_PARTS + ("test.index",):
            path = bundle.path(part)
            if not os.path.exists(path):
                raise ConversionError(f"missing upstream file: {path}")
        return bundle

    def path(self, part: str) -> str:
        return os.path.join(self.directory, f"ind.{self.name}.{part}")

    def load_pickle(self, part: str):
        with open(self.path(part), "rb") as fh:
            return pickle.load(fh, encoding="latin1")

    def load_test_index(self) -> np.ndarray:
        with open(self.path("test.index"), "r") as fh:
            lines = [line.strip() for line in fh if line.strip()]
        try:
            return np.array([int(line) for line in lines], dtype=np.int64)
        except ValueError as exc:
            raise ConversionError(f"bad test index file: {exc}") from None


def _as_dense(block, part: str) -> np.ndarray:
    if sp.issparse(block):
        return np.asarray(block.todense(), dtype=np.float64)
    arr = np.asarray(block, dtype=np.float64)
    if arr.ndim != 2:
        raise ConversionError(f"{part} is not a matrix")
    return arr


def _check_one_hot(rows: np.ndarray, part: str):
    ok = (rows.sum(axis=1) == 1.0) & np.all((rows == 0.0) | (rows == 1.0), axis=1)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise ConversionError(f"non-one-hot label row {bad} in {part}")


def _reorder_test_block(block: np.ndarray, test_idx: np.ndarray,
                        range_min: int) -> np.ndarray:
    """Expand a test block over the full id range and undo the shuffle.

    Row k of the block belongs to the node id on line k of the index file;
    ids inside the range that the file never lists stay all-zero.
    """
    span = int(test_idx.max()) - range_min + 1
    expanded = np.zeros((span, block.shape[1]))
    expanded[test_idx - range_min] = block
    return expanded


def convert(bundle: UpstreamBundle, out_dir: str) -> None:
    """Convert one upstream bundle into a canonical dataset directory."""
    x = _as_dense(bundle.load_pickle("x"), "x")
    y = _as_dense(bundle.load_pickle("y"), "y")
    tx = _as_dense(bundle.load_pickle("tx"), "tx")
    ty = _as_dense(bundle.load_pickle("ty"), "ty")
    allx = _as_dense(bundle.load_pickle("allx"), "allx")
    ally = _as_dense(bundle.load_pickle("ally"), "ally")
    graph = bundle.load_pickle("graph")
    test_idx = bundle.load_test_index()

    if len(set(test_idx.tolist())) != test_idx.size:
        raise ConversionError("duplicate ids in the test index file")
    if x.shape[0] != y.shape[0] or tx.shape[0] != ty.shape[0] \
            or allx.shape[0] != ally.shape[0]:
        raise ConversionError("feature and label blocks differ in row count")
    if tx.shape[0] != test_idx.size:
        raise ConversionError(
            f"tx has {tx.shape[0]} rows but the test index lists {test_idx.size} ids")
    widths = {x.shape[1], tx.shape[1], allx.shape[1]}
    if len(widths) != 1:
        raise ConversionError(f"inconsistent feature widths {sorted(widths)}")
    for part, block in (("y", y), ("ty", ty), ("ally", ally)):
        _check_one_hot(block, part)

    range_min = int(test_idx.min())
    if range_min != allx.shape[0]:
        raise ConversionError(
            f"test ids start at {range_min} but allx has {allx.shape[0]} rows")
    features = np.vstack([allx, _reorder_test_block(tx, test_idx, range_min)])
    onehot = np.vstack([ally, _reorder_test_block(ty, test_idx, range_min)])
    labels = onehot.argmax(axis=1)
    num_nodes = features.shape[0]
    num_classes = y.shape[1]

    edges = set()
    for node, neighbors in graph.items():
        if not 0 <= int(node) < num_nodes:
            raise ConversionError(
                f"graph node {node} outside [0, {num_nodes}): node-count mismatch")
        for nbr in neighbors:
            nbr = int(nbr)
            if not 0 <= nbr < num_nodes:
                raise ConversionError(
                    f"graph neighbor {nbr} outside [0, {num_nodes}): "
                    f"node-count mismatch")
            if nbr != int(node):
                edges.add((min(int(node), nbr), max(int(node), nbr)))

    labeled = np.arange(y.shape[0], dtype=np.int64)
    test_sorted = np.sort(test_idx)
    claimed = np.concatenate([labeled, test_sorted])
    unlabeled = np.setdiff1d(np.arange(num_nodes, dtype=np.int64), claimed)

    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "name": bundle.name,
        "num_nodes": int(num_nodes),
        "num_features": int(features.shape[1]),
        "num_classes": int(num_classes),
    }
    if bundle.name == "pubmed":
        meta["comment"] = _PUBMED_COMMENT
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="ascii") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(os.path.join(out_dir, "features.txt"), "w", encoding="ascii") as fh:
        csr = sp.csr_matrix(features)
        csr.sort_indices()
        for node in range(num_nodes):
            start, end = csr.indptr[node], csr.indptr[node + 1]
            for feat, value in zip(csr.indices[start:end], csr.data[start:end]):
                fh.write(f"{node} {feat} {value:.17g}\n")

    with open(os.path.join(out_dir, "labels.txt"), "w", encoding="ascii") as fh:
        for node, label in enumerate(labels):
            fh.write(f"{node} {label}\n")

    with open(os.path.join(out_dir, "edges.txt"), "w", encoding="ascii") as fh:
        for u, v in sorted(edges):
            fh.write(f"{u} {v}\n")

    split = {
        "train_labeled": labeled.tolist(),
        "train_unlabeled": unlabeled.tolist(),
        "test": test_sorted.tolist(),
    }
    with open(os.path.join(out_dir, "split.json"), "w", encoding="ascii") as fh:
        json.dump(split, fh, sort_keys=True)
        fh.write("\n")
