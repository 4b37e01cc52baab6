"""Dataset container, plain-text on-disk format, splits, synthetic graphs.

A dataset directory holds four files (plus an optional fixed split):

    meta.json     {"name", "num_nodes", "num_features", "num_classes"}
    features.txt  "node feat value" triplets, sorted by (node, feat);
                  anything not listed is 0
    labels.txt    "node label", one line per node, sorted by node
    edges.txt     "u v" with u < v, one line per undirected edge, sorted
    split.json    {"train_labeled": [...], "train_unlabeled": [...], "test": [...]}

Everything is zero-based, single-space separated, newline-terminated ASCII.
Features are stored sparsely because citation bag-of-words vectors are ~1%
dense; the loader materializes a dense float64 matrix.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .graph import SparseGraph, build_graph


class DatasetFormatError(ValueError):
    """A malformed dataset file; message carries file name and line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


@dataclass(frozen=True)
class Dataset:
    name: str
    x: np.ndarray          # (n, d) float64 feature matrix
    labels: np.ndarray     # (n,) int64 class indices in [0, num_classes)
    graph: SparseGraph
    num_classes: int

    def __post_init__(self):
        n = self.x.shape[0]
        if self.labels.shape != (n,):
            raise ValueError("labels length differs from feature row count")
        if self.graph.num_nodes != n:
            raise ValueError("graph node count differs from feature row count")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels outside [0, {self.num_classes})")
        if len(np.unique(self.labels)) != self.num_classes:
            raise ValueError("every class must have at least one node")

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def num_features(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class Split:
    """Disjoint train-labeled / train-unlabeled / test node lists.

    The union may omit nodes (some fixed benchmark divisions leave a
    remainder that belongs to neither side).
    """

    train_labeled: np.ndarray
    train_unlabeled: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        parts = [self.train_labeled, self.train_unlabeled, self.test]
        total = sum(p.size for p in parts)
        if np.unique(np.concatenate(parts)).size != total:
            raise ValueError("split parts are not pairwise disjoint")
        if self.test.size == 0:
            raise ValueError("split has no test nodes")


def _read_lines(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing dataset file: {path}")
    with open(path, "r", encoding="ascii") as fh:
        return fh.read().splitlines()


def _parse_int(token, path, line_no, what):
    try:
        return int(token)
    except ValueError:
        raise DatasetFormatError(path, line_no, f"bad {what} {token!r}") from None


def load(path) -> Dataset:
    """Load and validate a canonical dataset directory."""
    meta_path = os.path.join(path, "meta.json")
    if not os.path.exists(meta_path):
        raise FileNotFoundError(f"missing dataset file: {meta_path}")
    with open(meta_path, "r", encoding="ascii") as fh:
        meta = json.load(fh)
    for key in ("name", "num_nodes", "num_features", "num_classes"):
        if key not in meta:
            raise DatasetFormatError(meta_path, 1, f"meta.json lacks {key!r}")
    n, d, c = int(meta["num_nodes"]), int(meta["num_features"]), int(meta["num_classes"])

    feat_path = os.path.join(path, "features.txt")
    x = np.zeros((n, d))
    prev = (-1, -1)
    for line_no, line in enumerate(_read_lines(feat_path), start=1):
        parts = line.split(" ")
        if len(parts) != 3:
            raise DatasetFormatError(feat_path, line_no,
                                     f"expected 'node feat value', got {line!r}")
        node = _parse_int(parts[0], feat_path, line_no, "node index")
        feat = _parse_int(parts[1], feat_path, line_no, "feature index")
        try:
            value = float(parts[2])
        except ValueError:
            raise DatasetFormatError(feat_path, line_no,
                                     f"bad value {parts[2]!r}") from None
        if not 0 <= node < n:
            raise DatasetFormatError(feat_path, line_no,
                                     f"node index {node} outside [0, {n})")
        if not 0 <= feat < d:
            raise DatasetFormatError(feat_path, line_no,
                                     f"feature index {feat} outside [0, {d})")
        if (node, feat) <= prev:
            raise DatasetFormatError(feat_path, line_no,
                                     "lines not sorted by (node, feat)")
        prev = (node, feat)
        x[node, feat] = value

    label_path = os.path.join(path, "labels.txt")
    lines = _read_lines(label_path)
    if len(lines) != n:
        raise DatasetFormatError(label_path, len(lines) + 1,
                                 f"expected {n} label lines, found {len(lines)}")
    labels = np.zeros(n, dtype=np.int64)
    for line_no, line in enumerate(lines, start=1):
        parts = line.split(" ")
        if len(parts) != 2:
            raise DatasetFormatError(label_path, line_no,
                                     f"expected 'node label', got {line!r}")
        node = _parse_int(parts[0], label_path, line_no, "node index")
        label = _parse_int(parts[1], label_path, line_no, "label")
        if node != line_no - 1:
            raise DatasetFormatError(label_path, line_no,
                                     f"expected node {line_no - 1}, got {node}")
        if not 0 <= label < c:
            raise DatasetFormatError(label_path, line_no,
                                     f"label {label} outside [0, {c})")
        labels[node] = label

    edge_path = os.path.join(path, "edges.txt")
    edges = []
    prev_edge = (-1, -1)
    for line_no, line in enumerate(_read_lines(edge_path), start=1):
        parts = line.split(" ")
        if len(parts) != 2:
            raise DatasetFormatError(edge_path, line_no,
                                     f"expected 'u v', got {line!r}")
        u = _parse_int(parts[0], edge_path, line_no, "node index")
        v = _parse_int(parts[1], edge_path, line_no, "node index")
        if not (0 <= u < n and 0 <= v < n):
            raise DatasetFormatError(edge_path, line_no,
                                     f"edge ({u}, {v}) outside [0, {n})")
        if u >= v:
            raise DatasetFormatError(edge_path, line_no,
                                     f"edge ({u}, {v}) must satisfy u < v")
        if (u, v) <= prev_edge:
            raise DatasetFormatError(edge_path, line_no,
                                     "edges not sorted or duplicated")
        prev_edge = (u, v)
        edges.append((u, v))

    return Dataset(
        name=str(meta["name"]),
        x=x,
        labels=labels,
        graph=build_graph(n, edges),
        num_classes=c,
    )


def save(dataset: Dataset, path):
    """Write a dataset in the canonical directory format."""
    os.makedirs(path, exist_ok=True)
    meta = {
        "name": dataset.name,
        "num_nodes": dataset.num_nodes,
        "num_features": dataset.num_features,
        "num_classes": dataset.num_classes,
    }
    with open(os.path.join(path, "meta.json"), "w", encoding="ascii") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(path, "features.txt"), "w", encoding="ascii") as fh:
        rows, feats = np.nonzero(dataset.x)
        for node, feat in zip(rows, feats):
            fh.write(f"{node} {feat} {float(dataset.x[node, feat])!r}\n")
    with open(os.path.join(path, "labels.txt"), "w", encoding="ascii") as fh:
        for node, label in enumerate(dataset.labels):
            fh.write(f"{node} {label}\n")
    with open(os.path.join(path, "edges.txt"), "w", encoding="ascii") as fh:
        pairs = dataset.graph.edge_pairs()
        for u, v in pairs[pairs[:, 0] < pairs[:, 1]]:
            fh.write(f"{u} {v}\n")


def load_split(path) -> Split:
    """Read a fixed split.json next to (or anywhere relative to) a dataset."""
    with open(path, "r", encoding="ascii") as fh:
        obj = json.load(fh)
    for key in ("train_labeled", "train_unlabeled", "test"):
        if key not in obj:
            raise DatasetFormatError(path, 1, f"split.json lacks {key!r}")
    return Split(
        train_labeled=np.asarray(obj["train_labeled"], dtype=np.int64),
        train_unlabeled=np.asarray(obj["train_unlabeled"], dtype=np.int64),
        test=np.asarray(obj["test"], dtype=np.int64),
    )


def save_split(split: Split, path):
    obj = {
        "train_labeled": split.train_labeled.tolist(),
        "train_unlabeled": split.train_unlabeled.tolist(),
        "test": split.test.tolist(),
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def make_split(dataset: Dataset, labels_per_class: int, test_size: int,
               rng: np.random.Generator) -> Split:
    """Sample a random split: an equal labeled count per class, then test.

    Every remaining node becomes train-unlabeled. Deterministic for a given
    generator state.
    """
    if labels_per_class < 1:
        raise ValueError("labels_per_class must be at least 1")
    if test_size < 1:
        raise ValueError("test_size must be at least 1")
    n = dataset.num_nodes
    labeled_parts = []
    for cls in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == cls)
        if members.size < labels_per_class:
            raise ValueError(
                f"class {cls} has {members.size} nodes, fewer than "
                f"{labels_per_class} requested labels"
            )
        labeled_parts.append(rng.choice(members, size=labels_per_class, replace=False))
    labeled = np.sort(np.concatenate(labeled_parts))
    rest = np.setdiff1d(np.arange(n), labeled, assume_unique=False)
    if rest.size < test_size:
        raise ValueError(
            f"{rest.size} nodes remain after labeling, fewer than test size {test_size}"
        )
    test = np.sort(rng.choice(rest, size=test_size, replace=False))
    unlabeled = np.setdiff1d(rest, test, assume_unique=True)
    return Split(train_labeled=labeled, train_unlabeled=unlabeled, test=test)


def sbm_generate(classes: int, nodes_per_class: int, p_in: float, p_out: float,
                 feature_dim: int, feature_shift: float,
                 rng: np.random.Generator) -> Dataset:
    """Stochastic block model with class-separated Gaussian features.

    Nodes of one class form a block; within-block pairs connect with
    probability p_in, cross-block pairs with p_out. Node features are the
    class indicator scaled by feature_shift plus unit Gaussian noise, so a
    large shift makes classes linearly separable from features alone.
    """
    if not 0.0 <= p_out <= p_in <= 1.0:
        raise ValueError("probabilities must satisfy 0 <= p_out <= p_in <= 1")
    if classes < 1 or nodes_per_class < 1:
        raise ValueError("classes and nodes_per_class must be at least 1")
    if feature_dim < classes:
        raise ValueError("feature_dim must be at least the number of classes")
    n = classes * nodes_per_class
    labels = np.repeat(np.arange(classes, dtype=np.int64), nodes_per_class)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    draw = rng.random((n, n))
    iu, ju = np.triu_indices(n, k=1)
    keep = draw[iu, ju] < prob[iu, ju]
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    means = np.zeros((classes, feature_dim))
    means[np.arange(classes), np.arange(classes)] = feature_shift
    x = means[labels] + rng.standard_normal((n, feature_dim))
    return Dataset(
        name=f"sbm-{classes}x{nodes_per_class}",
        x=x,
        labels=labels,
        graph=build_graph(n, edges),
        num_classes=classes,
    )
