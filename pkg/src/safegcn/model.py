"""Two-layer GCN: forward pass, hand-derived backward pass, training loop.

With A_hat the normalized augmented adjacency and inverted dropout applied
at two sites (input features and hidden activations, training mode only):

    H = relu(A_hat @ (drop(X) @ W0) + b0)
    P = softmax_rows(A_hat @ (drop(H) @ W1) + b1)

Gradients are computed manually (no autodiff); they are exercised against
central finite differences in the test suite.

The supervised variant (train_sgcn) restricts both the graph and the
feature rows to the currently labeled nodes before training, so nothing
outside that set can influence the fitted weights.

Feature matrices may be dense arrays or scipy CSR; the training loop
switches to CSR automatically when the input is large and sparse, which is
what makes repeated retraining on the citation datasets cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import NodeSubset, Propagator, SparseGraph, induced_subgraph, normalize, spmm
from .nn import (
    AdamState,
    adam_step,
    cross_entropy_masked,
    dropout,
    glorot_init,
    make_rng,
    relu,
    relu_backward,
    softmax_rows,
)

# Inputs at least this large and this sparse are converted to CSR for training.
_SPARSE_MIN_SIZE = 16384
_SPARSE_MAX_DENSITY = 0.25


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    dropout: float = 0.5
    hidden: int = 16
    weight_decay: float = 5e-4
    seed: int = 0
    use_bias: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.hidden < 1:
            raise ValueError("hidden width must be at least 1")


@dataclass(frozen=True)
class GcnParams:
    """Weights of the two-layer model: input->hidden and hidden->output."""

    w0: np.ndarray  # (d, h)
    b0: np.ndarray  # (h,)
    w1: np.ndarray  # (h, c)
    b1: np.ndarray  # (c,)

    @staticmethod
    def init(num_features: int, hidden: int, num_classes: int, rng) -> "GcnParams":
        return GcnParams(
            w0=glorot_init(num_features, hidden, rng),
            b0=np.zeros(hidden),
            w1=glorot_init(hidden, num_classes, rng),
            b1=np.zeros(num_classes),
        )

    def as_list(self):
        return [self.w0, self.b0, self.w1, self.b1]

    @staticmethod
    def from_list(arrays) -> "GcnParams":
        w0, b0, w1, b1 = arrays
        return GcnParams(w0, b0, w1, b1)

    @property
    def num_classes(self) -> int:
        return self.w1.shape[1]


@dataclass(frozen=True)
class Predictions:
    """Row-stochastic class probabilities with argmax labels and row maxima."""

    probs: np.ndarray        # (n, c)
    labels: np.ndarray       # argmax per row, ties to the lowest class index
    scores: np.ndarray       # row maximum

    @staticmethod
    def from_probs(probs: np.ndarray) -> "Predictions":
        return Predictions(probs, probs.argmax(axis=1), probs.max(axis=1))

    def take(self, rows) -> "Predictions":
        rows = np.asarray(rows)
        return Predictions(self.probs[rows], self.labels[rows], self.scores[rows])

    def __len__(self) -> int:
        return self.probs.shape[0]


@dataclass
class ForwardCache:
    """Intermediates of one training-mode forward pass, kept for backward."""

    xd: object           # dropped input, dense or CSR
    z0: np.ndarray       # pre-activation of the hidden layer
    hd: np.ndarray       # dropped hidden activations
    hmask: np.ndarray    # scaled hidden dropout mask


def _dropout_features(x, p: float, rng, training: bool):
    """Input-feature dropout that works for dense and CSR matrices.

    Zero entries stay zero under dropout either way, so for CSR input only
    the stored values draw random bits.
    """
    if not sp.issparse(x):
        xd, _ = dropout(x, p, rng, training)
        return xd
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return sp.csr_matrix((x.data * keep, x.indices, x.indptr), shape=x.shape)


def forward(params: GcnParams, propagator: Propagator, x, dropout_p: float = 0.0,
            rng=None, training: bool = False):
    """One full forward pass; returns (Predictions, ForwardCache).

    Evaluation mode (training=False) skips both dropout sites and needs no
    rng, giving identical output on every call.
    """
    n = x.shape[0]
    if n != propagator.num_nodes:
        raise ValueError(
            f"feature matrix has {n} rows, propagator expects {propagator.num_nodes}"
        )
    if params.w0.shape[0] != x.shape[1]:
        raise ValueError(
            f"feature width {x.shape[1]} != weight input width {params.w0.shape[0]}"
        )
    xd = _dropout_features(x, dropout_p, rng, training)
    z0 = spmm(propagator, xd @ params.w0) + params.b0
    h = relu(z0)
    hd, hmask = dropout(h, dropout_p, rng, training)
    z1 = spmm(propagator, hd @ params.w1) + params.b1
    probs = softmax_rows(z1)
    return Predictions.from_probs(probs), ForwardCache(xd=xd, z0=z0, hd=hd, hmask=hmask)


def backward(params: GcnParams, propagator: Propagator, cache: ForwardCache,
             grad_logits: np.ndarray) -> GcnParams:
    """Parameter gradients from the fused softmax + cross-entropy gradient."""
    db1 = grad_logits.sum(axis=0)
    dv = spmm(propagator, grad_logits)          # propagator is symmetric
    dw1 = cache.hd.T @ dv
    dh = (dv @ params.w1.T) * cache.hmask
    dz0 = relu_backward(cache.z0, dh)
    db0 = dz0.sum(axis=0)
    du = spmm(propagator, dz0)
    dw0 = cache.xd.T @ du
    if sp.issparse(dw0):
        dw0 = dw0.toarray()
    return GcnParams(np.asarray(dw0), db0, dw1, db1)


def predict(params: GcnParams, propagator: Propagator, x) -> Predictions:
    """Evaluation-mode forward pass: probabilities, argmax labels, maxima."""
    preds, _ = forward(params, propagator, x, training=False)
    return preds


def _as_train_features(x):
    """Pick the feature representation for the training loop.

    Large, sparse dense inputs move to CSR once so the per-epoch input
    products and input dropout cost O(nnz). The choice depends only on the
    input, keeping training bitwise reproducible for a given seed.
    """
    if sp.issparse(x):
        return sp.csr_matrix(x, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.size >= _SPARSE_MIN_SIZE:
        density = np.count_nonzero(x) / x.size
        if density <= _SPARSE_MAX_DENSITY:
            return sp.csr_matrix(x)
    return x


def train(x, propagator: Propagator, labels, labeled_mask, num_classes: int,
          cfg: TrainConfig) -> GcnParams:
    """Full-batch training for exactly cfg.epochs iterations.

    Loss is masked cross entropy over labeled_mask; weight decay acts on the
    first-layer weights only, added to their gradient before the Adam step.
    Deterministic given cfg.seed. Raises TrainingDivergedError on a
    non-finite loss.
    """
    labeled_mask = np.asarray(labeled_mask, dtype=np.int64)
    if labeled_mask.size == 0:
        raise ValueError("training requires a non-empty labeled mask")
    rng = make_rng(cfg.seed)
    params = GcnParams.init(x.shape[1], cfg.hidden, num_classes, rng)
    state = AdamState.init(params.as_list())
    x_rep = _as_train_features(x)
    for epoch in range(cfg.epochs):
        preds, cache = forward(params, propagator, x_rep, cfg.dropout, rng, training=True)
        loss, grad_logits = cross_entropy_masked(preds.probs, labels, labeled_mask)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite loss {loss} at epoch {epoch} (seed {cfg.seed})"
            )
        grads = backward(params, propagator, cache, grad_logits)
        gw0 = grads.w0 + cfg.weight_decay * params.w0
        glist = [gw0, grads.b0, grads.w1, grads.b1]
        if not cfg.use_bias:
            glist[1] = np.zeros_like(glist[1])
            glist[3] = np.zeros_like(glist[3])
        plist, state = adam_step(params.as_list(), glist, state, cfg.learning_rate)
        params = GcnParams.from_list(plist)
    return params


def train_sgcn(x, graph: SparseGraph, pool_nodes, pool_labels, num_classes: int,
               cfg: TrainConfig) -> GcnParams:
    """Train the supervised variant on the labeled nodes only.

    Builds the subgraph induced by pool_nodes, normalizes it, and trains on
    exactly those feature rows with every pool node labeled. Feature rows,
    edges, and labels of nodes outside the pool are never touched.
    """
    pool_nodes = np.asarray(pool_nodes, dtype=np.int64)
    pool_labels = np.asarray(pool_labels, dtype=np.int64)
    if pool_nodes.size == 0:
        raise ValueError("labeled pool is empty")
    if pool_nodes.size != pool_labels.size:
        raise ValueError("pool nodes and labels differ in length")
    order = np.argsort(pool_nodes, kind="stable")
    nodes, labels = pool_nodes[order], pool_labels[order]
    subset = NodeSubset.of(graph, nodes)
    prop = normalize(induced_subgraph(graph, subset))
    x_pool = x[nodes]
    mask = np.arange(nodes.size)
    return train(x_pool, prop, labels, mask, num_classes, cfg)
