"""Confidence-filtered self-training driver (the Safe-GCN loop).

Each iteration retrains two classifiers from fresh initializations: the
full GCN on the train-node graph and the supervised variant on the graph
induced by the currently labeled pool. Both score the unlabeled train
nodes; a node becomes a candidate only when

    gcn_score >= sgcn_score >= alpha   and both argmax labels agree,

and the pool then grows by the same number of top-confidence candidates
for every class that produced any (balanced expansion). The loop stops
when no candidate survives the filter, when the unlabeled set is empty, or
at the iteration cap. A final supervised model is then trained on the
expanded pool and used to classify held-out nodes on a graph assembled at
prediction time, so test features and edges never enter training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import NodeSubset, induced_subgraph, normalize
from .model import GcnParams, Predictions, TrainConfig, predict, train, train_sgcn
from .nn import mix_seed

SEED_PROVENANCE = "seed"
PSEUDO_PROVENANCE = "pseudo"


@dataclass(frozen=True)
class PoolEntry:
    node: int
    label: int
    provenance: str                   # "seed" or "pseudo"
    iteration_added: int              # 0 for seeds
    score_at_admission: float | None  # gcn confidence; None for seeds


class LabeledPool:
    """The growing labeled set: seed nodes plus admitted pseudo-labeled ones.

    Node indices are unique; entries are only ever added, never removed or
    relabeled.
    """

    def __init__(self, entries=()):
        self._entries: list[PoolEntry] = []
        self._index: dict[int, PoolEntry] = {}
        for e in entries:
            self._add(e)

    @staticmethod
    def from_seeds(nodes, labels) -> "LabeledPool":
        pool = LabeledPool()
        for node, label in zip(nodes, labels):
            pool._add(PoolEntry(int(node), int(label), SEED_PROVENANCE, 0, None))
        return pool

    def _add(self, entry: PoolEntry):
        if entry.node in self._index:
            raise ValueError(f"node {entry.node} is already in the labeled pool")
        self._entries.append(entry)
        self._index[entry.node] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, node: int) -> bool:
        return int(node) in self._index

    @property
    def entries(self) -> tuple[PoolEntry, ...]:
        return tuple(self._entries)

    def nodes(self) -> np.ndarray:
        """Pool node indices in ascending order."""
        return np.sort(np.fromiter(self._index, dtype=np.int64, count=len(self._index)))

    def labels_for(self, nodes) -> np.ndarray:
        return np.array([self._index[int(n)].label for n in np.asarray(nodes)], dtype=np.int64)

    def pseudo_entries(self) -> list[PoolEntry]:
        return [e for e in self._entries if e.provenance == PSEUDO_PROVENANCE]


@dataclass(frozen=True)
class Candidate:
    node: int
    label: int        # pseudo-label: the shared argmax, taken from the GCN
    gcn_score: float
    sgcn_score: float


class CandidateSet:
    """Filter-passing nodes grouped by pseudo-label.

    Within a class, candidates are ordered by GCN confidence descending,
    ties broken toward the lower node index.
    """

    def __init__(self, by_class: dict[int, list[Candidate]]):
        self.by_class = {
            label: sorted(cands, key=lambda c: (-c.gcn_score, c.node))
            for label, cands in by_class.items()
            if cands
        }

    def histogram(self) -> dict[int, int]:
        return {label: len(cands) for label, cands in self.by_class.items()}

    def is_empty(self) -> bool:
        return not self.by_class

    def __len__(self) -> int:
        return sum(len(c) for c in self.by_class.values())


@dataclass(frozen=True)
class SafeGcnConfig:
    alpha: float
    max_iterations: int = 100
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        # alpha > 1 is allowed: it can never be met, forcing zero candidates.
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class IterationRecord:
    """Audit record of one expansion round."""

    iteration: int
    histogram: dict[int, int]
    s: int
    admitted: dict[int, list[dict]]   # class -> [{node, gcn_score, sgcn_score}]
    pool_before: int
    pool_after: int

    def to_json_obj(self) -> dict:
        return {
            "iteration": self.iteration,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "s": self.s,
            "admitted": {str(k): v for k, v in sorted(self.admitted.items())},
            "pool_before": self.pool_before,
            "pool_after": self.pool_after,
        }


TERMINATED_NO_CANDIDATES = "no_candidates"
TERMINATED_NO_UNLABELED = "no_unlabeled"
TERMINATED_MAX_ITERATIONS = "max_iterations"


@dataclass
class ExpansionLog:
    records: list[IterationRecord] = field(default_factory=list)
    termination: str = TERMINATED_NO_CANDIDATES

    @property
    def iterations_used(self) -> int:
        return len(self.records)

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_json_obj(), sort_keys=True) for r in self.records]
        lines.append(json.dumps(
            {"event": "termination", "reason": self.termination,
             "iterations_used": self.iterations_used},
            sort_keys=True,
        ))
        return "\n".join(lines) + "\n"


@dataclass
class SafeGcnResult:
    pool: LabeledPool
    log: ExpansionLog
    final_params: GcnParams


def select_candidates(nodes, pred_sgcn: Predictions, pred_gcn: Predictions,
                      alpha: float) -> CandidateSet:
    """Apply the confidence filter to one round of dual predictions.

    Both prediction sets must be row-aligned with `nodes`. A node passes
    when the GCN maximum dominates the supervised model's maximum, the
    supervised maximum reaches alpha, and both models name the same class;
    the pseudo-label is the GCN argmax.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(pred_sgcn) != nodes.size or len(pred_gcn) != nodes.size:
        raise ValueError(
            f"prediction rows ({len(pred_sgcn)}, {len(pred_gcn)}) do not match "
            f"{nodes.size} unlabeled nodes"
        )
    ok = (
        (pred_gcn.scores >= pred_sgcn.scores)
        & (pred_sgcn.scores >= alpha)
        & (pred_sgcn.labels == pred_gcn.labels)
    )
    by_class: dict[int, list[Candidate]] = {}
    for i in np.flatnonzero(ok):
        cand = Candidate(
            node=int(nodes[i]),
            label=int(pred_gcn.labels[i]),
            gcn_score=float(pred_gcn.scores[i]),
            sgcn_score=float(pred_sgcn.scores[i]),
        )
        by_class.setdefault(cand.label, []).append(cand)
    return CandidateSet(by_class)


def balanced_expand(pool: LabeledPool, candidates: CandidateSet,
                    iteration: int) -> IterationRecord:
    """Admit the same number of top candidates for every class present.

    s is the smallest candidate count among classes that produced any
    candidate; absent classes receive nothing. An empty candidate set is a
    no-op and signals termination to the caller.
    """
    hist = candidates.histogram()
    pool_before = len(pool)
    if candidates.is_empty():
        return IterationRecord(iteration, {}, 0, {}, pool_before, pool_before)
    s = min(hist.values())
    admitted: dict[int, list[dict]] = {}
    for label in sorted(candidates.by_class):
        taken = candidates.by_class[label][:s]
        admitted[label] = [
            {"node": c.node, "gcn_score": c.gcn_score, "sgcn_score": c.sgcn_score}
            for c in taken
        ]
        for c in taken:
            if c.node in pool:
                raise RuntimeError(
                    f"candidate node {c.node} is already labeled; filter fed "
                    "from a stale unlabeled set"
                )
            pool._add(PoolEntry(c.node, c.label, PSEUDO_PROVENANCE, iteration,
                                c.gcn_score))
    return IterationRecord(iteration, hist, s, admitted, pool_before, len(pool))


def run(dataset, split, config: SafeGcnConfig) -> SafeGcnResult:
    """Execute the full self-training loop and the final supervised fit.

    Training only ever sees the train nodes of the split: the GCN trains on
    the subgraph induced by labeled + unlabeled train nodes, the supervised
    model on the pool-induced subgraph, and both score the unlabeled train
    nodes through evaluation-mode passes over the train-node graph.
    """
    labeled = np.asarray(split.train_labeled, dtype=np.int64)
    unlabeled = np.asarray(split.train_unlabeled, dtype=np.int64)
    if labeled.size == 0:
        raise ValueError("split has no initially labeled nodes")
    train_nodes = np.sort(np.concatenate([labeled, unlabeled]))
    subset = NodeSubset.of(dataset.graph, train_nodes)
    prop_train = normalize(induced_subgraph(dataset.graph, subset))
    x_train = dataset.x[train_nodes]
    local = subset.local_index()

    pool = LabeledPool.from_seeds(labeled, dataset.labels[labeled])
    log = ExpansionLog(termination=TERMINATED_MAX_ITERATIONS)
    base_seed = config.train.seed
    for iteration in range(1, config.max_iterations + 1):
        pool_nodes = pool.nodes()
        pool_labels = pool.labels_for(pool_nodes)
        unlabeled_now = np.setdiff1d(train_nodes, pool_nodes, assume_unique=True)
        if unlabeled_now.size == 0:
            if not log.records:  # nothing was ever unlabeled: one empty round
                log.records.append(IterationRecord(iteration, {}, 0, {},
                                                   len(pool), len(pool)))
            log.termination = TERMINATED_NO_UNLABELED
            break

        sgcn_cfg = _reseeded(config.train, mix_seed(base_seed, 2 * iteration))
        gcn_cfg = _reseeded(config.train, mix_seed(base_seed, 2 * iteration + 1))
        sgcn_params = train_sgcn(dataset.x, dataset.graph, pool_nodes, pool_labels,
                                 dataset.num_classes, sgcn_cfg)
        labels_local = np.full(train_nodes.size, -1, dtype=np.int64)
        labels_local[local[pool_nodes]] = pool_labels
        gcn_params = train(x_train, prop_train, labels_local, local[pool_nodes],
                           dataset.num_classes, gcn_cfg)

        rows = local[unlabeled_now]
        pred_sgcn = predict(sgcn_params, prop_train, x_train).take(rows)
        pred_gcn = predict(gcn_params, prop_train, x_train).take(rows)
        candidates = select_candidates(unlabeled_now, pred_sgcn, pred_gcn,
                                       config.alpha)
        record = balanced_expand(pool, candidates, iteration)
        log.records.append(record)
        if candidates.is_empty():
            log.termination = TERMINATED_NO_CANDIDATES
            break

    final_nodes = pool.nodes()
    final_params = train_sgcn(dataset.x, dataset.graph, final_nodes,
                              pool.labels_for(final_nodes), dataset.num_classes,
                              config.train)
    return SafeGcnResult(pool=pool, log=log, final_params=final_params)


def _reseeded(cfg: TrainConfig, seed: int) -> TrainConfig:
    return replace(cfg, seed=seed)


def final_predict(params: GcnParams, dataset, pool: LabeledPool,
                  test_nodes) -> Predictions:
    """Classify held-out nodes with an already-trained supervised model.

    The inference graph is induced by pool nodes plus test nodes and
    normalized on the spot; one evaluation-mode pass produces the
    predictions, returned row-aligned with `test_nodes`.
    """
    test_nodes = np.asarray(test_nodes, dtype=np.int64)
    pool_nodes = pool.nodes()
    if np.intersect1d(pool_nodes, test_nodes).size:
        raise ValueError("labeled pool and test nodes overlap")
    all_nodes = np.sort(np.concatenate([pool_nodes, test_nodes]))
    subset = NodeSubset.of(dataset.graph, all_nodes)
    prop = normalize(induced_subgraph(dataset.graph, subset))
    preds = predict(params, prop, dataset.x[all_nodes])
    return preds.take(subset.local_index()[test_nodes])
