"""Shared helpers: synthetic datasets and the self-training invariant suite."""

import os

import numpy as np
import pytest

from safegcn.data import Split, make_split, sbm_generate
from safegcn.nn import make_rng

DATA_ROOT = os.environ.get(
    "SAFEGCN_DATA", os.path.join(os.path.dirname(__file__), "..", "data"))


def citation_path(name):
    """Directory of a converted citation dataset, or skip the test."""
    path = os.path.join(DATA_ROOT, name)
    if not os.path.isdir(path):
        pytest.skip(
            f"{name} dataset not found at {path}; convert the upstream "
            f"distribution first (see README: converter usage) or point "
            f"SAFEGCN_DATA at a directory holding {name}/"
        )
    return path


def sbm_dataset(classes=2, nodes_per_class=6, p_in=1.0, p_out=0.0,
                feature_dim=4, shift=10.0, seed=0):
    return sbm_generate(classes, nodes_per_class, p_in, p_out, feature_dim,
                        shift, make_rng(seed))


def sbm_split(dataset, labels_per_class=1, test_size=2, seed=0):
    return make_split(dataset, labels_per_class, test_size, make_rng(seed))


def balanced_split(dataset, labels_per_class=1, test_per_class=1, seed=0):
    """Split with the test set also drawn evenly per class."""
    rng = make_rng(seed)
    labeled, test = [], []
    for cls in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == cls)
        chosen = rng.choice(members, labels_per_class + test_per_class, replace=False)
        labeled.append(chosen[:labels_per_class])
        test.append(chosen[labels_per_class:])
    labeled = np.sort(np.concatenate(labeled))
    test = np.sort(np.concatenate(test))
    rest = np.setdiff1d(np.arange(dataset.num_nodes), np.concatenate([labeled, test]))
    return Split(train_labeled=labeled, train_unlabeled=rest, test=test)


def check_selftrain_invariants(result, split, alpha, max_iterations):
    """Assert every structural guarantee of one finished self-training run."""
    log, pool = result.log, result.pool
    test_set = set(split.test.tolist())
    train_set = set(split.train_labeled.tolist()) | set(split.train_unlabeled.tolist())

    # pool growth: non-decreasing, strictly increasing on non-terminal rounds
    sizes = [split.train_labeled.size]
    for rec in log.records:
        assert rec.pool_before == sizes[-1]
        assert rec.pool_after >= rec.pool_before
        if rec.s > 0:
            assert rec.pool_after > rec.pool_before
        sizes.append(rec.pool_after)
    assert sizes[-1] == len(pool)

    # balance: every class present in a round admits exactly s nodes
    for rec in log.records:
        for cls, admitted in rec.admitted.items():
            assert len(admitted) == rec.s
        assert set(rec.admitted) == set(rec.histogram)

    # admission soundness: logged scores satisfy the filter with this alpha
    for rec in log.records:
        for admitted in rec.admitted.values():
            for item in admitted:
                assert item["gcn_score"] >= item["sgcn_score"] >= alpha

    # test-node safety: nothing outside the train nodes is ever touched
    for entry in pool.entries:
        assert entry.node in train_set
        assert entry.node not in test_set
    for rec in log.records:
        for admitted in rec.admitted.values():
            for item in admitted:
                assert item["node"] in train_set

    # termination bound
    u = split.train_unlabeled.size
    assert 1 <= log.iterations_used <= min(max_iterations, u + 1)

    # provenance bookkeeping
    seeds = [e for e in pool.entries if e.provenance == "seed"]
    assert len(seeds) == split.train_labeled.size
    assert all(e.iteration_added == 0 for e in seeds)
    for entry in pool.pseudo_entries():
        assert 1 <= entry.iteration_added <= log.iterations_used
        assert entry.score_at_admission is not None
