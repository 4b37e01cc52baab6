"""Graph semi-supervised node classification with confidence-filtered
self-training: a two-layer GCN, its labeled-only supervised variant, and
the iterative pseudo-labeling loop that grows the labeled set class-
balanced before a final supervised fit."""

from .data import Dataset, DatasetFormatError, Split, load, make_split, save, sbm_generate
from .graph import NodeSubset, Propagator, SparseGraph, build_graph, induced_subgraph, normalize, spmm
from .model import (
    GcnParams,
    Predictions,
    TrainConfig,
    TrainingDivergedError,
    forward,
    predict,
    train,
    train_sgcn,
)
from .selftrain import (
    CandidateSet,
    ExpansionLog,
    LabeledPool,
    SafeGcnConfig,
    SafeGcnResult,
    balanced_expand,
    final_predict,
    run,
    select_candidates,
)

__all__ = [
    "Dataset", "DatasetFormatError", "Split", "load", "make_split", "save",
    "sbm_generate",
    "NodeSubset", "Propagator", "SparseGraph", "build_graph",
    "induced_subgraph", "normalize", "spmm",
    "GcnParams", "Predictions", "TrainConfig", "TrainingDivergedError",
    "forward", "predict", "train", "train_sgcn",
    "CandidateSet", "ExpansionLog", "LabeledPool", "SafeGcnConfig",
    "SafeGcnResult", "balanced_expand", "final_predict", "run",
    "select_candidates",
]

__version__ = "0.1.0"
