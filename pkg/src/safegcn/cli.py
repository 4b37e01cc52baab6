"""Experiment harness: single runs, method comparisons, sweeps, CSV output.

Methods:
    sgcn     supervised baseline trained on the seed labels only
    gcn      semi-supervised baseline trained on the train-node graph
    safegcn  the full self-training loop plus final supervised fit

Every run trains without test-node features or edges; test nodes only
appear in the inference graph assembled after training. Rows are sorted by
(grid point, seed) and two aggregate rows (mean, sample std of accuracy)
follow each grid point, so re-running an identical spec reproduces the CSV
byte for byte once the timing column is disabled.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, Split, load, load_split, make_split
from .graph import NodeSubset, induced_subgraph, normalize
from .model import TrainConfig, predict, train, train_sgcn
from .nn import make_rng
from .selftrain import LabeledPool, SafeGcnConfig, final_predict, run

METHODS = ("sgcn", "gcn", "safegcn")

CSV_COLUMNS = ("dataset", "method", "alpha", "labels_per_class", "seed",
               "accuracy", "iterations", "pool_size", "wall_time_s")


@dataclass(frozen=True)
class ExperimentSpec:
    dataset_path: str
    method: str
    seeds: tuple[int, ...]
    alpha: float | None = None
    labels_per_class: int | None = None
    test_size: int = 1000
    split_file: str | None = None
    sweep_alpha: tuple[float, ...] = ()
    sweep_labels: tuple[int, ...] = ()
    train: TrainConfig = field(default_factory=TrainConfig)
    max_iterations: int = 100
    out: str | None = None
    log_expansions: str | None = None
    no_timing: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.seeds:
            raise ValueError("seed list is empty")
        if self.method != "safegcn":
            if self.alpha is not None or self.sweep_alpha:
                raise ValueError("alpha only applies to the safegcn method")
        elif self.alpha is None and not self.sweep_alpha:
            raise ValueError("safegcn needs --alpha or --sweep-alpha")
        if self.split_file is None and self.labels_per_class is None and not self.sweep_labels:
            raise ValueError("random splits need --labels-per-class (or a sweep)")
        if self.split_file is not None and self.sweep_labels:
            raise ValueError("cannot sweep label counts with a fixed split file")


@dataclass
class ResultRow:
    dataset: str
    method: str
    alpha: float | None
    labels_per_class: int | None
    seed: int | str
    accuracy: float | None = None
    iterations: int | None = None
    pool_size: int | None = None
    wall_time_s: float | None = None
    error: str | None = None

    def cells(self, with_timing: bool) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        cells = [self.dataset, self.method, fmt(self.alpha),
                 fmt(self.labels_per_class), fmt(self.seed), fmt(self.accuracy),
                 fmt(self.iterations), fmt(self.pool_size)]
        if with_timing:
            cells.append(fmt(self.wall_time_s))
        return cells


def _gcn_baseline(dataset: Dataset, split: Split, cfg: TrainConfig) -> float:
    """Train on the train-node subgraph, then classify test nodes on the
    graph induced by train + test nodes."""
    train_nodes = np.sort(np.concatenate([split.train_labeled, split.train_unlabeled]))
    subset = NodeSubset.of(dataset.graph, train_nodes)
    prop = normalize(induced_subgraph(dataset.graph, subset))
    local = subset.local_index()
    labels_local = np.full(train_nodes.size, -1, dtype=np.int64)
    labels_local[local[split.train_labeled]] = dataset.labels[split.train_labeled]
    params = train(dataset.x[train_nodes], prop, labels_local,
                   local[split.train_labeled], dataset.num_classes, cfg)

    infer_nodes = np.sort(np.concatenate([train_nodes, split.test]))
    infer_subset = NodeSubset.of(dataset.graph, infer_nodes)
    infer_prop = normalize(induced_subgraph(dataset.graph, infer_subset))
    preds = predict(params, infer_prop, dataset.x[infer_nodes])
    rows = infer_subset.local_index()[split.test]
    return float(np.mean(preds.labels[rows] == dataset.labels[split.test]))


def evaluate_method(dataset: Dataset, split: Split, method: str,
                    alpha: float | None, cfg: TrainConfig,
                    max_iterations: int = 100):
    """One training + evaluation; returns (accuracy, iterations, pool_size, log)."""
    if method == "gcn":
        return _gcn_baseline(dataset, split, cfg), None, None, None
    if method == "sgcn":
        labeled = split.train_labeled
        params = train_sgcn(dataset.x, dataset.graph, labeled,
                            dataset.labels[labeled], dataset.num_classes, cfg)
        pool = LabeledPool.from_seeds(labeled, dataset.labels[labeled])
        preds = final_predict(params, dataset, pool, split.test)
        acc = float(np.mean(preds.labels == dataset.labels[split.test]))
        return acc, None, None, None
    result = run(dataset, split, SafeGcnConfig(alpha=alpha,
                                               max_iterations=max_iterations,
                                               train=cfg))
    preds = final_predict(result.final_params, dataset, result.pool, split.test)
    acc = float(np.mean(preds.labels == dataset.labels[split.test]))
    return acc, result.log.iterations_used, len(result.pool), result.log


def _grid(spec: ExperimentSpec) -> list[tuple[float | None, int | None]]:
    alphas = list(spec.sweep_alpha) or [spec.alpha]
    counts = list(spec.sweep_labels) or [spec.labels_per_class]
    points = [(a, k) for a in sorted(alphas, key=lambda v: (v is not None, v))
              for k in sorted(counts, key=lambda v: (v is not None, v))]
    if not points:
        raise ValueError("experiment grid is empty")
    return points


def run_experiment(spec: ExperimentSpec, expansion_sink=None) -> list[ResultRow]:
    """Run the full (grid point x seed) matrix; append aggregates per point.

    Failures of individual runs become rows with an error message and empty
    numeric fields; remaining runs still execute.
    """
    grid = _grid(spec)
    dataset = load(spec.dataset_path)
    fixed_split = load_split(spec.split_file) if spec.split_file else None
    rows: list[ResultRow] = []
    for alpha, count in grid:
        point_rows: list[ResultRow] = []
        for seed in sorted(spec.seeds):
            row = ResultRow(dataset.name, spec.method, alpha, count, seed)
            started = time.perf_counter()
            try:
                if fixed_split is not None:
                    split = fixed_split
                else:
                    split = make_split(dataset, count, spec.test_size, make_rng(seed))
                cfg = replace(spec.train, seed=seed)
                acc, iters, pool_size, log = evaluate_method(
                    dataset, split, spec.method, alpha, cfg, spec.max_iterations)
                row.accuracy, row.iterations, row.pool_size = acc, iters, pool_size
                if log is not None and expansion_sink is not None:
                    expansion_sink(row, log)
            except Exception as exc:  # keep going; the row records the failure
                row.error = f"{type(exc).__name__}: {exc}"
            row.wall_time_s = time.perf_counter() - started
            point_rows.append(row)
        rows.extend(point_rows)
        rows.extend(_aggregate(point_rows, dataset.name, spec.method, alpha, count))
    return rows


def _aggregate(point_rows, dataset_name, method, alpha, count) -> list[ResultRow]:
    accs = [r.accuracy for r in point_rows if r.accuracy is not None]
    mean_row = ResultRow(dataset_name, method, alpha, count, "mean")
    std_row = ResultRow(dataset_name, method, alpha, count, "std")
    if accs:
        mean_row.accuracy = statistics.fmean(accs)
    if len(accs) >= 2:
        std_row.accuracy = statistics.stdev(accs)
    return [mean_row, std_row]


def sweep_alpha(spec: ExperimentSpec, alphas) -> list[ResultRow]:
    return run_experiment(replace(spec, alpha=None, sweep_alpha=tuple(alphas)))


def sweep_label_ratio(spec: ExperimentSpec, counts) -> list[ResultRow]:
    return run_experiment(replace(spec, labels_per_class=None,
                                  sweep_labels=tuple(counts)))


def write_csv(rows, path, no_timing: bool = False):
    columns = CSV_COLUMNS[:-1] if no_timing else CSV_COLUMNS
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row.cells(with_timing=not no_timing)) + "\n")


def _parse_list(text, kind):
    items = [t for t in text.split(",") if t.strip()]
    return tuple(kind(t) for t in items)


def build_spec(argv=None) -> ExperimentSpec:
    ap = argparse.ArgumentParser(
        prog="safegcn-bench",
        description="Benchmark harness for the self-training GCN toolkit.")
    ap.add_argument("--dataset", required=True, help="dataset directory")
    ap.add_argument("--method", required=True, choices=METHODS)
    ap.add_argument("--alpha", type=float, default=None,
                    help="confidence threshold (safegcn only)")
    ap.add_argument("--labels-per-class", type=int, default=None)
    ap.add_argument("--test-size", type=int, default=1000)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--lr", type=float, default=0.01)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--dropout", type=float, default=0.5)
    ap.add_argument("--weight-decay", type=float, default=5e-4)
    ap.add_argument("--max-iterations", type=int, default=100)
    ap.add_argument("--seeds", default="0", help="comma-separated seed list")
    ap.add_argument("--split-file", default=None,
                    help="fixed split.json instead of random splits")
    ap.add_argument("--sweep-alpha", default=None,
                    help="comma-separated alpha grid")
    ap.add_argument("--sweep-labels", default=None,
                    help="comma-separated labels-per-class grid")
    ap.add_argument("--out", required=True, help="output CSV path")
    ap.add_argument("--log-expansions", default=None,
                    help="write per-iteration expansion records (JSON lines)")
    ap.add_argument("--no-timing", action="store_true",
                    help="omit the wall-time column for byte-exact output")
    args = ap.parse_args(argv)
    train_cfg = TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, dropout=args.dropout,
        hidden=args.hidden, weight_decay=args.weight_decay)
    return ExperimentSpec(
        dataset_path=args.dataset,
        method=args.method,
        seeds=_parse_list(args.seeds, int),
        alpha=args.alpha,
        labels_per_class=args.labels_per_class,
        test_size=args.test_size,
        split_file=args.split_file,
        sweep_alpha=_parse_list(args.sweep_alpha, float) if args.sweep_alpha is not None else (),
        sweep_labels=_parse_list(args.sweep_labels, int) if args.sweep_labels is not None else (),
        train=train_cfg,
        max_iterations=args.max_iterations,
        out=args.out,
        log_expansions=args.log_expansions,
        no_timing=args.no_timing,
    )


def main(argv=None) -> int:
    try:
        spec = build_spec(argv)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sink_fh = open(spec.log_expansions, "w", encoding="ascii") if spec.log_expansions else None

    def sink(row, log):
        sink_fh.write(f'{{"event": "run", "dataset": "{row.dataset}", '
                      f'"method": "{row.method}", "alpha": {row.alpha}, '
                      f'"seed": {row.seed}}}\n')
        sink_fh.write(log.to_jsonl())

    try:
        rows = run_experiment(spec, expansion_sink=sink if sink_fh else None)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        if sink_fh:
            sink_fh.close()
    write_csv(rows, spec.out, no_timing=spec.no_timing)
    failures = [r for r in rows if r.error is not None]
    for row in failures:
        print(f"run failed: method={row.method} alpha={row.alpha} "
              f"labels={row.labels_per_class} seed={row.seed}: {row.error}",
              file=sys.stderr)
    print(f"wrote {len(rows)} rows to {spec.out}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
