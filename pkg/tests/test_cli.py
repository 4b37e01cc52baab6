import json

import numpy as np
import pytest

from conftest import citation_path, sbm_dataset
from safegcn.cli import (
    ExperimentSpec,
    main,
    run_experiment,
    sweep_alpha,
    sweep_label_ratio,
    write_csv,
)
from safegcn.data import save, save_split, make_split
from safegcn.model import TrainConfig
from safegcn.nn import make_rng


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "sbm"
    ds = sbm_dataset(classes=2, nodes_per_class=10, p_in=0.8, p_out=0.05,
                     feature_dim=4, shift=3.0, seed=1)
    save(ds, path)
    split = make_split(ds, 2, 4, make_rng(0))
    save_split(split, path / "split.json")
    return path


def fast_cfg():
    return TrainConfig(epochs=40)


def spec_for(dataset_dir, method, seeds=(0,), **kw):
    kw.setdefault("labels_per_class", 2)
    kw.setdefault("test_size", 4)
    return ExperimentSpec(dataset_path=str(dataset_dir), method=method,
                          seeds=seeds, train=fast_cfg(), **kw)


def read_rows(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return header, [dict(zip(header, line.split(","))) for line in lines[1:]]


class TestRunExperiment:
    def test_one_row_per_seed_plus_aggregates(self, dataset_dir):
        rows = run_experiment(spec_for(dataset_dir, "gcn", seeds=(0, 1, 2)))
        assert len(rows) == 3 + 2
        assert [r.seed for r in rows] == [0, 1, 2, "mean", "std"]
        for r in rows[:3]:
            assert r.error is None
            assert 0.0 <= r.accuracy <= 1.0

    def test_aggregates_match_oracle(self, dataset_dir):
        rows = run_experiment(spec_for(dataset_dir, "sgcn", seeds=(0, 1, 2, 3)))
        accs = [r.accuracy for r in rows if isinstance(r.seed, int)]
        mean_row = next(r for r in rows if r.seed == "mean")
        std_row = next(r for r in rows if r.seed == "std")
        assert abs(mean_row.accuracy - np.mean(accs)) < 1e-12
        assert abs(std_row.accuracy - np.std(accs, ddof=1)) < 1e-12

    def test_safegcn_rows_have_iterations_and_pool(self, dataset_dir):
        rows = run_experiment(spec_for(dataset_dir, "safegcn", alpha=0.7))
        row = rows[0]
        assert row.iterations >= 1
        assert row.pool_size >= 4

    def test_error_rows_do_not_abort_others(self, dataset_dir):
        # labels-per-class beyond the smallest class fails per row
        spec = spec_for(dataset_dir, "gcn", seeds=(0, 1),
                        labels_per_class=None, sweep_labels=(2, 50))
        rows = run_experiment(spec)
        by_count = {}
        for r in rows:
            by_count.setdefault(r.labels_per_class, []).append(r)
        assert all(r.error is None for r in by_count[2] if isinstance(r.seed, int))
        failed = [r for r in by_count[50] if isinstance(r.seed, int)]
        assert all(r.error is not None and r.accuracy is None for r in failed)

    def test_fixed_split_used_for_every_seed(self, dataset_dir):
        spec = spec_for(dataset_dir, "sgcn", seeds=(0, 1),
                        labels_per_class=None,
                        split_file=str(dataset_dir / "split.json"))
        rows = run_experiment(spec)
        assert all(r.labels_per_class is None for r in rows)
        assert all(r.error is None for r in rows if isinstance(r.seed, int))

    def test_degenerate_alpha_matches_sgcn_accuracy(self, dataset_dir):
        base = run_experiment(spec_for(dataset_dir, "sgcn"))[0]
        degen = run_experiment(spec_for(dataset_dir, "safegcn", alpha=1.01))[0]
        assert degen.accuracy == base.accuracy
        assert degen.iterations == 1


class TestSweeps:
    def test_alpha_sweep_row_count(self, dataset_dir):
        spec = spec_for(dataset_dir, "safegcn", seeds=(0, 1), alpha=0.5)
        rows = sweep_alpha(spec, [0.5, 0.7, 0.9])
        # 3 grid points x 2 seeds + (mean, std) per grid point
        assert len(rows) == 6 + 6
        alphas = [r.alpha for r in rows if isinstance(r.seed, int)]
        assert alphas == [0.5, 0.5, 0.7, 0.7, 0.9, 0.9]

    def test_rows_sorted_by_grid_then_seed(self, dataset_dir):
        spec = spec_for(dataset_dir, "gcn", seeds=(2, 0, 1),
                        labels_per_class=None, sweep_labels=(3, 2))
        rows = run_experiment(spec)
        counts = [r.labels_per_class for r in rows]
        assert counts == [2] * 5 + [3] * 5
        assert [r.seed for r in rows[:5]] == [0, 1, 2, "mean", "std"]

    def test_label_sweep_small_label_advantage_cora(self):
        # with very few seed labels the self-training mean should not trail
        # the plain GCN mean (skips without the converted dataset)
        path = citation_path("cora")

        def mean_at_five(method, **extra):
            spec = ExperimentSpec(dataset_path=path, method=method,
                                  seeds=(0, 1), test_size=1000,
                                  labels_per_class=5, **extra)
            rows = sweep_label_ratio(spec, [5])
            return next(r.accuracy for r in rows if r.seed == "mean")

        assert mean_at_five("safegcn", alpha=0.9) >= mean_at_five("gcn")

    def test_label_sweep_default_count_matches_table_sizes(self):
        path = citation_path("cora")
        from safegcn.data import load
        ds = load(path)
        split = make_split(ds, 20, 1000, make_rng(3))
        assert (split.train_labeled.size, split.train_unlabeled.size,
                split.test.size) == (140, 1568, 1000)


class TestCsv:
    def test_header_and_timing_flag(self, dataset_dir, tmp_path):
        rows = run_experiment(spec_for(dataset_dir, "gcn"))
        full, trimmed = tmp_path / "full.csv", tmp_path / "trim.csv"
        write_csv(rows, full)
        write_csv(rows, trimmed, no_timing=True)
        assert full.read_text().splitlines()[0] == (
            "dataset,method,alpha,labels_per_class,seed,accuracy,"
            "iterations,pool_size,wall_time_s")
        assert trimmed.read_text().splitlines()[0] == (
            "dataset,method,alpha,labels_per_class,seed,accuracy,"
            "iterations,pool_size")

    def test_byte_identical_reruns(self, dataset_dir, tmp_path):
        spec = spec_for(dataset_dir, "safegcn", seeds=(0, 1), alpha=0.7)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(run_experiment(spec), a, no_timing=True)
        write_csv(run_experiment(spec), b, no_timing=True)
        assert a.read_bytes() == b.read_bytes()

    def test_baseline_rows_leave_safegcn_fields_blank(self, dataset_dir, tmp_path):
        out = tmp_path / "g.csv"
        write_csv(run_experiment(spec_for(dataset_dir, "gcn")), out)
        _, rows = read_rows(out)
        assert rows[0]["alpha"] == ""
        assert rows[0]["iterations"] == ""
        assert rows[0]["pool_size"] == ""
        assert rows[0]["accuracy"] != ""


class TestSpecValidation:
    def test_alpha_only_for_safegcn(self, dataset_dir):
        with pytest.raises(ValueError, match="alpha only"):
            spec_for(dataset_dir, "gcn", alpha=0.5)

    def test_safegcn_requires_alpha(self, dataset_dir):
        with pytest.raises(ValueError, match="alpha"):
            spec_for(dataset_dir, "safegcn")

    def test_empty_seeds(self, dataset_dir):
        with pytest.raises(ValueError, match="seed"):
            spec_for(dataset_dir, "gcn", seeds=())

    def test_unknown_method(self, dataset_dir):
        with pytest.raises(ValueError, match="unknown method"):
            spec_for(dataset_dir, "gat")


class TestMain:
    def test_end_to_end_csv(self, dataset_dir, tmp_path):
        out = tmp_path / "out.csv"
        code = main([
            "--dataset", str(dataset_dir), "--method", "safegcn",
            "--alpha", "0.7", "--labels-per-class", "2", "--test-size", "4",
            "--epochs", "40", "--seeds", "0,1", "--out", str(out), "--no-timing",
        ])
        assert code == 0
        header, rows = read_rows(out)
        assert "wall_time_s" not in header
        assert len(rows) == 4
        assert float(rows[0]["accuracy"]) >= 0.0

    def test_nonzero_exit_when_rows_fail(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "out.csv"
        code = main([
            "--dataset", str(dataset_dir), "--method", "gcn",
            "--labels-per-class", "50", "--test-size", "4",
            "--epochs", "40", "--seeds", "0", "--out", str(out),
        ])
        assert code == 1
        assert out.exists()  # error is recorded per row, file still written
        assert "run failed" in capsys.readouterr().err

    def test_empty_grid_no_output(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "never.csv"
        code = main([
            "--dataset", str(dataset_dir), "--method", "safegcn",
            "--sweep-alpha", "", "--labels-per-class", "2",
            "--seeds", "0", "--out", str(out),
        ])
        assert code == 2
        assert not out.exists()
        assert "error" in capsys.readouterr().err

    def test_expansion_log(self, dataset_dir, tmp_path):
        out, logf = tmp_path / "out.csv", tmp_path / "expansions.jsonl"
        code = main([
            "--dataset", str(dataset_dir), "--method", "safegcn",
            "--alpha", "0.7", "--labels-per-class", "2", "--test-size", "4",
            "--epochs", "40", "--seeds", "0", "--out", str(out),
            "--log-expansions", str(logf),
        ])
        assert code == 0
        events = [json.loads(line) for line in logf.read_text().splitlines()]
        assert events[0]["event"] == "run"
        assert any(e.get("event") == "termination" for e in events)
        assert any("histogram" in e for e in events)
