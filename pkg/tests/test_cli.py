import json

import pytest

from evidence_pipeline import cli, trec
from evidence_pipeline.errors import ConfigInvalid, ParseError

from conftest import SYNTH_SMALL

ALL_STAGES = [
    "ingest",
    "index",
    "sparse-retrieve",
    "mine-negatives",
    "train-toy",
    "embed",
    "dense-retrieve",
    "rerank",
    "evaluate",
    "compare",
    "export-plots",
]


def small_config(tmp_path, **overrides):
    config = {
        "data": {
            "corpus": str(SYNTH_SMALL / "corpus.tsv"),
            "queries": {
                "train": str(SYNTH_SMALL / "queries_train.tsv"),
                "dev": str(SYNTH_SMALL / "queries_dev.tsv"),
                "test": str(SYNTH_SMALL / "queries_test.tsv"),
            },
            "gold": str(SYNTH_SMALL / "gold.tsv"),
        },
        "bm25": {"k": 10},
        "dense": {"k": 10},
        "train": {
            "regime": "in_batch_plus_hn",
            "batch_size": 4,
            "learning_rate": 0.05,
            "pool_k": 5,
            "dim_out": 16,
            "dim_feat": 64,
        },
        "rerank": {"depth": 5},
        "evaluate": {"run": "rerank"},
        "compare": {"run_a": "sparse", "run_b": "rerank"},
        "split": "test",
        "output_dir": str(tmp_path / "out"),
        "seed": 3,
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def run_cli(stage, config_path, **kwargs):
    args = [stage, "--config", str(config_path)]
    for key, value in kwargs.items():
        args += [f"--{key}", str(value)]
    return cli.main(args)


class TestConfig:
    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"outptu_dir": "x"}))
        with pytest.raises(ConfigInvalid):
            cli.load_config(path)

    def test_nested_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"bm25": {"k2": 1.0}}))
        with pytest.raises(ConfigInvalid):
            cli.load_config(path)

    def test_seed_override(self, tmp_path):
        path = small_config(tmp_path)
        config = cli.load_config(path, seed_override=99)
        assert config["seed"] == 99

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        assert run_cli("ingest", path) == 2

    def test_data_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.DATA_ROOT_ENV, "/data/root")
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"data": {"corpus": "corpus.tsv"}}))
        config = cli.load_config(path)
        assert config["data"]["corpus"] == "/data/root/corpus.tsv"


class TestPipeline:
    def test_missing_artifact_before_retrieve(self, tmp_path):
        path = small_config(tmp_path)
        assert run_cli("evaluate", path) == 3

    def test_full_pipeline_end_to_end(self, tmp_path):
        path = small_config(tmp_path)
        for stage in ALL_STAGES:
            assert run_cli(stage, path) == 0, stage
        out = tmp_path / "out"
        assert (out / "run_sparse_test.trec").exists()
        assert (out / "run_dense_test.trec").exists()
        assert (out / "run_rerank_test.trec").exists()
        metrics = json.loads((out / "metrics_rerank_test.json").read_text())
        assert metrics["query_count"] == 6
        comparison = json.loads(
            (out / "comparison_sparse_vs_rerank_test.json").read_text()
        )
        assert 0.0 <= comparison["mcnemar_p"] <= 1.0
        histogram = (out / "histogram_rerank_test.csv").read_text()
        assert histogram.startswith("rank_bucket,percent")
        # manifests carry config and input hashes
        manifest = json.loads((out / "manifest_evaluate.json").read_text())
        assert manifest["config_hash"]
        assert manifest["inputs"]["run"]

    def test_no_partial_artifacts_on_failure(self, tmp_path):
        path = small_config(tmp_path)
        assert run_cli("evaluate", path) == 3
        out = tmp_path / "out"
        leftovers = [p for p in out.glob(".tmp-*")]
        assert leftovers == []

    def test_determinism_byte_identical(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        path_a = small_config(tmp_path / "a")
        path_b = small_config(tmp_path / "b")
        for path in (path_a, path_b):
            for stage in ALL_STAGES:
                assert run_cli(stage, path) == 0
        out_a = tmp_path / "a" / "out"
        out_b = tmp_path / "b" / "out"
        for name in [
            "index.pkl",
            "run_sparse_test.trec",
            "hard_negatives.tsv",
            "toy_params.bin",
            "loss_trace.csv",
            "emb_docs.emb",
            "run_dense_test.trec",
            "run_rerank_test.trec",
            "metrics_rerank_test.json",
        ]:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


class TestTrecFormat:
    def test_round_trip(self, tmp_path):
        run = {"q1": [("d1", 2.5), ("d2", 1.25)], "q2": [("d9", 0.001)]}
        path = tmp_path / "r.trec"
        trec.write_run(run, path)
        assert trec.read_run(path) == run

    def test_line_layout(self, tmp_path):
        run = {"q1": [("d1", 0.123456789)]}
        path = tmp_path / "r.trec"
        trec.write_run(run, path, tag="mytag")
        line = path.read_text().strip().split(" ")
        assert line[0] == "q1" and line[1] == "Q0" and line[2] == "d1"
        assert line[3] == "1" and line[5] == "mytag"
        assert float(line[4]) == pytest.approx(0.123456789, abs=1e-7)

    def test_rejects_duplicate_docs(self, tmp_path):
        with pytest.raises(ParseError):
            trec.validate_run({"q1": [("d1", 2.0), ("d1", 1.0)]})

    def test_rejects_increasing_scores(self):
        with pytest.raises(ParseError):
            trec.validate_run({"q1": [("d1", 1.0), ("d2", 2.0)]})
