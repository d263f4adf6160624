"""Pipeline orchestration CLI.

Every stage reads a single JSON config, consumes the artifacts of upstream
stages from the output directory, and writes its own artifacts atomically
(temp file + rename) together with a provenance manifest recording the
config hash and the hashes of the inputs it read.

Exit codes: 0 ok, 2 config error, 3 missing artifact, 4 data error,
5 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import pickle
import sys
import tempfile

from . import contrastive, dense, evalx, rerank, sparse, trec
from .corpus import load_corpus, load_gold, load_queries
from .errors import (
    AllFieldsEmpty,
    ConfigInvalid,
    DuplicateId,
    DuplicateQuery,
    EmptyInput,
    MissingArtifact,
    MissingField,
    ParseError,
    PipelineError,
    UnknownDocument,
)
from .textproc import AnalyzerConfig, analyze, compose_document_text, load_stopwords

log = logging.getLogger(__name__)

DATA_ROOT_ENV = "EVIDENCE_PIPELINE_DATA"

STAGES = (
    "ingest",
    "index",
    "sparse-retrieve",
    "mine-negatives",
    "embed",
    "dense-retrieve",
    "train-toy",
    "rerank",
    "evaluate",
    "compare",
    "export-plots",
)

_DEFAULT_CONFIG = {
    "data": {
        "corpus": None,
        "format": "tsv",
        "queries": {"train": None, "dev": None, "test": None},
        "gold": None,
    },
    "analyzer": {
        "mode": "full",
        "lowercase": True,
        "stopwords": "bundled",
        "stem": False,
    },
    "fields": ["title", "abstract"],
    "bm25": {
        "k1": 1.5,
        "b": 0.75,
        "idf_floor_mode": "verbatim",
        "epsilon": 0.25,
        "k": 10,
    },
    "chunking": {"chunk_size": 510, "overlap": 50},
    "dense": {"k": 100, "doc_embeddings": None, "query_embeddings": None},
    "train": {
        "batch_size": 16,
        "scale": 20.0,
        "epochs": 2,
        "learning_rate": 0.1,
        "warmup_fraction": 0.1,
        "regime": "in_batch",
        "hard_negatives": 1,
        "pool_k": 10,
        "dim_out": 32,
        "dim_feat": 256,
    },
    "rerank": {"depth": 10, "scorer": "overlap", "scores": None, "input_run": "dense"},
    "evaluate": {"run": "sparse"},
    "compare": {"run_a": "dense", "run_b": "rerank"},
    "split": "test",
    "output_dir": "out",
    "seed": 7,
}


def _merge_config(defaults: dict, user: dict, path: str = "") -> dict:
    merged = {}
    for key, default in defaults.items():
        if key in user:
            value = user[key]
            if isinstance(default, dict) and isinstance(value, dict):
                merged[key] = _merge_config(default, value, f"{path}{key}.")
            else:
                merged[key] = value
        else:
            merged[key] = default
    unknown = [f"{path}{k}" for k in user if k not in defaults]
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {unknown}")
    return merged


def load_config(path, seed_override=None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except FileNotFoundError:
        raise ConfigInvalid(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: bad JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigInvalid(f"{path}: config must be a JSON object")
    config = _merge_config(_DEFAULT_CONFIG, user)
    if seed_override is not None:
        config["seed"] = seed_override
    if config["split"] not in ("train", "dev", "test"):
        raise ConfigInvalid(f"split must be train/dev/test, got {config['split']!r}")
    root = os.environ.get(DATA_ROOT_ENV)
    if root:
        data = config["data"]
        for key in ("corpus", "gold"):
            if data[key] and not os.path.isabs(data[key]):
                data[key] = os.path.join(root, data[key])
        for split, value in data["queries"].items():
            if value and not os.path.isabs(value):
                data["queries"][split] = os.path.join(root, value)
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def file_hash(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def atomic_write_bytes(path, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _AtomicFile:
    """Context manager producing a file atomically via temp + rename."""

    def __init__(self, path, mode="w"):
        self.path = os.path.abspath(path)
        directory = os.path.dirname(self.path)
        fd, self.tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
        binary = "b" in mode
        self.fh = os.fdopen(fd, "wb" if binary else "w", **(
            {} if binary else {"encoding": "utf-8", "newline": ""}
        ))

    def __enter__(self):
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            os.unlink(self.tmp)
        return False


def _write_via(path, writer_fn) -> None:
    """Run a path-based writer against a temp file, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    os.close(fd)
    try:
        writer_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(path, producer_stage: str):
    if not path or not os.path.exists(path):
        raise MissingArtifact(
            f"missing artifact {path!r}; run the {producer_stage!r} stage first"
        )
    return path


def _analyzer_from(config: dict) -> AnalyzerConfig:
    a = config["analyzer"]
    spec = a["stopwords"]
    if spec == "bundled":
        stopwords = load_stopwords()
    elif spec in (None, "none"):
        stopwords = frozenset()
    else:
        stopwords = load_stopwords(spec)
    return AnalyzerConfig(
        mode=a["mode"], lowercase=a["lowercase"], stopwords=stopwords, stem=a["stem"]
    )


class Workspace:
    """Resolved paths and lazy loading for one pipeline invocation."""

    def __init__(self, config: dict):
        self.config = config
        self.out = config["output_dir"]
        os.makedirs(self.out, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def run_path(self, run_name: str) -> str:
        split = self.config["split"]
        return self.path(f"run_{run_name}_{split}.trec")

    def load_documents(self):
        data = self.config["data"]
        if not data["corpus"]:
            raise ConfigInvalid("data.corpus is not set")
        return load_corpus(data["corpus"], data["format"])

    def load_split(self, split: str):
        data = self.config["data"]
        path = data["queries"].get(split)
        if not path:
            raise ConfigInvalid(f"data.queries.{split} is not set")
        return load_queries(path, data["format"], split)

    def load_gold_map(self):
        data = self.config["data"]
        if not data["gold"]:
            raise ConfigInvalid("data.gold is not set")
        return load_gold(data["gold"], data["format"])

    def write_manifest(self, stage: str, inputs: dict, outputs: dict) -> None:
        manifest = {
            "stage": stage,
            "config_hash": config_hash(self.config),
            "inputs": {k: file_hash(v) for k, v in inputs.items() if v},
            "outputs": {k: file_hash(v) for k, v in outputs.items() if v},
        }
        payload = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        atomic_write_bytes(
            self.path(f"manifest_{stage}.json"), payload.encode("utf-8")
        )


# --- stage implementations --------------------------------------------------


def stage_ingest(ws: Workspace):
    docs = ws.load_documents()
    gold = ws.load_gold_map()
    gold.validate_against(docs)
    counts = {"documents": len(docs)}
    for split in ("train", "dev", "test"):
        if ws.config["data"]["queries"].get(split):
            counts[f"queries_{split}"] = len(ws.load_split(split))
    summary = ws.path("ingest_summary.json")
    atomic_write_bytes(
        summary, (json.dumps(counts, indent=2, sort_keys=True) + "\n").encode()
    )
    ws.write_manifest(
        "ingest",
        {"corpus": ws.config["data"]["corpus"], "gold": ws.config["data"]["gold"]},
        {"summary": summary},
    )


def stage_index(ws: Workspace):
    docs = ws.load_documents()
    analyzer = _analyzer_from(ws.config)
    index = sparse.build_index(docs, ws.config["fields"], analyzer)
    path = ws.path("index.pkl")
    atomic_write_bytes(path, pickle.dumps(index, protocol=4))
    ws.write_manifest(
        "index", {"corpus": ws.config["data"]["corpus"]}, {"index": path}
    )


def _load_index(ws: Workspace) -> sparse.Bm25Index:
    path = _require(ws.path("index.pkl"), "index")
    with open(path, "rb") as fh:
        return pickle.load(fh)


def _bm25_params(ws: Workspace) -> sparse.Bm25Params:
    b = ws.config["bm25"]
    return sparse.Bm25Params(
        k1=b["k1"], b=b["b"], idf_floor_mode=b["idf_floor_mode"], epsilon=b["epsilon"]
    )


def stage_sparse_retrieve(ws: Workspace):
    index = _load_index(ws)
    analyzer = _analyzer_from(ws.config)
    params = _bm25_params(ws)
    queries = ws.load_split(ws.config["split"])
    cache = sparse.QueryCache()
    run = {
        q.query_id: sparse.retrieve(index, q, ws.config["bm25"]["k"], params, analyzer, cache)
        for q in queries
    }
    out = ws.run_path("sparse")
    _write_via(out, lambda p: trec.write_run(run, p, tag="bm25"))
    ws.write_manifest("sparse-retrieve", {"index": ws.path("index.pkl")}, {"run": out})


def stage_mine_negatives(ws: Workspace):
    index = _load_index(ws)
    analyzer = _analyzer_from(ws.config)
    params = _bm25_params(ws)
    gold = ws.load_gold_map()
    queries = ws.load_split("train")
    t = ws.config["train"]
    cache = sparse.QueryCache()
    lines = []
    skipped = 0
    for q in sorted(queries, key=lambda q: q.query_id):
        try:
            negatives = sparse.mine_hard_negatives(
                index, q, gold, t["pool_k"], t["hard_negatives"], params, analyzer, cache
            )
        except sparse.InsufficientCandidates:
            skipped += 1
            continue
        for did in negatives:
            lines.append(f"{q.query_id}\t{did}\n")
    if skipped:
        log.warning("mine-negatives: %d queries had too few candidates", skipped)
    out = ws.path("hard_negatives.tsv")
    atomic_write_bytes(out, "".join(lines).encode("utf-8"))
    ws.write_manifest(
        "mine-negatives", {"index": ws.path("index.pkl")}, {"negatives": out}
    )


def _load_negatives(path) -> dict:
    negatives: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                qid, did = line.split("\t")
                negatives.setdefault(qid, []).append(did)
    return negatives


def _doc_texts(ws: Workspace, docs) -> dict:
    return {
        d.doc_id: compose_document_text(d, ws.config["fields"]) for d in docs
    }


def stage_train_toy(ws: Workspace):
    t = ws.config["train"]
    regime = t["regime"]
    if regime not in ("in_batch", "in_batch_plus_hn"):
        raise ConfigInvalid(f"unknown train.regime {regime!r}")
    docs = ws.load_documents()
    gold = ws.load_gold_map()
    queries = ws.load_split("train")
    doc_texts = _doc_texts(ws, docs)
    query_texts = {q.query_id: q.text for q in queries}

    negatives = {}
    if regime == "in_batch_plus_hn":
        negatives = _load_negatives(_require(ws.path("hard_negatives.tsv"), "mine-negatives"))

    examples = []
    for q in sorted(queries, key=lambda q: q.query_id):
        if q.query_id not in gold:
            raise UnknownDocument(f"train query {q.query_id!r} has no gold entry")
        examples.append(
            contrastive.TrainExample(
                query_id=q.query_id,
                positive_doc_id=gold[q.query_id],
                hard_negative_doc_ids=tuple(negatives.get(q.query_id, ())),
            )
        )
    config = contrastive.TrainConfig(
        batch_size=t["batch_size"],
        scale=t["scale"],
        epochs=t["epochs"],
        learning_rate=t["learning_rate"],
        warmup_fraction=t["warmup_fraction"],
        seed=ws.config["seed"],
    )
    params, trace = contrastive.train(
        examples, query_texts, doc_texts, config, regime,
        dim_out=t["dim_out"], dim_feat=t["dim_feat"],
    )
    ckpt = ws.path("toy_params.bin")
    _write_via(ckpt, lambda p: contrastive.save_params(params, p))
    trace_path = ws.path("loss_trace.csv")
    _write_via(trace_path, lambda p: contrastive.write_trace(trace, p))
    inputs = {"corpus": ws.config["data"]["corpus"]}
    if regime == "in_batch_plus_hn":
        inputs["negatives"] = ws.path("hard_negatives.tsv")
    ws.write_manifest("train-toy", inputs, {"params": ckpt, "trace": trace_path})


def stage_embed(ws: Workspace):
    docs = ws.load_documents()
    queries = ws.load_split(ws.config["split"])
    analyzer = _analyzer_from(ws.config)
    c = ws.config["chunking"]
    chunking = dense.ChunkingConfig(chunk_size=c["chunk_size"], overlap=c["overlap"])
    params = contrastive.load_params(_require(ws.path("toy_params.bin"), "train-toy"))

    def provider(tokens):
        return contrastive.encode_tokens(tokens, params)

    doc_set = dense.EmbeddingSet(dim=params.dim_out)
    for d in docs:
        doc_set.add(
            d.doc_id,
            dense.embed_document(d, ws.config["fields"], analyzer, provider, chunking),
        )
    query_set = dense.EmbeddingSet(dim=params.dim_out)
    for q in queries:
        query_set.add(q.query_id, dense.embed_text(q.text, analyzer, provider, chunking))

    doc_path = ws.path("emb_docs.emb")
    query_path = ws.path(f"emb_queries_{ws.config['split']}.emb")
    _write_via(doc_path, lambda p: dense.write_embeddings(doc_set, p))
    _write_via(query_path, lambda p: dense.write_embeddings(query_set, p))
    ws.write_manifest(
        "embed",
        {"params": ws.path("toy_params.bin"), "corpus": ws.config["data"]["corpus"]},
        {"documents": doc_path, "queries": query_path},
    )


def stage_dense_retrieve(ws: Workspace):
    d = ws.config["dense"]
    doc_path = d["doc_embeddings"] or ws.path("emb_docs.emb")
    query_path = d["query_embeddings"] or ws.path(f"emb_queries_{ws.config['split']}.emb")
    doc_set = dense.read_embeddings(_require(doc_path, "embed"))
    query_set = dense.read_embeddings(_require(query_path, "embed"))
    run = {
        qid: dense.search(doc_set, vec, d["k"])
        for qid, vec in query_set.entries.items()
    }
    out = ws.run_path("dense")
    _write_via(out, lambda p: trec.write_run(run, p, tag="dense"))
    ws.write_manifest(
        "dense-retrieve", {"documents": doc_path, "queries": query_path}, {"run": out}
    )


def stage_rerank(ws: Workspace):
    r = ws.config["rerank"]
    input_run = ws.run_path(r["input_run"])
    run = trec.read_run(_require(input_run, f"{r['input_run']}-retrieve"))
    config = rerank.RerankConfig(depth=r["depth"])

    if r["scorer"] == "overlap":
        docs = ws.load_documents()
        queries = ws.load_split(ws.config["split"])
        analyzer = _analyzer_from(ws.config)
        doc_texts = _doc_texts(ws, docs)
        query_texts = {q.query_id: q.text for q in queries}

        def scorer(qid, did):
            return rerank.overlap_scorer(query_texts[qid], doc_texts[did], analyzer)

    elif r["scorer"] == "table":
        scorer = rerank.load_scores(_require(r["scores"], "score_pairs (sidecar)"))
    else:
        raise ConfigInvalid(f"unknown rerank.scorer {r['scorer']!r}")

    reranked = rerank.rerank(run, scorer, config)
    out = ws.run_path("rerank")
    _write_via(out, lambda p: trec.write_run(reranked, p, tag="rerank"))
    ws.write_manifest("rerank", {"input_run": input_run}, {"run": out})


def stage_evaluate(ws: Workspace):
    run_name = ws.config["evaluate"]["run"]
    run_path = _require(ws.run_path(run_name), f"{run_name} stage")
    run = trec.read_run(run_path)
    gold = ws.load_gold_map()
    queries = ws.load_split(ws.config["split"])
    qids = [q.query_id for q in queries]
    report = evalx.compute_metrics(run, gold, qids)
    histogram = evalx.rank_histogram(run, gold, 10, qids)
    split = ws.config["split"]
    json_path = ws.path(f"metrics_{run_name}_{split}.json")
    text_path = ws.path(f"metrics_{run_name}_{split}.txt")
    hist_path = ws.path(f"histogram_{run_name}_{split}.csv")
    _write_via(json_path, lambda p: evalx.write_metrics_report(report, json_path=p))
    _write_via(text_path, lambda p: evalx.write_metrics_report(report, text_path=p))
    _write_via(hist_path, lambda p: evalx.write_histogram_csv(histogram, p))
    ws.write_manifest(
        "evaluate",
        {"run": run_path},
        {"metrics_json": json_path, "metrics_text": text_path, "histogram": hist_path},
    )


def stage_compare(ws: Workspace):
    c = ws.config["compare"]
    path_a = _require(ws.run_path(c["run_a"]), f"{c['run_a']} stage")
    path_b = _require(ws.run_path(c["run_b"]), f"{c['run_b']} stage")
    gold = ws.load_gold_map()
    queries = ws.load_split(ws.config["split"])
    qids = [q.query_id for q in queries]
    report = evalx.compare_runs(trec.read_run(path_a), trec.read_run(path_b), gold, qids)
    split = ws.config["split"]
    out = ws.path(f"comparison_{c['run_a']}_vs_{c['run_b']}_{split}.json")
    _write_via(out, lambda p: evalx.write_comparison_report(report, p))
    ws.write_manifest("compare", {"run_a": path_a, "run_b": path_b}, {"report": out})


def stage_export_plots(ws: Workspace):
    """Emit plot-ready CSVs (rank histograms) for every run present."""
    gold = ws.load_gold_map()
    queries = ws.load_split(ws.config["split"])
    qids = [q.query_id for q in queries]
    split = ws.config["split"]
    outputs = {}
    for run_name in ("sparse", "dense", "rerank"):
        run_path = ws.run_path(run_name)
        if not os.path.exists(run_path):
            continue
        histogram = evalx.rank_histogram(trec.read_run(run_path), gold, 10, qids)
        out = ws.path(f"plot_rank_histogram_{run_name}_{split}.csv")
        _write_via(out, lambda p, h=histogram: evalx.write_histogram_csv(h, p))
        outputs[run_name] = out
    if not outputs:
        raise MissingArtifact("no run files present; run a retrieve stage first")
    ws.write_manifest("export-plots", {}, outputs)


_STAGE_FNS = {
    "ingest": stage_ingest,
    "index": stage_index,
    "sparse-retrieve": stage_sparse_retrieve,
    "mine-negatives": stage_mine_negatives,
    "embed": stage_embed,
    "dense-retrieve": stage_dense_retrieve,
    "train-toy": stage_train_toy,
    "rerank": stage_rerank,
    "evaluate": stage_evaluate,
    "compare": stage_compare,
    "export-plots": stage_export_plots,
}

_DATA_ERRORS = (
    ParseError,
    MissingField,
    DuplicateId,
    DuplicateQuery,
    UnknownDocument,
    EmptyInput,
    AllFieldsEmpty,
)


def run_stage(config: dict, stage: str) -> None:
    if stage not in _STAGE_FNS:
        raise ConfigInvalid(f"unknown stage {stage!r}")
    _STAGE_FNS[stage](Workspace(config))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="evidence-pipeline",
        description="Two-stage evidence retrieval pipeline",
    )
    parser.add_argument("stage", choices=STAGES)
    parser.add_argument("--config", required=True, help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker count (advisory)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, args.seed)
        run_stage(config, args.stage)
    except ConfigInvalid as exc:
        log.error("config error: %s", exc)
        return 2
    except MissingArtifact as exc:
        log.error("missing artifact: %s", exc)
        return 3
    except _DATA_ERRORS as exc:
        log.error("data error: %s", exc)
        return 4
    except PipelineError as exc:
        log.error("internal error: %s", exc)
        return 5
    return 0


if __name__ == "__main__":
    sys.exit(main())
