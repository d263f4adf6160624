"""Loading and validation of document collections, query sets and gold maps.

Supported formats: TSV (header row, literal tab separators, no quoting) and
JSONL (one object per line). All files are UTF-8.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .errors import (
    DuplicateId,
    DuplicateQuery,
    EmptyInput,
    MissingField,
    ParseError,
    UnknownDocument,
)
from .textproc import AnalyzerConfig, analyze

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")

CORPUS_REQUIRED = ("doc_id", "title", "abstract")
CORPUS_OPTIONAL = ("authors", "journal", "source")
QUERY_COLUMNS = ("query_id", "text")
GOLD_COLUMNS = ("query_id", "doc_id")


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str = ""
    abstract: str = ""
    authors: str = ""
    journal: str = ""
    source: str = ""

    def __post_init__(self):
        if not self.doc_id:
            raise MissingField("document with empty doc_id")
        if not self.title and not self.abstract:
            raise MissingField(
                f"document {self.doc_id!r} has neither title nor abstract"
            )


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str
    split: str

    def __post_init__(self):
        if not self.query_id:
            raise MissingField("query with empty query_id")
        if not self.text:
            raise MissingField(f"query {self.query_id!r} has empty text")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class GoldMapping:
    """query_id -> the single relevant doc_id."""

    entries: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, query_id: str) -> str:
        return self.entries[query_id]

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.entries

    def validate_against(self, documents: list[Document]) -> None:
        """Check every referenced doc_id exists in the collection."""
        known = {d.doc_id for d in documents}
        for qid, did in self.entries.items():
            if did not in known:
                raise UnknownDocument(
                    f"gold entry {qid!r} references unknown document {did!r}"
                )


@dataclass(frozen=True)
class LengthStats:
    min: int
    median: int
    max: int

    def __post_init__(self):
        if not (0 <= self.min <= self.median <= self.max):
            raise ValueError(f"inconsistent length stats: {self}")


def _iter_rows(path, fmt: str, required: tuple, optional: tuple = ()):
    """Yield dict rows from a TSV or JSONL file, validating the schema."""
    if fmt not in ("tsv", "jsonl"):
        raise ParseError(f"unknown format {fmt!r}")
    with open(path, encoding="utf-8") as fh:
        if fmt == "tsv":
            header_line = fh.readline()
            if not header_line:
                return  # empty file
            header = header_line.rstrip("\n").split("\t")
            missing = [c for c in required if c not in header]
            if missing:
                raise ParseError(f"{path}: header lacks required columns {missing}")
            for lineno, line in enumerate(fh, start=2):
                line = line.rstrip("\n")
                if not line:
                    continue
                cells = line.split("\t")
                if len(cells) != len(header):
                    raise ParseError(
                        f"{path}:{lineno}: expected {len(header)} columns, "
                        f"got {len(cells)}"
                    )
                yield dict(zip(header, cells))
        else:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"{path}:{lineno}: bad JSON: {exc}") from exc
                if not isinstance(obj, dict):
                    raise ParseError(f"{path}:{lineno}: expected a JSON object")
                missing = [c for c in required if c not in obj]
                if missing:
                    raise ParseError(
                        f"{path}:{lineno}: object lacks required keys {missing}"
                    )
                yield obj


def load_corpus(path, fmt: str = "tsv") -> list[Document]:
    """Load a document collection; enforces doc_id uniqueness."""
    docs = []
    seen = set()
    for row in _iter_rows(path, fmt, CORPUS_REQUIRED, CORPUS_OPTIONAL):
        doc_id = str(row.get("doc_id", ""))
        if not doc_id:
            raise MissingField(f"{path}: row lacks doc_id")
        if doc_id in seen:
            raise DuplicateId(f"{path}: duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        docs.append(
            Document(
                doc_id=doc_id,
                title=str(row.get("title", "")),
                abstract=str(row.get("abstract", "")),
                authors=str(row.get("authors", "")),
                journal=str(row.get("journal", "")),
                source=str(row.get("source", "")),
            )
        )
    log.info("loaded %d documents from %s", len(docs), path)
    return docs


def load_queries(path, fmt: str, split: str) -> list[Query]:
    """Load a query set, labeling every query with ``split``."""
    queries = []
    seen = set()
    for row in _iter_rows(path, fmt, QUERY_COLUMNS):
        qid = str(row.get("query_id", ""))
        if not qid:
            raise MissingField(f"{path}: row lacks query_id")
        if qid in seen:
            raise DuplicateId(f"{path}: duplicate query_id {qid!r}")
        seen.add(qid)
        queries.append(Query(query_id=qid, text=str(row.get("text", "")), split=split))
    if not queries:
        log.warning("query file %s is empty", path)
    else:
        log.info("loaded %d %s queries from %s", len(queries), split, path)
    return queries


def load_gold(path, fmt: str = "tsv") -> GoldMapping:
    """Load a query->doc gold mapping (unvalidated against any collection)."""
    entries = {}
    for row in _iter_rows(path, fmt, GOLD_COLUMNS):
        qid = str(row.get("query_id", ""))
        did = str(row.get("doc_id", ""))
        if not qid or not did:
            raise MissingField(f"{path}: gold row lacks query_id or doc_id")
        if qid in entries:
            raise DuplicateQuery(f"{path}: query {qid!r} has multiple gold rows")
        entries[qid] = did
    return GoldMapping(entries=entries)


def save_corpus(docs: list[Document], path, fmt: str = "tsv") -> None:
    """Serialize a collection so that re-loading round-trips field-by-field."""
    columns = CORPUS_REQUIRED + CORPUS_OPTIONAL
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "tsv":
            fh.write("\t".join(columns) + "\n")
            for d in docs:
                fh.write("\t".join(getattr(d, c) for c in columns) + "\n")
        elif fmt == "jsonl":
            for d in docs:
                fh.write(json.dumps({c: getattr(d, c) for c in columns}) + "\n")
        else:
            raise ParseError(f"unknown format {fmt!r}")


def save_queries(queries: list[Query], path, fmt: str = "tsv") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "tsv":
            fh.write("query_id\ttext\n")
            for q in queries:
                fh.write(f"{q.query_id}\t{q.text}\n")
        elif fmt == "jsonl":
            for q in queries:
                fh.write(json.dumps({"query_id": q.query_id, "text": q.text}) + "\n")
        else:
            raise ParseError(f"unknown format {fmt!r}")


def save_gold(gold: GoldMapping, path, fmt: str = "tsv") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "tsv":
            fh.write("query_id\tdoc_id\n")
            for qid, did in gold.entries.items():
                fh.write(f"{qid}\t{did}\n")
        elif fmt == "jsonl":
            for qid, did in gold.entries.items():
                fh.write(json.dumps({"query_id": qid, "doc_id": did}) + "\n")
        else:
            raise ParseError(f"unknown format {fmt!r}")


def corpus_stats(texts, analyzer: AnalyzerConfig) -> LengthStats:
    """Min/median/max token counts.

    The median of an even-length multiset is the lower-middle element, so the
    result is always an attained integer token count.
    """
    counts = sorted(len(analyze(t, analyzer)) for t in texts)
    if not counts:
        raise EmptyInput("corpus_stats over an empty text sequence")
    median = counts[(len(counts) - 1) // 2]
    return LengthStats(min=counts[0], median=median, max=counts[-1])
