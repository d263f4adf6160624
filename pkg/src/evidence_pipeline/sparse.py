"""Okapi BM25 inverted index, top-k retrieval with caching, negative mining.

Scoring follows the Okapi formulation with term-frequency saturation,
document-length normalization and RSJ IDF (natural log). Repeated query
terms are deduplicated: the score sums over the set of distinct query terms.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

from .corpus import Document, GoldMapping, Query
from .errors import EmptyCollection, InsufficientCandidates, UnknownDocument
from .textproc import (
    AnalyzerConfig,
    analyze,
    compose_document_text,
    validate_field_selection,
)


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75
    idf_floor_mode: str = "verbatim"
    epsilon: float = 0.25

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be positive")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")
        if self.idf_floor_mode not in ("verbatim", "epsilon_floor"):
            raise ValueError(f"unknown idf_floor_mode {self.idf_floor_mode!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def cache_key(self) -> tuple:
        return (self.k1, self.b, self.idf_floor_mode, self.epsilon)


@dataclass
class Bm25Index:
    postings: dict = field(default_factory=dict)  # term -> [(ordinal, tf)]
    doc_lengths: list = field(default_factory=list)
    avgdl: float = 0.0
    doc_count: int = 0
    df: dict = field(default_factory=dict)
    ordinal_to_id: list = field(default_factory=list)
    id_to_ordinal: dict = field(default_factory=dict)
    mean_positive_idf: float = 0.0

    def idf(self, term: str, params: Bm25Params) -> float:
        df_t = self.df.get(term)
        if df_t is None:
            return 0.0
        value = math.log((self.doc_count - df_t + 0.5) / (df_t + 0.5))
        if params.idf_floor_mode == "epsilon_floor" and value < 0.0:
            return params.epsilon * self.mean_positive_idf
        return value


def build_index(collection, fields, analyzer: AnalyzerConfig) -> Bm25Index:
    """Index analyze(compose(doc)) for every document.

    Documents whose token sequence is empty get length 0 and never appear in
    any postings list, so no query can retrieve them.
    """
    collection = list(collection)
    if not collection:
        raise EmptyCollection("cannot index an empty collection")
    fields = validate_field_selection(fields)

    index = Bm25Index()
    for doc in collection:
        ordinal = len(index.ordinal_to_id)
        if doc.doc_id in index.id_to_ordinal:
            raise UnknownDocument(f"duplicate doc_id {doc.doc_id!r} at index build")
        index.ordinal_to_id.append(doc.doc_id)
        index.id_to_ordinal[doc.doc_id] = ordinal
        tokens = analyze(compose_document_text(doc, fields), analyzer)
        index.doc_lengths.append(len(tokens))
        tf: dict[str, int] = {}
        for t in tokens:
            tf[t] = tf.get(t, 0) + 1
        for term, count in tf.items():
            index.postings.setdefault(term, []).append((ordinal, count))
            index.df[term] = index.df.get(term, 0) + 1

    index.doc_count = len(collection)
    index.avgdl = sum(index.doc_lengths) / index.doc_count
    positive = [
        v
        for term in index.df
        if (v := math.log((index.doc_count - index.df[term] + 0.5)
                          / (index.df[term] + 0.5))) > 0
    ]
    index.mean_positive_idf = sum(positive) / len(positive) if positive else 0.0
    return index


def _tf_factor(tf: int, dl: int, index: Bm25Index, params: Bm25Params) -> float:
    k = params.k1 * ((1.0 - params.b) + params.b * dl / index.avgdl)
    return tf / (k + tf)


def score(index: Bm25Index, query_tokens, doc_id: str, params: Bm25Params) -> float:
    """BM25 score of one document for the distinct terms of a query."""
    if doc_id not in index.id_to_ordinal:
        raise UnknownDocument(f"doc_id {doc_id!r} not in index")
    ordinal = index.id_to_ordinal[doc_id]
    dl = index.doc_lengths[ordinal]
    total = 0.0
    for term in set(query_tokens):
        plist = index.postings.get(term)
        if plist is None:
            continue
        tf = next((c for o, c in plist if o == ordinal), 0)
        if tf == 0:
            continue
        total += _tf_factor(tf, dl, index, params) * index.idf(term, params)
    return total


class QueryCache:
    """Thread-safe cache of top-k lists keyed by (tokens, k, params)."""

    def __init__(self):
        self._store: dict = {}
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            return self._store.get(key)

    def put(self, key, value):
        with self._lock:
            self._store[key] = value

    def __len__(self):
        return len(self._store)


def retrieve(
    index: Bm25Index,
    query: Query,
    k: int,
    params: Bm25Params,
    analyzer: AnalyzerConfig,
    cache: QueryCache | None = None,
) -> list[tuple[str, float]]:
    """Top-k documents by BM25 score.

    Zero-score documents are omitted (a document sharing no terms with the
    query is not retrieved). Ties break by ascending doc_id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    tokens = analyze(query.text, analyzer)
    key = (tuple(sorted(set(tokens))), k, params.cache_key())
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit

    accum: dict[int, float] = {}
    for term in set(tokens):
        plist = index.postings.get(term)
        if plist is None:
            continue
        idf = index.idf(term, params)
        for ordinal, tf in plist:
            contrib = _tf_factor(tf, index.doc_lengths[ordinal], index, params) * idf
            accum[ordinal] = accum.get(ordinal, 0.0) + contrib

    scored = [
        (index.ordinal_to_id[o], s) for o, s in accum.items() if s != 0.0
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    result = scored[:k]
    if cache is not None:
        cache.put(key, result)
    return result


def mine_hard_negatives(
    index: Bm25Index,
    query: Query,
    gold: GoldMapping,
    pool_k: int,
    n: int,
    params: Bm25Params,
    analyzer: AnalyzerConfig,
    cache: QueryCache | None = None,
) -> list[str]:
    """First n BM25 top-pool_k documents for the query, gold doc excluded."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if query.query_id not in gold:
        raise UnknownDocument(f"query {query.query_id!r} has no gold entry")
    gold_doc = gold[query.query_id]
    pool = retrieve(index, query, pool_k, params, analyzer, cache)
    negatives = [doc_id for doc_id, _ in pool if doc_id != gold_doc]
    if len(negatives) < n:
        raise InsufficientCandidates(
            f"query {query.query_id!r}: needed {n} non-gold candidates, "
            f"got {len(negatives)} from a pool of {len(pool)}"
        )
    return negatives[:n]
