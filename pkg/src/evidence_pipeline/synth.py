"""Seeded synthetic corpora for end-to-end tests and the toy training study.

Documents come in confusable pairs that share a topic token; each document
additionally carries its own rare token. Queries mention their gold
document's rare token once but repeat the shared topic token and common
filler words, so lexical overlap alone confuses paired documents.
"""

from __future__ import annotations

import numpy as np

from .corpus import Document, GoldMapping, Query

COMMON_VOCAB = [
    "study", "results", "patients", "analysis", "data", "effect", "model",
    "risk", "treatment", "clinical", "evidence", "response", "sample",
    "measure", "trial", "growth", "cells", "virus", "immune", "protein",
    "brain", "sleep", "diet", "exercise", "vaccine", "infection", "cancer",
    "heart", "climate", "energy",
]


def make_synthetic_corpus(
    n_docs: int = 200,
    n_train: int = 300,
    n_dev: int = 100,
    n_test: int = 50,
    seed: int = 7,
):
    """Build (documents, queries, gold) with train/dev/test query splits."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_docs):
        group = i // 2
        commons = rng.choice(COMMON_VOCAB, size=8, replace=True)
        title = f"topic{group} findings on {commons[0]} and {commons[1]}"
        abstract = (
            f"rare{i} marker appears in topic{group} cohort. "
            + " ".join(commons)
            + f" topic{group} rare{i}"
        )
        docs.append(
            Document(
                doc_id=f"d{i:04d}",
                title=title,
                abstract=abstract,
                authors=f"Author {i}; Coauthor {group}",
                journal=f"journal{group % 5}",
                source=f"source{i % 3}",
            )
        )

    queries = []
    gold_entries = {}
    counter = 0
    for split, count in (("train", n_train), ("dev", n_dev), ("test", n_test)):
        for _ in range(count):
            doc_index = int(rng.integers(0, n_docs))
            group = doc_index // 2
            commons = rng.choice(COMMON_VOCAB, size=6, replace=True)
            # topic token repeated, rare token mentioned once
            text = (
                f"topic{group} {commons[0]} {commons[1]} topic{group} "
                f"rare{doc_index} {' '.join(commons[2:])} topic{group}"
            )
            qid = f"q{counter:05d}"
            counter += 1
            queries.append(Query(query_id=qid, text=text, split=split))
            gold_entries[qid] = f"d{doc_index:04d}"
    return docs, queries, GoldMapping(entries=gold_entries)
