"""Depth-limited re-ordering of candidate lists via pluggable pair scorers.

Only the first ``depth`` candidates of each list are re-scored and re-sorted;
the tail keeps its original order. Output scores stay non-increasing: tail
entries get the head minimum minus a small per-position epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DuplicatePair, MissingScore, ParseError
from .textproc import AnalyzerConfig, analyze

TAIL_EPSILON = 1e-6


@dataclass(frozen=True)
class RerankConfig:
    depth: int = 10
    tail_policy: str = "preserve"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.tail_policy != "preserve":
            raise ValueError(f"unknown tail_policy {self.tail_policy!r}")


class ScoreTable:
    """Map (query_id, doc_id) -> score, loaded from the sidecar score TSV."""

    def __init__(self, scores: dict | None = None):
        self.scores = dict(scores or {})

    def __call__(self, query_id: str, doc_id: str) -> float:
        try:
            return self.scores[(query_id, doc_id)]
        except KeyError:
            raise MissingScore(f"no score for pair ({query_id!r}, {doc_id!r})") from None

    def __len__(self):
        return len(self.scores)


def load_scores(path) -> ScoreTable:
    """Read a headerless query_id<TAB>doc_id<TAB>score file."""
    scores: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 tab-separated columns")
            qid, did, raw = parts
            try:
                value = float(raw)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad score {raw!r}") from exc
            if (qid, did) in scores:
                raise DuplicatePair(f"{path}:{lineno}: duplicate pair ({qid}, {did})")
            scores[(qid, did)] = value
    return ScoreTable(scores)


def write_scores(table: ScoreTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (qid, did), value in sorted(table.scores.items()):
            fh.write(f"{qid}\t{did}\t{value:.10g}\n")


def overlap_scorer(query_text: str, doc_text: str, analyzer: AnalyzerConfig) -> float:
    """Jaccard overlap of full-mode token sets; 0 when both texts are empty."""
    q = set(analyze(query_text, analyzer))
    d = set(analyze(doc_text, analyzer))
    if not q and not d:
        return 0.0
    return len(q & d) / len(q | d)


def rerank_list(ranking, query_id: str, scorer, config: RerankConfig):
    """Re-rank one query's candidate list."""
    head = ranking[: config.depth]
    tail = ranking[config.depth :]
    scored = []
    for prior_rank, (doc_id, _old) in enumerate(head):
        scored.append((doc_id, float(scorer(query_id, doc_id)), prior_rank))
    scored.sort(key=lambda t: (-t[1], t[2], t[0]))
    result = [(doc_id, new_score) for doc_id, new_score, _ in scored]
    if tail:
        floor = min(s for _, s in result)
        for i, (doc_id, _old) in enumerate(tail, start=1):
            result.append((doc_id, floor - TAIL_EPSILON * i))
    return result


def rerank(run: dict, scorer, config: RerankConfig) -> dict:
    """Re-rank every query list in a run; membership and length preserved."""
    return {
        qid: rerank_list(ranking, qid, scorer, config)
        for qid, ranking in run.items()
    }
