"""TREC run format I/O.

A run is represented as ``dict[query_id, list[(doc_id, score)]]`` with each
list sorted by descending score (ties broken upstream). The file format is
the standard six-column layout::

    query_id Q0 doc_id rank score tag

space-separated, rank starting at 1.
"""

from __future__ import annotations

from .errors import ParseError


def validate_run(run: dict) -> None:
    """Check per-query invariants: unique doc_ids, non-increasing scores."""
    for qid, ranking in run.items():
        doc_ids = [d for d, _ in ranking]
        if len(set(doc_ids)) != len(doc_ids):
            raise ParseError(f"query {qid!r}: duplicate doc_id in ranking")
        scores = [s for _, s in ranking]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ParseError(f"query {qid!r}: scores increase down the ranking")


def write_run(run: dict, path, tag: str = "evidence-pipeline") -> None:
    validate_run(run)
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(run):
            for rank, (doc_id, score) in enumerate(run[qid], start=1):
                fh.write(f"{qid} Q0 {doc_id} {rank} {score:.10g} {tag}\n")


def read_run(path) -> dict:
    run: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(f"{path}:{lineno}: expected 6 columns")
            qid, _q0, doc_id, _rank, score, _tag = parts
            try:
                run.setdefault(qid, []).append((doc_id, float(score)))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad score {score!r}") from exc
    validate_run(run)
    return run
