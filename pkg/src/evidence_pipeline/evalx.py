"""Ranking metrics, rank histograms, and paired significance tests.

Metrics treat a gold document missing from a query's list as rank infinity
(zero contribution). The Wilcoxon signed-rank test drops zero differences,
uses average ranks for ties, enumerates the exact null for small samples and
falls back to a tie-corrected normal approximation otherwise. McNemar's test
is always the exact two-sided binomial.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .corpus import GoldMapping
from .errors import (
    EmptyRun,
    LengthMismatch,
    MissingGold,
    NonFiniteInput,
    QuerySetMismatch,
)

MRR_CUTOFFS = (1, 5, 10)
RECALL_CUTOFFS = (5, 10)
ALPHA = 0.05
WILCOXON_EXACT_MAX_N = 25


def gold_rank(ranking, gold_doc: str) -> int | None:
    """1-based rank of the gold doc's first occurrence, or None if absent."""
    for i, (doc_id, _score) in enumerate(ranking, start=1):
        if doc_id == gold_doc:
            return i
    return None


def reciprocal_rank(ranking, gold_doc: str, k: int) -> float:
    r = gold_rank(ranking, gold_doc)
    if r is None or r > k:
        return 0.0
    return 1.0 / r


def _require_gold(run: dict, gold: GoldMapping, query_ids) -> list[str]:
    qids = sorted(query_ids if query_ids is not None else run.keys())
    if not qids:
        raise EmptyRun("no queries to evaluate")
    for qid in qids:
        if qid not in gold:
            raise MissingGold(f"query {qid!r} has no gold entry")
    return qids


def mrr_at_k(run: dict, gold: GoldMapping, k: int, query_ids=None):
    """Mean reciprocal rank at cutoff k, plus the per-query vector."""
    qids = _require_gold(run, gold, query_ids)
    vector = [reciprocal_rank(run.get(qid, []), gold[qid], k) for qid in qids]
    return sum(vector) / len(vector), vector


def recall_at_k(run: dict, gold: GoldMapping, k: int, query_ids=None) -> float:
    """Fraction of queries whose gold doc appears within the top k."""
    qids = _require_gold(run, gold, query_ids)
    hits = sum(
        1
        for qid in qids
        if (r := gold_rank(run.get(qid, []), gold[qid])) is not None and r <= k
    )
    return hits / len(qids)


@dataclass
class MetricsReport:
    query_count: int
    mrr: dict = field(default_factory=dict)  # k -> value
    recall: dict = field(default_factory=dict)  # k -> value
    per_query_rr: dict = field(default_factory=dict)  # k -> {qid: rr}

    def check_invariants(self) -> None:
        for k, v in {**self.mrr, **self.recall}.items():
            if not 0.0 <= v <= 1.0 + 1e-12:
                raise ValueError(f"metric at k={k} out of [0,1]: {v}")
        if not (self.mrr[1] <= self.mrr[5] + 1e-12 <= self.mrr[10] + 2e-12):
            raise ValueError(f"MRR not monotone in k: {self.mrr}")
        if self.recall[5] > self.recall[10] + 1e-12:
            raise ValueError(f"Recall not monotone in k: {self.recall}")
        for k in RECALL_CUTOFFS:
            if self.mrr[k] > self.recall[k] + 1e-12:
                raise ValueError(f"MRR@{k} exceeds Recall@{k}")

    def as_dict(self) -> dict:
        return {
            "query_count": self.query_count,
            "mrr": {str(k): v for k, v in self.mrr.items()},
            "recall": {str(k): v for k, v in self.recall.items()},
        }


def compute_metrics(run: dict, gold: GoldMapping, query_ids=None) -> MetricsReport:
    qids = _require_gold(run, gold, query_ids)
    report = MetricsReport(query_count=len(qids))
    for k in MRR_CUTOFFS:
        value, vector = mrr_at_k(run, gold, k, qids)
        report.mrr[k] = value
        report.per_query_rr[k] = dict(zip(qids, vector))
    for k in RECALL_CUTOFFS:
        report.recall[k] = recall_at_k(run, gold, k, qids)
    report.check_invariants()
    return report


def rank_histogram(run: dict, gold: GoldMapping, max_rank: int = 10, query_ids=None):
    """Percentage of queries whose gold doc lands at each rank 1..max_rank.

    The final bucket collects ranks beyond max_rank and absent golds.
    """
    qids = _require_gold(run, gold, query_ids)
    buckets = {str(r): 0 for r in range(1, max_rank + 1)}
    overflow = f"{max_rank + 1}+"
    buckets[overflow] = 0
    for qid in qids:
        r = gold_rank(run.get(qid, []), gold[qid])
        if r is None or r > max_rank:
            buckets[overflow] += 1
        else:
            buckets[str(r)] += 1
    return {label: 100.0 * count / len(qids) for label, count in buckets.items()}


# --- Wilcoxon signed-rank test ---------------------------------------------


def _signed_ranks(x, y):
    """Absolute-difference ranks (average ranks for ties), zeros dropped.

    Returns (ranks, signs) with ranks doubled so they are exact integers.
    """
    if len(x) != len(y):
        raise LengthMismatch(f"paired samples of length {len(x)} vs {len(y)}")
    diffs = [float(b) - float(a) for a, b in zip(x, y)]
    if any(not math.isfinite(d) for d in diffs):
        raise NonFiniteInput("paired differences contain non-finite values")
    diffs = [d for d in diffs if d != 0.0]
    order = sorted(range(len(diffs)), key=lambda i: abs(diffs[i]))
    double_ranks = [0] * len(diffs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and abs(diffs[order[j + 1]]) == abs(diffs[order[i]]):
            j += 1
        avg_double = (i + 1) + (j + 1)  # 2 * average of ranks i+1..j+1
        for pos in range(i, j + 1):
            double_ranks[order[pos]] = avg_double
        i = j + 1
    signs = [1 if d > 0 else -1 for d in diffs]
    return double_ranks, signs


def _exact_wilcoxon_p(double_ranks, w_plus_doubled: int) -> float:
    """Exact two-sided p via the null distribution of W+ (DP convolution)."""
    total = sum(double_ranks)
    # counts[s] = number of sign assignments with doubled W+ equal to s
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in double_ranks:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    n_assignments = 1 << len(double_ranks)
    w_minus = total - w_plus_doubled
    w_min = min(w_plus_doubled, w_minus)
    tail = sum(counts[: w_min + 1])
    return min(1.0, 2.0 * tail / n_assignments)


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _approx_wilcoxon_p(double_ranks, w_plus_doubled: int) -> float:
    """Normal approximation with continuity correction and tie correction."""
    n = len(double_ranks)
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction: subtract sum(t^3 - t)/48 per tied group
    group_sizes: dict[int, int] = {}
    for r in double_ranks:
        group_sizes[r] = group_sizes.get(r, 0) + 1
    for size in group_sizes.values():
        if size > 1:
            var -= (size**3 - size) / 48.0
    if var <= 0:
        return 1.0
    w_plus = w_plus_doubled / 2.0
    w_minus = sum(double_ranks) / 2.0 - w_plus
    w = min(w_plus, w_minus)
    z = (w - mu + 0.5) / math.sqrt(var)
    return min(1.0, 2.0 * (1.0 - _normal_sf(z)))


def wilcoxon_signed_rank(x, y) -> float:
    """Two-sided Wilcoxon signed-rank p-value for paired samples.

    Zero differences are dropped; with nothing left, p = 1.0. Exact sign
    enumeration up to n = 25 remaining pairs, normal approximation above.
    """
    double_ranks, signs = _signed_ranks(x, y)
    if not double_ranks:
        return 1.0
    w_plus_doubled = sum(r for r, s in zip(double_ranks, signs) if s > 0)
    if len(double_ranks) <= WILCOXON_EXACT_MAX_N:
        return _exact_wilcoxon_p(double_ranks, w_plus_doubled)
    return _approx_wilcoxon_p(double_ranks, w_plus_doubled)


# --- McNemar's exact test ---------------------------------------------------


def mcnemar_exact(b: int, c: int) -> float:
    """Exact two-sided binomial McNemar p-value from discordant counts.

    Computed with exact integer arithmetic, so it stays accurate for
    b + c in the hundreds.
    """
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be non-negative")
    n = b + c
    if n == 0:
        return 1.0
    tail = sum(math.comb(n, i) for i in range(min(b, c) + 1))
    return float(min(Fraction(1), 2 * Fraction(tail, 2**n)))


# --- run comparison ---------------------------------------------------------


@dataclass
class ComparisonReport:
    deltas: dict  # metric label -> metric(B) - metric(A)
    wilcoxon_p: float  # on per-query MRR@5 contributions
    b: int  # queries correct at rank 1 only under A
    c: int  # queries correct at rank 1 only under B
    mcnemar_p: float
    alpha: float = ALPHA

    @property
    def wilcoxon_significant(self) -> bool:
        return self.wilcoxon_p < self.alpha

    @property
    def mcnemar_significant(self) -> bool:
        return self.mcnemar_p < self.alpha

    def as_dict(self) -> dict:
        return {
            "deltas": self.deltas,
            "wilcoxon_p": self.wilcoxon_p,
            "wilcoxon_significant": self.wilcoxon_significant,
            "discordant_b": self.b,
            "discordant_c": self.c,
            "mcnemar_p": self.mcnemar_p,
            "mcnemar_significant": self.mcnemar_significant,
            "alpha": self.alpha,
        }


def compare_runs(run_a: dict, run_b: dict, gold: GoldMapping, query_ids=None) -> ComparisonReport:
    """Paired comparison of two runs over the same query set."""
    if query_ids is None:
        if set(run_a) != set(run_b):
            raise QuerySetMismatch("runs cover different query sets")
        query_ids = sorted(run_a)
    report_a = compute_metrics(run_a, gold, query_ids)
    report_b = compute_metrics(run_b, gold, query_ids)

    deltas = {}
    for k in MRR_CUTOFFS:
        deltas[f"mrr@{k}"] = report_b.mrr[k] - report_a.mrr[k]
    for k in RECALL_CUTOFFS:
        deltas[f"recall@{k}"] = report_b.recall[k] - report_a.recall[k]

    qids = sorted(query_ids)
    x = [report_a.per_query_rr[5][q] for q in qids]
    y = [report_b.per_query_rr[5][q] for q in qids]
    p_wilcoxon = wilcoxon_signed_rank(x, y)

    b = c = 0
    for q in qids:
        correct_a = report_a.per_query_rr[1][q] == 1.0
        correct_b = report_b.per_query_rr[1][q] == 1.0
        if correct_a and not correct_b:
            b += 1
        elif correct_b and not correct_a:
            c += 1
    return ComparisonReport(
        deltas=deltas, wilcoxon_p=p_wilcoxon, b=b, c=c, mcnemar_p=mcnemar_exact(b, c)
    )


# --- report serialization ---------------------------------------------------


def write_metrics_report(report: MetricsReport, json_path=None, text_path=None) -> None:
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if text_path is not None:
        lines = [f"{'queries':<12}{report.query_count}"]
        for k in MRR_CUTOFFS:
            lines.append(f"{f'MRR@{k}':<12}{report.mrr[k]:.4f}")
        for k in RECALL_CUTOFFS:
            lines.append(f"{f'Recall@{k}':<12}{report.recall[k]:.4f}")
        with open(text_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def write_comparison_report(report: ComparisonReport, json_path) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_histogram_csv(histogram: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank_bucket", "percent"])
        for bucket, percent in histogram.items():
            writer.writerow([bucket, f"{percent:.6f}"])
