"""Independent brute-force oracles used to cross-check the engine.

Everything here is written directly from the mathematical definitions and
deliberately shares no code with the implementation under test.
"""

import itertools
import math


def bm25_direct_score(doc_tokens, query_tokens, all_docs, k1, b):
    """Direct evaluation of the Okapi scoring sum for one document.

    ``all_docs`` is a list of token lists for the whole collection.
    Distinct query terms each contribute once.
    """
    n_docs = len(all_docs)
    avgdl = sum(len(d) for d in all_docs) / n_docs
    dl = len(doc_tokens)
    total = 0.0
    for term in set(query_tokens):
        tf = doc_tokens.count(term)
        if tf == 0:
            continue
        df = sum(1 for d in all_docs if term in d)
        idf = math.log((n_docs - df + 0.5) / (df + 0.5))
        saturation = tf / (k1 * ((1 - b) + b * dl / avgdl) + tf)
        total += saturation * idf
    return total


def bm25_brute_force_ranking(doc_token_map, query_tokens, k, k1=1.5, b=0.75):
    """Score every document directly; drop zero scores; sort by (-score, id)."""
    all_docs = [doc_token_map[d] for d in sorted(doc_token_map)]
    scored = []
    for doc_id in sorted(doc_token_map):
        s = bm25_direct_score(doc_token_map[doc_id], query_tokens, all_docs, k1, b)
        if s != 0.0:
            scored.append((doc_id, s))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def rank_of_gold(doc_ids, gold_doc):
    for i, d in enumerate(doc_ids, start=1):
        if d == gold_doc:
            return i
    return None


def mrr_oracle(run, gold_entries, k):
    """Per-definition MRR@k over the run's query set."""
    values = []
    for qid in run:
        r = rank_of_gold([d for d, _ in run[qid]], gold_entries[qid])
        values.append(1.0 / r if r is not None and r <= k else 0.0)
    return sum(values) / len(values)


def recall_oracle(run, gold_entries, k):
    hits = 0
    for qid in run:
        r = rank_of_gold([d for d, _ in run[qid]], gold_entries[qid])
        if r is not None and r <= k:
            hits += 1
    return hits / len(run)


def _average_ranks(values):
    """Average ranks of |values|, 1-based, ties averaged."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + 1 + j + 1) / 2.0
        for pos in range(i, j + 1):
            ranks[order[pos]] = avg
        i = j + 1
    return ranks


def wilcoxon_enumeration_oracle(x, y):
    """Exact two-sided Wilcoxon p by explicit enumeration of sign vectors."""
    diffs = [b - a for a, b in zip(x, y) if b - a != 0.0]
    if not diffs:
        return 1.0
    ranks = _average_ranks([abs(d) for d in diffs])
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, diffs) if d < 0)
    w_min = min(w_plus, w_minus)
    count = 0
    total = 0
    for signs in itertools.product((0, 1), repeat=len(diffs)):
        total += 1
        w = sum(r for r, s in zip(ranks, signs) if s)
        if w <= w_min + 1e-9:
            count += 1
    return min(1.0, 2.0 * count / total)


def mcnemar_oracle(b, c):
    """Exact binomial two-sided p with float arithmetic (small counts only)."""
    n = b + c
    if n == 0:
        return 1.0
    tail = sum(math.comb(n, i) for i in range(min(b, c) + 1)) / 2.0**n
    return min(1.0, 2.0 * tail)
