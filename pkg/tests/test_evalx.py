import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evidence_pipeline.corpus import GoldMapping
from evidence_pipeline.errors import (
    EmptyRun,
    LengthMismatch,
    MissingGold,
    QuerySetMismatch,
)
from evidence_pipeline.evalx import (
    compare_runs,
    compute_metrics,
    mcnemar_exact,
    mrr_at_k,
    rank_histogram,
    recall_at_k,
    reciprocal_rank,
    wilcoxon_signed_rank,
)

from oracles import mcnemar_oracle, mrr_oracle, recall_oracle, wilcoxon_enumeration_oracle


def run_with_gold_ranks(ranks):
    """Build a run + gold where query i's gold doc sits at the given rank.

    rank None means the gold doc is absent from the list.
    """
    run, gold = {}, {}
    for i, rank in enumerate(ranks):
        qid = f"q{i}"
        gold[qid] = f"gold{i}"
        length = max(10, (rank or 0))
        docs = [f"filler{i}_{j}" for j in range(length)]
        if rank is not None:
            docs[rank - 1] = f"gold{i}"
        run[qid] = [(d, float(length - j)) for j, d in enumerate(docs)]
    return run, GoldMapping(entries=gold)


class TestReciprocalRank:
    def test_rank_one(self):
        ranking = [("gold", 2.0), ("x", 1.0)]
        for k in (1, 5, 10):
            assert reciprocal_rank(ranking, "gold", k) == 1.0

    def test_boundary_at_cutoff(self):
        ranking = [(f"d{i}", 10.0 - i) for i in range(5)] + [("gold", 1.0)]
        assert reciprocal_rank(ranking, "gold", 5) == 0.0
        assert reciprocal_rank(ranking, "gold", 10) == pytest.approx(1 / 6)

    def test_absent_gold(self):
        assert reciprocal_rank([("a", 1.0)], "gold", 10) == 0.0


class TestMrrRecall:
    def test_hand_sum(self):
        run, gold = run_with_gold_ranks([1, 2, 6, None])
        value, vector = mrr_at_k(run, gold, 5)
        assert value == pytest.approx((1 + 0.5 + 0 + 0) / 4)
        assert vector == [1.0, 0.5, 0.0, 0.0]

    def test_all_rank_one(self):
        run, gold = run_with_gold_ranks([1, 1, 1])
        assert mrr_at_k(run, gold, 5)[0] == 1.0

    def test_recall_hand_count(self):
        run, gold = run_with_gold_ranks([1, 2, 6, None])
        assert recall_at_k(run, gold, 5) == 0.5
        assert recall_at_k(run, gold, 10) == 0.75

    def test_missing_gold(self):
        run, gold = run_with_gold_ranks([1])
        run["orphan"] = [("d", 1.0)]
        with pytest.raises(MissingGold):
            mrr_at_k(run, gold, 5)

    def test_empty_run(self):
        with pytest.raises(EmptyRun):
            recall_at_k({}, GoldMapping(entries={}), 5)

    def test_random_runs_match_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            ranks = [
                None if rng.random() < 0.2 else int(rng.integers(1, 15))
                for _ in range(int(rng.integers(1, 12)))
            ]
            run, gold = run_with_gold_ranks(ranks)
            for k in (1, 5, 10):
                assert mrr_at_k(run, gold, k)[0] == pytest.approx(
                    mrr_oracle(run, gold.entries, k), abs=1e-12
                )
            for k in (5, 10):
                assert recall_at_k(run, gold, k) == pytest.approx(
                    recall_oracle(run, gold.entries, k), abs=1e-12
                )

    def test_metrics_report_invariants_on_random_runs(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            ranks = [
                None if rng.random() < 0.3 else int(rng.integers(1, 15))
                for _ in range(int(rng.integers(1, 20)))
            ]
            run, gold = run_with_gold_ranks(ranks)
            report = compute_metrics(run, gold)
            report.check_invariants()  # raises on violation


class TestRankHistogram:
    def test_three_queries(self):
        run, gold = run_with_gold_ranks([1, 2, 15])
        hist = rank_histogram(run, gold)
        assert hist["1"] == pytest.approx(100 / 3)
        assert hist["2"] == pytest.approx(100 / 3)
        assert hist["11+"] == pytest.approx(100 / 3)

    def test_all_rank_one(self):
        run, gold = run_with_gold_ranks([1, 1])
        hist = rank_histogram(run, gold)
        assert hist["1"] == 100.0
        assert all(v == 0.0 for k, v in hist.items() if k != "1")

    def test_buckets_sum_to_100(self):
        rng = np.random.default_rng(2)
        ranks = [None if rng.random() < 0.3 else int(rng.integers(1, 20)) for _ in range(37)]
        run, gold = run_with_gold_ranks(ranks)
        assert sum(rank_histogram(run, gold).values()) == pytest.approx(100.0, abs=1e-9)


class TestWilcoxon:
    def test_identical_samples(self):
        x = [0.1, 0.5, 0.9]
        assert wilcoxon_signed_rank(x, x) == 1.0

    def test_six_positive_differences(self):
        x = [0.0] * 6
        y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        assert wilcoxon_signed_rank(x, y) == pytest.approx(2 / 64, abs=1e-12)

    def test_exact_branch_matches_enumeration_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            n = int(rng.integers(1, 11))
            x = rng.integers(0, 4, size=n).astype(float).tolist()
            y = rng.integers(0, 4, size=n).astype(float).tolist()
            assert wilcoxon_signed_rank(x, y) == pytest.approx(
                wilcoxon_enumeration_oracle(x, y), abs=1e-12
            )

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            wilcoxon_signed_rank([1.0], [1.0, 2.0])

    def test_large_sample_uses_normal_approximation(self):
        rng = np.random.default_rng(4)
        x = rng.normal(0, 1, size=80)
        y = x + rng.normal(0.5, 1, size=80)
        p = wilcoxon_signed_rank(x.tolist(), y.tolist())
        assert 0.0 < p < 1.0
        # strongly shifted pairs should be significant
        assert p < 0.01

    def test_approximation_continuous_with_exact_branch(self):
        # same data through both branches should roughly agree
        rng = np.random.default_rng(5)
        x = rng.normal(0, 1, size=25).tolist()
        y = (np.array(x) + rng.normal(0.3, 1, size=25)).tolist()
        from evidence_pipeline import evalx

        exact = wilcoxon_signed_rank(x, y)
        ranks, signs = evalx._signed_ranks(x, y)
        w_plus = sum(r for r, s in zip(ranks, signs) if s > 0)
        approx = evalx._approx_wilcoxon_p(ranks, w_plus)
        assert approx == pytest.approx(exact, abs=0.03)


class TestMcNemar:
    def test_zero_zero(self):
        assert mcnemar_exact(0, 0) == 1.0

    def test_paper_counts(self):
        p = mcnemar_exact(231, 70)
        assert 1.5e-21 < p < 6.0e-21  # 3.0e-21 within a factor of 2

    def test_five_one(self):
        assert mcnemar_exact(5, 1) == 14 / 64 == 0.21875

    def test_symmetry(self):
        for b, c in [(3, 7), (0, 4), (12, 12)]:
            assert mcnemar_exact(b, c) == mcnemar_exact(c, b)

    def test_p_decreases_with_imbalance(self):
        total = 30
        ps = [mcnemar_exact(b, total - b) for b in range(total // 2, -1, -1)]
        assert all(a >= b for a, b in zip(ps, ps[1:]))

    def test_matches_float_oracle_small_counts(self):
        for b in range(0, 8):
            for c in range(0, 8):
                assert mcnemar_exact(b, c) == pytest.approx(
                    mcnemar_oracle(b, c), abs=1e-12
                )


class TestCompareRuns:
    def test_run_vs_itself(self):
        run, gold = run_with_gold_ranks([1, 3, None, 2])
        report = compare_runs(run, run, gold)
        assert report.b == 0 and report.c == 0
        assert report.wilcoxon_p == 1.0 and report.mcnemar_p == 1.0
        assert all(v == 0.0 for v in report.deltas.values())

    def test_b_fixes_three_queries(self):
        run_a, gold = run_with_gold_ranks([2, 2, 2, 1])
        run_b, _ = run_with_gold_ranks([1, 1, 1, 1])
        report = compare_runs(run_a, run_b, gold)
        assert (report.b, report.c) == (0, 3)
        assert report.mcnemar_p == pytest.approx(0.25)

    def test_swap_symmetry(self):
        run_a, gold = run_with_gold_ranks([1, 4, None, 2, 1])
        run_b, _ = run_with_gold_ranks([2, 1, 3, 2, None])
        fwd = compare_runs(run_a, run_b, gold)
        rev = compare_runs(run_b, run_a, gold)
        assert (fwd.b, fwd.c) == (rev.c, rev.b)
        assert fwd.mcnemar_p == rev.mcnemar_p
        assert fwd.wilcoxon_p == rev.wilcoxon_p
        for key in fwd.deltas:
            assert fwd.deltas[key] == pytest.approx(-rev.deltas[key])

    def test_query_set_mismatch(self):
        run_a, gold = run_with_gold_ranks([1, 2])
        run_b = {"other": [("d", 1.0)]}
        with pytest.raises(QuerySetMismatch):
            compare_runs(run_a, run_b, gold)


@st.composite
def random_run_case(draw):
    n = draw(st.integers(1, 12))
    ranks = draw(
        st.lists(
            st.one_of(st.none(), st.integers(1, 15)), min_size=n, max_size=n
        )
    )
    return ranks


class TestMetricProperties:
    @settings(max_examples=60, deadline=None)
    @given(random_run_case())
    def test_monotonicity_and_bounds(self, ranks):
        run, gold = run_with_gold_ranks(ranks)
        report = compute_metrics(run, gold)
        assert report.mrr[1] <= report.mrr[5] <= report.mrr[10]
        assert report.recall[5] <= report.recall[10]
        for k in (5, 10):
            assert report.mrr[k] <= report.recall[k] + 1e-12

    def test_published_table_orderings_pass_invariant_checker(self):
        # the invariant checker must accept the published-style orderings
        from evidence_pipeline.evalx import MetricsReport

        report = MetricsReport(
            query_count=1446,
            mrr={1: 0.4385, 5: 0.5025, 10: 0.5097},
            recall={5: 0.5982, 10: 0.6508},
        )
        report.check_invariants()
