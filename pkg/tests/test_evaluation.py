import numpy as np
import pytest

from citefuse.evaluation import (
    EvaluationError,
    average_precision_at_k,
    evaluate_run,
    map_at_k,
    precision_at_k,
    recall_at_k,
)
from citefuse.retrieval import RankedList


def rl(qid, ids):
    return RankedList(query_id=qid, items=[(cid, 1.0 - i * 0.01) for i, cid in enumerate(ids)])


class TestPrecision:
    def test_single_query(self):
        recs = [rl("q", ["a", "b", "c", "x", "x2", "x3", "x4", "x5", "x6", "x7"])]
        truth = {"q": {"a", "b", "c"}}
        assert precision_at_k(recs, truth, 10) == pytest.approx(0.3)

    def test_all_relevant(self):
        recs = [rl("q", ["a", "b"])]
        assert precision_at_k(recs, {"q": {"a", "b"}}, 2) == 1.0

    def test_mean_over_queries(self):
        recs = [
            rl("q1", ["a", "b"] + [f"x{i}" for i in range(8)]),
            rl("q2", ["a", "b", "c", "d"] + [f"x{i}" for i in range(6)]),
        ]
        truth = {"q1": {"a", "b"}, "q2": {"a", "b", "c", "d"}}
        assert precision_at_k(recs, truth, 10) == pytest.approx(0.3)

    def test_missing_truth_is_error(self):
        with pytest.raises(EvaluationError):
            precision_at_k([rl("q", ["a"])], {}, 1)

    def test_short_list_is_error_without_padding(self):
        with pytest.raises(EvaluationError):
            precision_at_k([rl("q", ["a"])], {"q": {"a"}}, 5)
        assert precision_at_k([rl("q", ["a"])], {"q": {"a"}}, 5, pad=True) == pytest.approx(0.2)


class TestRecall:
    def test_full_recall(self):
        recs = [rl("q", ["a", "b"] + [f"x{i}" for i in range(8)])]
        assert recall_at_k(recs, {"q": {"a", "b"}}, 10) == 1.0

    def test_partial(self):
        recs = [rl("q", ["a"] + [f"x{i}" for i in range(9)])]
        assert recall_at_k(recs, {"q": {"a", "r1", "r2", "r3"}}, 10) == pytest.approx(0.25)

    def test_mean(self):
        recs = [
            rl("q1", ["a"] + [f"x{i}" for i in range(9)]),
            rl("q2", ["a"] + [f"y{i}" for i in range(9)]),
        ]
        truth = {"q1": {"a", "b"}, "q2": {"a", "b", "c", "d"}}
        assert recall_at_k(recs, truth, 10) == pytest.approx(0.375)


class TestMap:
    def test_hand_example(self):
        # truth {a, b}, ranking [a, x, b]: AP@3 = (1/2)(1/1 + 2/3) = 5/6
        assert average_precision_at_k(rl("q", ["a", "x", "b"]), {"a", "b"}, 3) == pytest.approx(5 / 6)

    def test_single_hit_rank_one(self):
        assert average_precision_at_k(rl("q", ["a", "x", "y"]), {"a"}, 3) == 1.0

    def test_no_hits(self):
        assert average_precision_at_k(rl("q", ["x", "y", "z"]), {"a"}, 3) == 0.0

    def test_paper_normalizer_caps_ap(self):
        # |R| = 5 > k = 2: AP can reach at most k/|R|
        ap = average_precision_at_k(rl("q", ["a", "b"]), {"a", "b", "c", "d", "e"}, 2)
        assert ap == pytest.approx(2 / 5)

    def test_min_normalizer_alternative(self):
        ap = average_precision_at_k(rl("q", ["a", "b"]), {"a", "b", "c", "d", "e"}, 2,
                                    normalize_by_min=True)
        assert ap == 1.0

    def test_map_is_mean(self):
        recs = [rl("q1", ["a", "x", "b"]), rl("q2", ["a", "x", "y"])]
        truth = {"q1": {"a", "b"}, "q2": {"a"}}
        assert map_at_k(recs, truth, 3) == pytest.approx((5 / 6 + 1.0) / 2)


class TestEvaluateRun:
    def make_run(self, rng, n_queries=20, n_candidates=50):
        cands = [f"c{i}" for i in range(n_candidates)]
        recs, truth = [], {}
        for qi in range(n_queries):
            order = list(rng.permutation(cands))
            recs.append(rl(f"q{qi}", order))
            size = int(rng.integers(1, 8))
            truth[f"q{qi}"] = set(rng.choice(cands, size=size, replace=False))
        return recs, truth

    def test_sigma_consistency(self, rng):
        recs, truth = self.make_run(rng)
        for k in (5, 10):
            p = precision_at_k(recs, truth, k)
            total_hits = sum(
                len(set(r.ids()[:k]) & truth[r.query_id]) for r in recs
            )
            assert p * k * len(recs) == pytest.approx(total_hits, abs=1e-9)

    def test_recall_and_map_monotone_in_k(self, rng):
        recs, truth = self.make_run(rng)
        report = evaluate_run(recs, truth, ks=(5, 10, 20))
        r = [report.per_k[k]["recall"] for k in (5, 10, 20)]
        m = [report.per_k[k]["map"] for k in (5, 10, 20)]
        assert r == sorted(r)
        assert m == sorted(m)

    def test_order_invariance(self, rng):
        recs, truth = self.make_run(rng)
        a = evaluate_run(recs, truth, ks=(10,))
        b = evaluate_run(list(reversed(recs)), truth, ks=(10,))
        assert a.per_k == b.per_k

    def test_empty_lists_padding_mode(self):
        recs = [RankedList(query_id="q", items=[])]
        report = evaluate_run(recs, {"q": {"a"}}, ks=(10,), pad=True)
        assert report.per_k[10] == {"precision": 0.0, "recall": 0.0, "map": 0.0}

    def test_values_in_unit_interval(self, rng):
        recs, truth = self.make_run(rng)
        report = evaluate_run(recs, truth, ks=(10, 15, 20))
        for k in report.ks:
            for v in report.per_k[k].values():
                assert 0.0 <= v <= 1.0

    def test_per_query_ap_emitted(self, rng):
        recs, truth = self.make_run(rng, n_queries=4)
        report = evaluate_run(recs, truth, ks=(10,))
        assert set(report.per_query_ap) == {r.query_id for r in recs}
