import numpy as np
import pytest
from hypothesis import given, strategies as st

from citefuse.retrieval import (
    CandidateIndex,
    RetrievalError,
    cosine,
    rank,
    read_recommendations,
    write_recommendations,
)
from citefuse.text_embed import EmbeddingTable


class TestCosine:
    def test_self_similarity(self):
        a = np.array([1.0, 2.0, 3.0])
        assert cosine(a, a) == 1.0

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_opposite(self):
        assert cosine(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == -1.0

    def test_zero_norm_scores_zero(self):
        assert cosine(np.zeros(3), np.array([1.0, 0.0, 0.0])) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(RetrievalError):
            cosine(np.zeros(2), np.zeros(3))

    @given(st.floats(min_value=0.1, max_value=100.0))
    def test_scale_invariance(self, s):
        a = np.array([1.0, 2.0])
        b = np.array([3.0, -1.0])
        assert cosine(s * a, b) == pytest.approx(cosine(a, b), abs=1e-12)


def table(vectors):
    ids = sorted(vectors)
    return EmbeddingTable(
        dim=len(next(iter(vectors.values()))),
        ids=ids,
        matrix=np.array([vectors[i] for i in ids], dtype=float),
    )


class TestRank:
    def test_exact_match_first(self):
        t = table({"a": [1, 0], "b": [0, 1], "c": [1, 1]})
        result = rank(np.array([0.0, 1.0]), t, k=2, query_id="q")
        assert result.items[0][0] == "b"
        assert result.items[0][1] == pytest.approx(1.0)

    def test_matches_brute_force(self, rng):
        vecs = {f"c{i}": rng.normal(size=4) for i in range(5)}
        t = table(vecs)
        q = rng.normal(size=4)
        result = rank(q, t, k=3)
        brute = sorted(vecs, key=lambda cid: (-cosine(q, vecs[cid]), cid))[:3]
        assert result.ids() == brute

    def test_query_scaling_invariant(self, rng):
        t = table({f"c{i}": rng.normal(size=3) for i in range(6)})
        q = rng.normal(size=3)
        assert rank(q, t, 4).ids() == rank(10 * q, t, 4).ids()

    def test_prefix_property(self, rng):
        t = table({f"c{i}": rng.normal(size=3) for i in range(8)})
        q = rng.normal(size=3)
        small = rank(q, t, 3)
        big = rank(q, t, 6)
        assert big.ids()[:3] == small.ids()

    def test_k_exceeds_candidates_flagged(self):
        t = table({"a": [1, 0], "b": [0, 1]})
        result = rank(np.array([1.0, 0.0]), t, k=5)
        assert result.truncated
        assert len(result.items) == 2

    def test_ties_broken_by_id(self):
        t = table({"z": [1, 0], "a": [1, 0], "m": [1, 0]})
        result = rank(np.array([1.0, 0.0]), t, k=3)
        assert result.ids() == ["a", "m", "z"]

    def test_scores_non_increasing(self, rng):
        t = table({f"c{i}": rng.normal(size=5) for i in range(10)})
        result = rank(rng.normal(size=5), t, k=10)
        scores = [s for _, s in result.items]
        assert scores == sorted(scores, reverse=True)

    def test_zero_candidate_ranks_last(self):
        t = table({"a": [0, 0], "b": [1, 0]})
        result = rank(np.array([1.0, 0.0]), t, k=2)
        assert result.ids() == ["b", "a"]


class TestRecommendationsFile:
    def test_roundtrip(self, tmp_path, rng):
        t = table({f"c{i}": rng.normal(size=3) for i in range(5)})
        ranked = [rank(rng.normal(size=3), t, 3, query_id=f"q{i}") for i in range(2)]
        path = tmp_path / "recs.tsv"
        write_recommendations(ranked, path)
        again = read_recommendations(path)
        assert [r.query_id for r in again] == ["q0", "q1"]
        for orig, back in zip(ranked, again):
            assert back.ids() == orig.ids()
            for (_, a), (_, b) in zip(orig.items, back.items):
                assert b == pytest.approx(a, abs=1e-6)
