import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from citefuse.text_embed import (
    EmbeddingTable,
    TextEmbedError,
    fit_tfidf,
    load_dense_embeddings,
    load_tfidf_model,
    preprocess,
    save_dense_embeddings,
    save_tfidf_model,
    tfidf_embed,
)


class TestPreprocess:
    def test_punctuation_and_case(self):
        assert preprocess("Deep CCA-based Fusion!") == ["deep", "cca", "based", "fusion"]

    def test_all_stopwords(self):
        assert preprocess("The of and") == []

    def test_digits_split_tokens(self):
        assert preprocess("Graph2Vec 2017") == ["graph", "vec"]

    def test_empty(self):
        assert preprocess("") == []


class TestFitTfidf:
    def test_term_in_all_docs_has_zero_idf(self):
        docs = {f"d{i}": f"shared unique{i}" for i in range(10)}
        model = fit_tfidf(docs, min_df=1)
        idx = model.vocab.term_index["shared"]
        assert model.idf[idx] == 0.0
        vec = tfidf_embed("shared shared", model)
        assert idx not in vec.indices  # zero weights dropped

    def test_rare_term_idf(self):
        docs = {f"d{i}": ("rare common" if i == 0 else "common") for i in range(10)}
        model = fit_tfidf(docs, min_df=1)
        idx = model.vocab.term_index["rare"]
        assert model.idf[idx] == pytest.approx(math.log(10), abs=1e-9)

    def test_min_df_filters(self):
        docs = {f"d{i}": ("rare common" if i == 0 else "common") for i in range(10)}
        model = fit_tfidf(docs, min_df=5)
        assert "rare" not in model.vocab.term_index
        assert "common" in model.vocab.term_index

    def test_empty_vocabulary_is_error(self):
        with pytest.raises(TextEmbedError):
            fit_tfidf({"d": "the of and"}, min_df=1)

    def test_no_documents_is_error(self):
        with pytest.raises(TextEmbedError):
            fit_tfidf({})

    def test_vocabulary_lexicographic(self):
        model = fit_tfidf({"d": "zebra apple mango"}, min_df=1)
        assert model.vocab.terms == sorted(model.vocab.terms)

    def test_determinism(self):
        docs = {f"d{i}": f"alpha beta gamma{i % 3}" for i in range(9)}
        m1 = fit_tfidf(docs, min_df=1)
        m2 = fit_tfidf(docs, min_df=1)
        assert m1.vocab.terms == m2.vocab.terms
        assert np.array_equal(m1.idf, m2.idf)


class TestTfidfEmbed:
    @pytest.fixture
    def model(self):
        docs = {f"d{i}": ("rare common" if i == 0 else "common") for i in range(10)}
        return fit_tfidf(docs, min_df=1)

    def test_single_occurrence_weight(self, model):
        vec = tfidf_embed("rare", model)
        assert vec.values[0] == pytest.approx(math.log(10), abs=1e-9)

    def test_sublinear_tf(self, model):
        vec = tfidf_embed("rare rare rare rare", model)
        assert vec.values[0] == pytest.approx((1 + math.log(4)) * math.log(10), rel=1e-9)

    def test_oov_only_gives_zero_vector(self, model):
        vec = tfidf_embed("unknown words entirely", model)
        assert len(vec.indices) == 0

    @given(st.integers(min_value=1, max_value=50))
    def test_monotone_in_count(self, c):
        docs = {f"d{i}": ("rare common" if i == 0 else "common") for i in range(10)}
        model = fit_tfidf(docs, min_df=1)
        lo = tfidf_embed(" ".join(["rare"] * c), model).values[0]
        hi = tfidf_embed(" ".join(["rare"] * (c + 1)), model).values[0]
        assert hi > lo

    def test_model_roundtrip(self, model, tmp_path):
        save_tfidf_model(model, tmp_path / "m.txt")
        again = load_tfidf_model(tmp_path / "m.txt")
        assert again.vocab.terms == model.vocab.terms
        assert np.array_equal(again.idf, model.idf)
        v1 = tfidf_embed("rare common", model)
        v2 = tfidf_embed("rare common", again)
        assert np.array_equal(v1.values, v2.values)


class TestDenseEmbeddings:
    def test_load_basic(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("2 3\na\t1 0 0\nb\t0 1 0\n")
        table = load_dense_embeddings(path)
        assert table.dim == 3
        assert len(table) == 2
        assert np.array_equal(table.vector("a"), [1, 0, 0])

    def test_arity_mismatch(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("1 3\na\t1 0\n")
        with pytest.raises(TextEmbedError, match="row 1"):
            load_dense_embeddings(path)

    def test_non_finite(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("1 2\na\tnan 0\n")
        with pytest.raises(TextEmbedError, match="non-finite"):
            load_dense_embeddings(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("2 1\na\t1\na\t2\n")
        with pytest.raises(TextEmbedError, match="duplicate"):
            load_dense_embeddings(path)

    def test_missing_rows(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("3 1\na\t1\n")
        with pytest.raises(TextEmbedError):
            load_dense_embeddings(path)

    def test_roundtrip_bit_exact(self, tmp_path, rng):
        table = EmbeddingTable(
            dim=4, ids=["x", "y"], matrix=rng.normal(size=(2, 4))
        )
        save_dense_embeddings(table, tmp_path / "t.txt")
        again = load_dense_embeddings(tmp_path / "t.txt")
        assert np.array_equal(again.matrix, table.matrix)
        assert again.ids == table.ids
