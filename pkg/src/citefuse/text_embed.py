"""Text views: native TF-IDF and a loader for external dense embeddings.

TF-IDF weighting is sublinear: weight(t, d) = (1 + ln tf) * ln(N / df(t)),
natural log, no length normalization (cosine ranking normalizes later).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np
from scipy import sparse

from .stopwords import STOPWORDS

_NON_ALPHA = re.compile(r"[^a-zA-Z]+")


class TextEmbedError(Exception):
    pass


def preprocess(text: str) -> list[str]:
    """Lowercase, strip non-alphabetic characters, drop stopwords."""
    tokens = _NON_ALPHA.sub(" ", text).lower().split()
    return [t for t in tokens if t not in STOPWORDS]


@dataclass
class Vocabulary:
    terms: list[str]  # lexicographic, defines column order
    term_index: dict[str, int]
    doc_freq: dict[str, int]
    n_docs: int

    def __len__(self) -> int:
        return len(self.terms)


@dataclass
class SparseVector:
    dim: int
    indices: np.ndarray  # strictly increasing int indices < dim
    values: np.ndarray

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


@dataclass
class TfidfModel:
    vocab: Vocabulary
    idf: np.ndarray  # per-column ln(N / df)


@dataclass
class EmbeddingTable:
    dim: int
    ids: list[str]
    matrix: np.ndarray  # len(ids) x dim
    _index: dict[str, int] | None = None

    def __post_init__(self):
        if self._index is None:
            self._index = {pid: i for i, pid in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, pid: str) -> bool:
        return pid in self._index

    def vector(self, pid: str) -> np.ndarray:
        return self.matrix[self._index[pid]]

    def subset(self, ids: Iterable[str]) -> "EmbeddingTable":
        ids = list(ids)
        rows = np.array([self._index[i] for i in ids], dtype=int)
        return EmbeddingTable(dim=self.dim, ids=ids, matrix=self.matrix[rows])


def fit_tfidf(train_docs: Mapping[str, str], min_df: int = 5) -> TfidfModel:
    """Fit vocabulary and IDF on training documents.

    Terms with document frequency below ``min_df`` are dropped; the
    surviving vocabulary is ordered lexicographically for reproducibility.
    """
    if not train_docs:
        raise TextEmbedError("cannot fit TF-IDF on an empty document collection")
    df: dict[str, int] = {}
    for text in train_docs.values():
        for term in set(preprocess(text)):
            df[term] = df.get(term, 0) + 1
    n_docs = len(train_docs)
    kept = sorted(t for t, c in df.items() if c >= min_df)
    if not kept:
        raise TextEmbedError(f"no terms reach min_df={min_df}; vocabulary is empty")
    vocab = Vocabulary(
        terms=kept,
        term_index={t: i for i, t in enumerate(kept)},
        doc_freq={t: df[t] for t in kept},
        n_docs=n_docs,
    )
    idf = np.array([math.log(n_docs / df[t]) for t in kept])
    return TfidfModel(vocab=vocab, idf=idf)


def tfidf_embed(doc: str, model: TfidfModel) -> SparseVector:
    """Sublinear-TF x IDF vector; out-of-vocabulary terms are ignored."""
    counts: dict[int, int] = {}
    for term in preprocess(doc):
        idx = model.vocab.term_index.get(term)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return SparseVector(dim=len(model.vocab), indices=np.empty(0, dtype=int), values=np.empty(0))
    indices = np.array(sorted(counts), dtype=int)
    tf = np.array([1.0 + math.log(counts[i]) for i in indices])
    values = tf * model.idf[indices]
    nz = values != 0.0
    return SparseVector(dim=len(model.vocab), indices=indices[nz], values=values[nz])


def tfidf_embed_all(docs: Mapping[str, str], model: TfidfModel) -> tuple[list[str], sparse.csr_matrix]:
    """Embed a document collection into a CSR matrix (rows in sorted id order)."""
    ids = sorted(docs)
    indptr = [0]
    col: list[np.ndarray] = []
    dat: list[np.ndarray] = []
    for pid in ids:
        vec = tfidf_embed(docs[pid], model)
        col.append(vec.indices)
        dat.append(vec.values)
        indptr.append(indptr[-1] + len(vec.indices))
    mat = sparse.csr_matrix(
        (
            np.concatenate(dat) if dat else np.empty(0),
            np.concatenate(col) if col else np.empty(0, dtype=int),
            np.array(indptr),
        ),
        shape=(len(ids), len(model.vocab)),
    )
    return ids, mat


def save_tfidf_model(model: TfidfModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{model.vocab.n_docs}\n")
        for term in model.vocab.terms:
            f.write(f"{term}\t{model.vocab.doc_freq[term]}\n")


def load_tfidf_model(path: str | Path) -> TfidfModel:
    with open(path, encoding="utf-8") as f:
        n_docs = int(f.readline().strip())
        terms: list[str] = []
        doc_freq: dict[str, int] = {}
        for line in f:
            term, df = line.rstrip("\n").split("\t")
            terms.append(term)
            doc_freq[term] = int(df)
    vocab = Vocabulary(
        terms=terms,
        term_index={t: i for i, t in enumerate(terms)},
        doc_freq=doc_freq,
        n_docs=n_docs,
    )
    idf = np.array([math.log(n_docs / doc_freq[t]) for t in terms])
    return TfidfModel(vocab=vocab, idf=idf)


def load_dense_embeddings(path: str | Path) -> EmbeddingTable:
    """Load the embedding interchange format.

    Line 1 is ``<count> <dim>``; each following line is
    ``<id>\\t<v1> <v2> ... <vdim>``. The load fails atomically on any
    malformed row, arity mismatch, non-finite value or duplicate id.
    """
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise TextEmbedError(f"{path}: bad header, expected '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])
        ids: list[str] = []
        seen: set[str] = set()
        rows = np.empty((count, dim))
        for row_no in range(count):
            line = f.readline()
            if not line:
                raise TextEmbedError(f"{path}: expected {count} rows, got {row_no}")
            try:
                pid, values = line.rstrip("\n").split("\t")
            except ValueError:
                raise TextEmbedError(f"{path}: row {row_no + 1}: missing tab separator")
            if pid in seen:
                raise TextEmbedError(f"{path}: row {row_no + 1}: duplicate id {pid!r}")
            parts = values.split()
            if len(parts) != dim:
                raise TextEmbedError(
                    f"{path}: row {row_no + 1}: expected {dim} values, got {len(parts)}"
                )
            vec = np.array([float(v) for v in parts])
            if not np.all(np.isfinite(vec)):
                raise TextEmbedError(f"{path}: row {row_no + 1}: non-finite value")
            seen.add(pid)
            ids.append(pid)
            rows[row_no] = vec
        if f.readline().strip():
            raise TextEmbedError(f"{path}: trailing data after {count} rows")
    return EmbeddingTable(dim=dim, ids=ids, matrix=rows)


def save_dense_embeddings(table: EmbeddingTable, path_or_file: str | Path | IO[str]) -> None:
    """Write the embedding interchange format (repr floats, round-trip exact)."""

    def _write(f: IO[str]) -> None:
        f.write(f"{len(table.ids)} {table.dim}\n")
        for pid, row in zip(table.ids, table.matrix):
            f.write(pid + "\t" + " ".join(repr(float(v)) for v in row) + "\n")

    if hasattr(path_or_file, "write"):
        _write(path_or_file)  # type: ignore[arg-type]
    else:
        with open(path_or_file, "w", encoding="utf-8") as f:
            _write(f)
