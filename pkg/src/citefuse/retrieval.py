"""Exact cosine top-k ranking over a candidate embedding table."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .text_embed import EmbeddingTable, SparseVector


class RetrievalError(Exception):
    pass


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity clamped to [-1, 1]; zero-norm inputs score 0."""
    if a.shape != b.shape:
        raise RetrievalError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass
class RankedList:
    query_id: str
    items: list[tuple[str, float]]
    truncated: bool = False  # k exceeded the candidate count

    def ids(self) -> list[str]:
        return [i for i, _ in self.items]


@dataclass
class CandidateIndex:
    """Candidate ids plus their vectors with norms precomputed once.

    Accepts a dense (n x d) matrix or a CSR matrix (TF-IDF candidates).
    """

    ids: list[str]
    matrix: np.ndarray | sparse.csr_matrix
    _norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.ids):
            raise RetrievalError("one row per candidate id required")
        if sparse.issparse(self.matrix):
            self._norms = np.sqrt(np.asarray(self.matrix.multiply(self.matrix).sum(axis=1)).ravel())
        else:
            self._norms = np.linalg.norm(self.matrix, axis=1)

    @classmethod
    def from_table(cls, table: EmbeddingTable) -> "CandidateIndex":
        return cls(ids=list(table.ids), matrix=table.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def scores(self, query_vec: np.ndarray | SparseVector) -> np.ndarray:
        """Cosine of the query against every candidate (zero norms score 0)."""
        if isinstance(query_vec, SparseVector):
            q = np.zeros(query_vec.dim)
            q[query_vec.indices] = query_vec.values
        else:
            q = np.asarray(query_vec)
        if q.shape[0] != self.dim:
            raise RetrievalError(f"query dim {q.shape[0]} != candidate dim {self.dim}")
        qn = np.linalg.norm(q)
        if qn == 0.0:
            return np.zeros(len(self.ids))
        dots = np.asarray(self.matrix @ q).ravel()
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = dots / (self._norms * qn)
        sims[self._norms == 0.0] = 0.0
        return np.clip(sims, -1.0, 1.0)


def rank(
    query_vec: np.ndarray | SparseVector,
    candidates: CandidateIndex | EmbeddingTable,
    k: int,
    query_id: str = "",
) -> RankedList:
    """Exact top-k by cosine, ties broken by ascending candidate id."""
    if k < 1:
        raise RetrievalError("k must be >= 1")
    index = (
        candidates
        if isinstance(candidates, CandidateIndex)
        else CandidateIndex.from_table(candidates)
    )
    sims = index.scores(query_vec)
    order = sorted(range(len(index.ids)), key=lambda i: (-sims[i], index.ids[i]))
    top = order[: min(k, len(order))]
    return RankedList(
        query_id=query_id,
        items=[(index.ids[i], float(sims[i])) for i in top],
        truncated=k > len(order),
    )


def write_recommendations(ranked: list[RankedList], path) -> None:
    """One line per query: id then tab then candidate:score pairs (6 decimals)."""
    with open(path, "w", encoding="utf-8") as f:
        for rl in ranked:
            pairs = " ".join(f"{cid}:{score:.6f}" for cid, score in rl.items)
            f.write(f"{rl.query_id}\t{pairs}\n")


def read_recommendations(path) -> list[RankedList]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            qid, _, rest = line.partition("\t")
            items = []
            for token in rest.split():
                cid, _, score = token.rpartition(":")
                items.append((cid, float(score)))
            out.append(RankedList(query_id=qid, items=items))
    return out
