"""Test-time embedding: node-embedding estimation and fused test vectors.

Test papers are absent from the citation graph, so their node view is
estimated as the mean of the node embeddings of their top-N most textually
similar training papers. Ground-truth citations are never read here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fusion import CcaModel, DccaModel, FusionStrategy, fuse, project
from .retrieval import CandidateIndex
from .text_embed import EmbeddingTable, SparseVector


class InferenceError(Exception):
    pass


@dataclass
class NeighborEstimate:
    query_id: str
    neighbor_ids: list[str]
    similarities: list[float]  # descending
    estimated_vector: np.ndarray


def estimate_node_embedding(
    query_text_vec: np.ndarray | SparseVector,
    train_text_index: CandidateIndex,
    train_node_table: EmbeddingTable,
    N: int = 5,
    query_id: str = "",
    similarity_weighted: bool = False,
) -> NeighborEstimate:
    """Average the node vectors of the top-N textually similar train papers.

    Cosine ties are broken by ascending id so the neighbor set is unique.
    The mean is unweighted unless ``similarity_weighted`` is set.
    """
    if N < 1:
        raise InferenceError("N must be >= 1")
    if not train_text_index.ids:
        raise InferenceError("empty train text table")
    for pid in train_text_index.ids:
        if pid not in train_node_table:
            raise InferenceError(f"train paper {pid!r} missing from node table")
    sims = train_text_index.scores(query_text_vec)
    order = sorted(
        range(len(train_text_index.ids)),
        key=lambda i: (-sims[i], train_text_index.ids[i]),
    )[: min(N, len(train_text_index.ids))]
    neighbor_ids = [train_text_index.ids[i] for i in order]
    vecs = np.stack([train_node_table.vector(pid) for pid in neighbor_ids])
    if similarity_weighted:
        w = np.maximum(sims[order], 0.0)
        w = w / w.sum() if w.sum() > 0 else np.full(len(order), 1.0 / len(order))
        estimated = w @ vecs
    else:
        estimated = vecs.mean(axis=0)
    return NeighborEstimate(
        query_id=query_id,
        neighbor_ids=neighbor_ids,
        similarities=[float(sims[i]) for i in order],
        estimated_vector=estimated,
    )


def embed_test_set(
    test_text: EmbeddingTable,
    train_text_index: CandidateIndex,
    train_node_table: EmbeddingTable,
    fusion_model: CcaModel | DccaModel | None,
    strategy: FusionStrategy,
    N: int = 5,
) -> EmbeddingTable:
    """Text vector -> node estimate -> project both -> fuse, per test paper."""
    if strategy.kind != "simple_concat" and fusion_model is None:
        raise InferenceError(f"strategy {strategy.kind!r} requires a fitted fusion model")
    node_dim = train_node_table.dim
    est = np.empty((len(test_text.ids), node_dim))
    for row, pid in enumerate(test_text.ids):
        est[row] = estimate_node_embedding(
            test_text.vector(pid), train_text_index, train_node_table, N=N, query_id=pid
        ).estimated_vector
    X = test_text.matrix
    if strategy.kind == "simple_concat":
        fused = fuse(X, est, strategy)
    else:
        Xp = project(fusion_model, X, "x")
        Yp = project(fusion_model, est, "y")
        fused = fuse(Xp, Yp, strategy)
    return EmbeddingTable(dim=fused.shape[1], ids=list(test_text.ids), matrix=fused)


def embed_train_set(
    train_text: EmbeddingTable,
    train_node_table: EmbeddingTable,
    fusion_model: CcaModel | DccaModel | None,
    strategy: FusionStrategy,
) -> EmbeddingTable:
    """Fused candidate vectors for train papers (true node vectors, no estimation)."""
    nodes = np.stack([train_node_table.vector(pid) for pid in train_text.ids])
    if strategy.kind == "simple_concat":
        fused = fuse(train_text.matrix, nodes, strategy)
    else:
        if fusion_model is None:
            raise InferenceError(f"strategy {strategy.kind!r} requires a fitted fusion model")
        Xp = project(fusion_model, train_text.matrix, "x")
        Yp = project(fusion_model, nodes, "y")
        fused = fuse(Xp, Yp, strategy)
    return EmbeddingTable(dim=fused.shape[1], ids=list(train_text.ids), matrix=fused)
