"""Citation-graph construction, biased random walks and Skip-Gram training.

Walks follow out-edges by default (citations point at cited work); an
undirected mode treats every edge as bidirectional. Each (start node, walk
index) pair draws from its own RNG stream, so walk generation is
reproducible regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus
from .text_embed import EmbeddingTable


class GraphError(Exception):
    pass


@dataclass
class CitationGraph:
    nodes: list[str]
    out_adj: dict[str, list[str]]
    in_adj: dict[str, list[str]]

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.out_adj.values())

    def neighbors(self, node: str, undirected: bool) -> list[str]:
        if not undirected:
            return self.out_adj[node]
        merged = set(self.out_adj[node]) | set(self.in_adj[node])
        return sorted(merged)


@dataclass
class WalkConfig:
    walks_per_node: int = 200
    walk_length: int = 80
    p: float = 4.0
    q: float = 2.0
    seed: int = 0
    direction: str = "directed"  # or "undirected"

    def __post_init__(self):
        if self.walks_per_node < 1 or self.walk_length < 1:
            raise GraphError("walks_per_node and walk_length must be >= 1")
        if self.p <= 0 or self.q <= 0:
            raise GraphError("p and q must be positive")
        if self.direction not in ("directed", "undirected"):
            raise GraphError(f"unknown walk direction {self.direction!r}")

    @property
    def undirected(self) -> bool:
        return self.direction == "undirected"


@dataclass
class SkipGramConfig:
    dim: int = 128
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    seed: int = 0
    batch: int = 512

    def __post_init__(self):
        if self.dim < 1:
            raise GraphError("embedding dim must be >= 1")
        if self.window < 1 or self.negatives < 1:
            raise GraphError("window and negatives must be >= 1")


def build_citation_graph(train: Corpus) -> CitationGraph:
    """One node per train paper (isolated nodes included), one edge per reference."""
    nodes = train.ids()
    node_set = set(nodes)
    out_adj: dict[str, list[str]] = {n: [] for n in nodes}
    in_adj: dict[str, list[str]] = {n: [] for n in nodes}
    for pid in nodes:
        for ref in sorted(train.papers[pid].references):
            if ref in node_set and ref != pid:
                out_adj[pid].append(ref)
                in_adj[ref].append(pid)
    for adj in (out_adj, in_adj):
        for n in adj:
            adj[n].sort()
    return CitationGraph(nodes=nodes, out_adj=out_adj, in_adj=in_adj)


def transition_weights(
    graph: CitationGraph, prev: str | None, curr: str, cfg: WalkConfig
) -> list[tuple[str, float]]:
    """Second-order bias weights over curr's neighbors.

    With no previous node all weights are 1. Otherwise the weight is 1/p for
    returning to prev, 1 for nodes adjacent to prev, and 1/q for nodes two
    hops from prev. p = q = 1 reduces to a uniform (first-order) walk.
    """
    neighbors = graph.neighbors(curr, cfg.undirected)
    if not neighbors:
        return []
    if prev is None or (cfg.p == 1.0 and cfg.q == 1.0):
        return [(n, 1.0) for n in neighbors]
    prev_adj = set(graph.neighbors(prev, cfg.undirected))
    weights = []
    for n in neighbors:
        if n == prev:
            w = 1.0 / cfg.p
        elif n in prev_adj:
            w = 1.0
        else:
            w = 1.0 / cfg.q
        weights.append((n, w))
    return weights


def _single_walk(
    graph: CitationGraph, start: str, cfg: WalkConfig, rng: np.random.Generator
) -> list[str]:
    walk = [start]
    prev: str | None = None
    while len(walk) < cfg.walk_length:
        curr = walk[-1]
        weighted = transition_weights(graph, prev, curr, cfg)
        if not weighted:
            break
        if len(weighted) == 1:
            nxt = weighted[0][0]
        else:
            w = np.array([x[1] for x in weighted])
            w /= w.sum()
            nxt = weighted[int(rng.choice(len(weighted), p=w))][0]
        walk.append(nxt)
        prev = curr
    return walk


def generate_walks(graph: CitationGraph, cfg: WalkConfig) -> list[list[str]]:
    """walks_per_node walks from every node, truncated early at sinks."""
    if len(graph) == 0:
        raise GraphError("cannot walk an empty graph")
    walks: list[list[str]] = []
    for node_idx, node in enumerate(graph.nodes):
        for walk_idx in range(cfg.walks_per_node):
            rng = np.random.default_rng([cfg.seed, node_idx, walk_idx])
            walks.append(_single_walk(graph, node, cfg, rng))
    return walks


def save_walks(walks: Sequence[Sequence[str]], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for walk in walks:
            f.write(" ".join(walk) + "\n")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30, 30)))


def _training_pairs(
    walks: Sequence[Sequence[str]], index: dict[str, int], window: int
) -> tuple[np.ndarray, np.ndarray]:
    centers: list[int] = []
    contexts: list[int] = []
    for walk in walks:
        idx = [index[n] for n in walk]
        for i, c in enumerate(idx):
            lo = max(0, i - window)
            hi = min(len(idx), i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(c)
                    contexts.append(idx[j])
    return np.array(centers, dtype=np.int64), np.array(contexts, dtype=np.int64)


def train_skipgram(
    walks: Sequence[Sequence[str]],
    cfg: SkipGramConfig,
    epoch_callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> EmbeddingTable:
    """Skip-Gram with negative sampling over node walks.

    Maximizes log sig(u_ctx . v_ctr) + sum_neg log sig(-u_neg . v_ctr) per
    (center, context) pair; negatives drawn proportional to frequency^0.75;
    learning rate decays linearly to initial_lr / 10000. Returns the center
    ("input") vectors. Deterministic for a fixed config seed.
    """
    if not walks:
        raise GraphError("no walks to train on")
    counts: dict[str, int] = {}
    for walk in walks:
        for n in walk:
            counts[n] = counts.get(n, 0) + 1
    vocab = sorted(counts)
    if not vocab:
        raise GraphError("empty walk vocabulary")
    index = {n: i for i, n in enumerate(vocab)}
    nv = len(vocab)

    noise = np.array([counts[n] for n in vocab], dtype=float) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    rng = np.random.default_rng(cfg.seed)
    V = (rng.random((nv, cfg.dim)) - 0.5) / cfg.dim  # center vectors
    U = np.zeros((nv, cfg.dim))  # context vectors

    centers, contexts = _training_pairs(walks, index, cfg.window)
    n_pairs = len(centers)
    total = n_pairs * cfg.epochs
    lr_floor = cfg.initial_lr / 10_000.0
    done = 0
    # batched scatter updates sum within-batch gradients; keep batches small
    # relative to the vocabulary so per-index collisions stay bounded
    batch = min(cfg.batch, max(8, 2 * nv))

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_pairs)
        for start in range(0, n_pairs, batch):
            sel = order[start : start + batch]
            c, o = centers[sel], contexts[sel]
            b = len(sel)
            neg = np.searchsorted(noise_cdf, rng.random((b, cfg.negatives)))

            lr = max(lr_floor, cfg.initial_lr * (1.0 - done / total))
            vc = V[c]
            uo = U[o]
            un = U[neg]

            gpos = 1.0 - _sigmoid(np.einsum("bd,bd->b", vc, uo))
            gneg = -_sigmoid(np.einsum("bkd,bd->bk", un, vc))

            grad_vc = gpos[:, None] * uo + np.einsum("bk,bkd->bd", gneg, un)
            np.add.at(V, c, lr * grad_vc)
            np.add.at(U, o, lr * gpos[:, None] * vc)
            np.add.at(
                U,
                neg.ravel(),
                (lr * gneg[..., None] * vc[:, None, :]).reshape(-1, cfg.dim),
            )
            done += b
        if epoch_callback is not None:
            epoch_callback(epoch, V, U)

    if not np.all(np.isfinite(V)):
        raise GraphError("non-finite embedding after training")
    return EmbeddingTable(dim=cfg.dim, ids=vocab, matrix=V)


def full_softmax_loss(
    walks: Sequence[Sequence[str]],
    vocab: Sequence[str],
    center_vecs: np.ndarray,
    context_vecs: np.ndarray,
    window: int,
) -> float:
    """Mean cross-entropy of the exact softmax Skip-Gram objective.

    Only intended for tiny graphs; used as an independent check that
    negative-sampling training improves the true objective.
    """
    index = {n: i for i, n in enumerate(vocab)}
    centers, contexts = _training_pairs(walks, index, window)
    logits = center_vecs[centers] @ context_vecs.T  # (pairs, vocab)
    logits -= logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(logits).sum(axis=1))
    return float(np.mean(log_z - logits[np.arange(len(centers)), contexts]))
