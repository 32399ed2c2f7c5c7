"""Precision@k, Recall@k and MAP@k over a set of ranked recommendation lists.

AP@k is normalized by the full ground-truth size |R_i| even when |R_i| > k,
so AP cannot always reach 1. The common 1/min(k, |R_i|) normalizer is
available behind ``normalize_by_min``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Mapping, Sequence

from .retrieval import RankedList


class EvaluationError(Exception):
    pass


@dataclass
class MetricsReport:
    per_k: dict[int, dict[str, float]]  # k -> {"precision", "recall", "map"}
    n_queries: int
    ks: tuple[int, ...]
    per_query_ap: dict[str, float] | None = None  # AP at max(ks)

    def lines(self) -> list[str]:
        out = []
        for k in self.ks:
            for metric in ("precision", "recall", "map"):
                out.append(f"{metric}@{k}\t{self.per_k[k][metric]:.6f}")
        out.append(f"n_queries\t{self.n_queries}")
        return out


def _check(recs: Sequence[RankedList], truth: Mapping[str, set[str]], k: int, pad: bool) -> None:
    for rl in recs:
        if rl.query_id not in truth:
            raise EvaluationError(f"query {rl.query_id!r} has no ground truth")
        if not truth[rl.query_id]:
            raise EvaluationError(f"query {rl.query_id!r} has empty ground truth")
        if len(rl.items) < k and not pad and not rl.truncated:
            raise EvaluationError(
                f"query {rl.query_id!r}: list of length {len(rl.items)} < k={k} "
                "(enable padding to score missing ranks as non-relevant)"
            )


def hits_at_k(rl: RankedList, relevant: set[str], k: int) -> int:
    return sum(1 for cid in rl.ids()[:k] if cid in relevant)


def precision_at_k(
    recs: Sequence[RankedList], truth: Mapping[str, set[str]], k: int, pad: bool = False
) -> float:
    """Mean over queries of (relevant hits in top-k) / k."""
    _check(recs, truth, k, pad)
    ordered = sorted(recs, key=lambda rl: rl.query_id)
    return sum(hits_at_k(rl, truth[rl.query_id], k) / k for rl in ordered) / len(ordered)


def recall_at_k(
    recs: Sequence[RankedList], truth: Mapping[str, set[str]], k: int, pad: bool = False
) -> float:
    """Mean over queries of hits / |R_i|."""
    _check(recs, truth, k, pad)
    ordered = sorted(recs, key=lambda rl: rl.query_id)
    return sum(
        hits_at_k(rl, truth[rl.query_id], k) / len(truth[rl.query_id]) for rl in ordered
    ) / len(ordered)


def average_precision_at_k(
    rl: RankedList, relevant: set[str], k: int, normalize_by_min: bool = False
) -> float:
    hits = 0
    ap = 0.0
    for j, cid in enumerate(rl.ids()[:k], start=1):
        if cid in relevant:
            hits += 1
            ap += hits / j
    norm = min(k, len(relevant)) if normalize_by_min else len(relevant)
    return ap / norm


def map_at_k(
    recs: Sequence[RankedList],
    truth: Mapping[str, set[str]],
    k: int,
    pad: bool = False,
    normalize_by_min: bool = False,
) -> float:
    """Mean of per-query average precision truncated at rank k."""
    _check(recs, truth, k, pad)
    ordered = sorted(recs, key=lambda rl: rl.query_id)
    return sum(
        average_precision_at_k(rl, truth[rl.query_id], k, normalize_by_min)
        for rl in ordered
    ) / len(ordered)


def evaluate_run(
    recs: Sequence[RankedList],
    truth: Mapping[str, set[str]],
    ks: Sequence[int] = (10, 15, 20),
    pad: bool = False,
    normalize_by_min: bool = False,
) -> MetricsReport:
    if not recs:
        raise EvaluationError("no recommendation lists to evaluate")
    ks = tuple(sorted(ks))
    per_k = {}
    for k in ks:
        per_k[k] = {
            "precision": precision_at_k(recs, truth, k, pad),
            "recall": recall_at_k(recs, truth, k, pad),
            "map": map_at_k(recs, truth, k, pad, normalize_by_min),
        }
    kmax = ks[-1]
    per_query_ap = {
        rl.query_id: average_precision_at_k(rl, truth[rl.query_id], kmax, normalize_by_min)
        for rl in recs
    }
    return MetricsReport(per_k=per_k, n_queries=len(recs), ks=ks, per_query_ap=per_query_ap)


def write_metrics(report: MetricsReport, f: IO[str], with_ap: bool = False) -> None:
    for line in report.lines():
        f.write(line + "\n")
    if with_ap and report.per_query_ap:
        for qid in sorted(report.per_query_ap):
            f.write(f"ap\t{qid}\t{report.per_query_ap[qid]:.6f}\n")
