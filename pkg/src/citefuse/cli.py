"""Pipeline orchestration: composable subcommands over persisted artifacts.

Every stage writes a manifest carrying the run-config hash; downstream
stages refuse to mix artifacts produced under a different configuration.
"""

from __future__ import annotations

import argparse
import resource
import sys
import time
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from . import graph_embed, inference, retrieval, text_embed
from . import fusion as fusion_mod
from .config import ConfigError, RunConfig


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


ALPHA_GRID = (0.1, 0.25, 0.5, 0.75, 0.9)
PQ_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)


# --- manifests ---------------------------------------------------------------

def _write_manifest(work: Path, stage: str, cfg: RunConfig, started: float, extra: dict | None = None) -> None:
    peak_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
    with open(work / f"{stage}.manifest", "w", encoding="utf-8") as f:
        f.write(f"stage\t{stage}\n")
        f.write(f"config_hash\t{cfg.hash()}\n")
        f.write(f"elapsed_sec\t{time.time() - started:.3f}\n")
        f.write(f"peak_mem_mb\t{peak_mb:.1f}\n")
        for key, val in (extra or {}).items():
            f.write(f"{key}\t{val}\n")


def _read_manifest(work: Path, stage: str) -> dict[str, str]:
    path = work / f"{stage}.manifest"
    if not path.exists():
        raise StageError(stage, f"missing artifact manifest {path}; run `{stage.replace('_', '-')}` first")
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        key, _, val = line.partition("\t")
        out[key] = val
    return out


def _require(work: Path, upstream: str, cfg: RunConfig, stage: str) -> dict[str, str]:
    manifest = _read_manifest(work, upstream)
    if manifest.get("config_hash") != cfg.hash():
        raise StageError(
            stage,
            f"config hash mismatch with upstream stage {upstream!r} "
            f"({manifest.get('config_hash')} != {cfg.hash()}); rerun upstream stages",
        )
    return manifest


# --- artifact helpers --------------------------------------------------------

def _load_split(work: Path) -> corpus_mod.SplitCorpus:
    with open(work / "train.jsonl", encoding="utf-8") as f:
        train = corpus_mod.parse_corpus(f)
    with open(work / "test.jsonl", encoding="utf-8") as f:
        test = corpus_mod.parse_corpus(f)
    truth: dict[str, set[str]] = {}
    for line in (work / "ground_truth.tsv").read_text(encoding="utf-8").splitlines():
        qid, _, refs = line.partition("\t")
        truth[qid] = set(refs.split())
    return corpus_mod.SplitCorpus(train=train, test=test, ground_truth=truth)


def _docs(c: corpus_mod.Corpus) -> dict[str, str]:
    return {pid: c.papers[pid].text for pid in c.ids()}


def _text_views(cfg: RunConfig, work: Path, split: corpus_mod.SplitCorpus):
    """Return (train_text_index, test_text_table_or_sparse, dense flag).

    For TF-IDF text, the sparse vectors are rebuilt from the persisted model;
    for external text, the validated dense tables are loaded.
    """
    if cfg.text.model == "external":
        train_table = text_embed.load_dense_embeddings(work / "text_train.txt")
        test_table = text_embed.load_dense_embeddings(work / "text_test.txt")
        return retrieval.CandidateIndex.from_table(train_table), test_table, True
    model = text_embed.load_tfidf_model(work / "tfidf_model.txt")
    train_ids, train_mat = text_embed.tfidf_embed_all(_docs(split.train), model)
    test_ids, test_mat = text_embed.tfidf_embed_all(_docs(split.test), model)
    train_index = retrieval.CandidateIndex(ids=train_ids, matrix=train_mat)
    return train_index, (test_ids, test_mat), False


def _estimate_test_nodes(
    cfg: RunConfig,
    train_text_index: retrieval.CandidateIndex,
    test_text,
    dense: bool,
    node_table: text_embed.EmbeddingTable,
) -> text_embed.EmbeddingTable:
    if dense:
        ids = list(test_text.ids)
        rows = [test_text.vector(pid) for pid in ids]
    else:
        ids, mat = test_text
        rows = [
            text_embed.SparseVector(
                dim=mat.shape[1],
                indices=mat.indices[mat.indptr[i] : mat.indptr[i + 1]],
                values=mat.data[mat.indptr[i] : mat.indptr[i + 1]],
            )
            for i in range(len(ids))
        ]
    est = np.empty((len(ids), node_table.dim))
    for i, (pid, vec) in enumerate(zip(ids, rows)):
        est[i] = inference.estimate_node_embedding(
            vec, train_text_index, node_table, N=cfg.inference.n_neighbors, query_id=pid
        ).estimated_vector
    return text_embed.EmbeddingTable(dim=node_table.dim, ids=ids, matrix=est)


# --- stages ------------------------------------------------------------------

def cmd_prepare(cfg: RunConfig) -> None:
    started = time.time()
    work = Path(cfg.work_dir)
    work.mkdir(parents=True, exist_ok=True)
    if not cfg.corpus_path:
        raise StageError("prepare", "no corpus path configured")
    report = corpus_mod.ParseReport()
    with open(cfg.corpus_path, encoding="utf-8") as f:
        raw = corpus_mod.parse_corpus(f, report)
    corpus_mod.write_parse_report(report, sys.stderr)
    pruned = corpus_mod.prune(raw, cfg.prune.min_in, cfg.prune.min_out, cfg.prune.iterate)
    split = corpus_mod.temporal_split(
        pruned, cfg.split.train_end, cfg.split.test_start, cfg.split.test_end
    )
    stats = corpus_mod.corpus_stats(split)

    with open(work / "train.jsonl", "w", encoding="utf-8") as f:
        corpus_mod.serialize_corpus(split.train, f)
    with open(work / "test.jsonl", "w", encoding="utf-8") as f:
        corpus_mod.serialize_corpus(split.test, f)
    with open(work / "ground_truth.tsv", "w", encoding="utf-8") as f:
        for qid in sorted(split.ground_truth):
            f.write(f"{qid}\t{' '.join(sorted(split.ground_truth[qid]))}\n")
    with open(work / "stats.txt", "w", encoding="utf-8") as f:
        for line in stats.lines():
            f.write(line + "\n")
    cfg.write(work / "run.cfg")
    _write_manifest(
        work, "prepare", cfg, started,
        {
            "parsed": report.accepted, "rejected": report.rejected,
            "pruned_papers": len(pruned), "pruned_citations": pruned.edge_count,
            "train_papers": stats.train_papers, "train_citations": stats.train_citations,
            "test_papers": stats.test_papers, "test_citations": stats.test_citations,
        },
    )


def cmd_embed_text(cfg: RunConfig) -> None:
    started = time.time()
    work = Path(cfg.work_dir)
    _require(work, "prepare", cfg, "embed-text")
    split = _load_split(work)
    if cfg.text.model == "tfidf":
        model = text_embed.fit_tfidf(_docs(split.train), min_df=cfg.text.min_df)
        text_embed.save_tfidf_model(model, work / "tfidf_model.txt")
        extra = {"mode": "tfidf", "vocab_size": len(model.vocab)}
    elif cfg.text.model == "external":
        if not cfg.text.external_path:
            raise StageError("embed-text", "text.model=external but no text.external_path set")
        table = text_embed.load_dense_embeddings(cfg.text.external_path)
        missing = [pid for pid in list(split.train.papers) + list(split.test.papers) if pid not in table]
        if missing:
            raise StageError(
                "embed-text", f"external table missing {len(missing)} ids (e.g. {missing[:3]})"
            )
        text_embed.save_dense_embeddings(table.subset(split.train.ids()), work / "text_train.txt")
        text_embed.save_dense_embeddings(table.subset(split.test.ids()), work / "text_test.txt")
        extra = {"mode": "external", "dim": table.dim}
    else:
        raise StageError("embed-text", f"unknown text model {cfg.text.model!r}")
    _write_manifest(work, "embed_text", cfg, started, extra)


def cmd_embed_graph(cfg: RunConfig) -> None:
    started = time.time()
    work = Path(cfg.work_dir)
    _require(work, "prepare", cfg, "embed-graph")
    split = _load_split(work)
    graph = graph_embed.build_citation_graph(split.train)
    wcfg = graph_embed.WalkConfig(
        walks_per_node=cfg.graph.walks_per_node, walk_length=cfg.graph.walk_length,
        p=cfg.graph.p, q=cfg.graph.q, seed=cfg.seed, direction=cfg.graph.direction,
    )
    walks = graph_embed.generate_walks(graph, wcfg)
    scfg = graph_embed.SkipGramConfig(
        dim=cfg.graph.dim, window=cfg.graph.window, negatives=cfg.graph.negatives,
        epochs=cfg.graph.epochs, initial_lr=cfg.graph.lr, seed=cfg.seed,
    )
    table = graph_embed.train_skipgram(walks, scfg)
    # isolated nodes never enter a walk beyond themselves but are still in vocab
    text_embed.save_dense_embeddings(table, work / "node_embeddings.txt")
    _write_manifest(
        work, "embed_graph", cfg, started,
        {"nodes": len(graph), "edges": graph.edge_count, "walks": len(walks)},
    )


def cmd_train_fusion(cfg: RunConfig) -> None:
    started = time.time()
    work = Path(cfg.work_dir)
    _require(work, "embed_text", cfg, "train-fusion")
    if cfg.fusion.method == "none":
        _write_manifest(work, "train_fusion", cfg, started, {"method": "none"})
        return
    _require(work, "embed_graph", cfg, "train-fusion")
    if cfg.text.model != "external":
        raise StageError(
            "train-fusion",
            "CCA/DCCA fusion requires a dense text view (text.model=external); "
            "sparse TF-IDF vectors are retrieval-only",
        )
    split = _load_split(work)
    train_text = text_embed.load_dense_embeddings(work / "text_train.txt")
    node_table = text_embed.load_dense_embeddings(work / "node_embeddings.txt")
    ids = [pid for pid in train_text.ids if pid in node_table]
    views = fusion_mod.PairedViews(
        ids=ids,
        X=np.stack([train_text.vector(pid) for pid in ids]),
        Y=np.stack([node_table.vector(pid) for pid in ids]),
    )
    if cfg.fusion.method == "cca":
        model = fusion_mod.fit_cca(views, d=cfg.fusion.d, reg=cfg.fusion.reg)
    elif cfg.fusion.method == "dcca":
        model = fusion_mod.fit_dcca(
            views, d=cfg.fusion.d, hidden=cfg.fusion.hidden, epochs=cfg.fusion.epochs,
            batch=cfg.fusion.batch, reg=cfg.fusion.reg, lr=cfg.fusion.lr, seed=cfg.seed,
        )
    else:
        raise StageError("train-fusion", f"unknown fusion method {cfg.fusion.method!r}")
    fusion_mod.save_fusion_model(model, work / "fusion_model.txt")
    _write_manifest(work, "train_fusion", cfg, started, {"method": cfg.fusion.method})


def _load_fusion_model(cfg: RunConfig, work: Path):
    if cfg.fusion.method == "none":
        return None
    return fusion_mod.load_fusion_model(work / "fusion_model.txt")


def cmd_infer(cfg: RunConfig, strategy_override: fusion_mod.FusionStrategy | None = None) -> None:
    started = time.time()
    work = Path(cfg.work_dir)
    _require(work, "embed_text", cfg, "infer")
    _require(work, "train_fusion", cfg, "infer")
    split = _load_split(work)
    strategy_kind = strategy_override.kind if strategy_override else cfg.fusion.strategy

    if strategy_kind == "text_only" and cfg.text.model == "tfidf":
        # sparse vectors are ranked directly from the model at rank time
        _write_manifest(work, "infer", cfg, started, {"mode": "tfidf_text_only"})
        return

    train_text_index, test_text, dense = _text_views(cfg, work, split)
    if strategy_kind == "text_only":
        train_fused = text_embed.EmbeddingTable(
            dim=train_text_index.dim, ids=list(train_text_index.ids),
            matrix=np.asarray(train_text_index.matrix),
        )
        test_fused = test_text
    else:
        _require(work, "embed_graph", cfg, "infer")
        node_table = text_embed.load_dense_embeddings(work / "node_embeddings.txt")
        est_table = _estimate_test_nodes(cfg, train_text_index, test_text, dense, node_table)
        if strategy_kind == "node_only":
            train_fused = node_table
            test_fused = est_table
        else:
            if not dense:
                raise StageError(
                    "infer", f"strategy {strategy_kind!r} requires a dense text view"
                )
            strategy = strategy_override or fusion_mod.FusionStrategy(
                kind=strategy_kind,
                alpha=cfg.fusion.alpha if strategy_kind == "linear_combination" else None,
            )
            model = _load_fusion_model(cfg, work)
            train_text = text_embed.load_dense_embeddings(work / "text_train.txt")
            train_fused = inference.embed_train_set(train_text, node_table, model, strategy)
            test_fused = inference.embed_test_set(
                test_text, train_text_index, node_table, model, strategy,
                N=cfg.inference.n_neighbors,
            )
    text_embed.save_dense_embeddings(train_fused, work / "train_fused.txt")
    text_embed.save_dense_embeddings(test_fused, work / "test_fused.txt")
    _write_manifest(
        work, "infer", cfg, started,
        {"mode": strategy_kind, "dim": test_fused.dim},
    )


def cmd_rank(cfg: RunConfig) -> None:
    started = time.time()
    work = Path(cfg.work_dir)
    infer_manifest = _require(work, "infer", cfg, "rank")
    split = _load_split(work)
    k = max(cfg.eval.ks)
    if infer_manifest.get("mode") == "tfidf_text_only":
        index, test_text, _ = _text_views(cfg, work, split)
        test_ids, test_mat = test_text
        queries = [
            (pid, text_embed.SparseVector(
                dim=test_mat.shape[1],
                indices=test_mat.indices[test_mat.indptr[i] : test_mat.indptr[i + 1]],
                values=test_mat.data[test_mat.indptr[i] : test_mat.indptr[i + 1]],
            ))
            for i, pid in enumerate(test_ids)
        ]
    else:
        train_fused = text_embed.load_dense_embeddings(work / "train_fused.txt")
        test_fused = text_embed.load_dense_embeddings(work / "test_fused.txt")
        index = retrieval.CandidateIndex.from_table(train_fused)
        queries = [(pid, test_fused.vector(pid)) for pid in test_fused.ids]
    overlap = set(split.test.papers) & set(index.ids)
    if overlap:
        raise StageError("rank", f"query papers found in candidate set: {sorted(overlap)[:3]}")
    ranked = [retrieval.rank(vec, index, k, query_id=pid) for pid, vec in queries]
    retrieval.write_recommendations(ranked, work / "recommendations.tsv")
    _write_manifest(work, "rank", cfg, started, {"queries": len(ranked), "k": k})


def cmd_evaluate(cfg: RunConfig) -> eval_mod.MetricsReport:
    started = time.time()
    work = Path(cfg.work_dir)
    _require(work, "rank", cfg, "evaluate")
    split = _load_split(work)
    recs = retrieval.read_recommendations(work / "recommendations.tsv")
    report = eval_mod.evaluate_run(recs, split.ground_truth, ks=cfg.eval.ks, pad=cfg.eval.pad)
    with open(work / "metrics.txt", "w", encoding="utf-8") as f:
        eval_mod.write_metrics(report, f)
    with open(work / "per_query_ap.tsv", "w", encoding="utf-8") as f:
        for qid in sorted(report.per_query_ap):
            f.write(f"{qid}\t{report.per_query_ap[qid]:.6f}\n")
    for line in report.lines():
        print(line)
    _write_manifest(work, "evaluate", cfg, started)
    return report


def cmd_pipeline(cfg: RunConfig) -> eval_mod.MetricsReport:
    cmd_prepare(cfg)
    cmd_embed_text(cfg)
    if cfg.fusion.strategy != "text_only":
        cmd_embed_graph(cfg)
    else:
        Path(cfg.work_dir, "embed_graph.manifest").unlink(missing_ok=True)
    cmd_train_fusion(cfg)
    cmd_infer(cfg)
    cmd_rank(cfg)
    return cmd_evaluate(cfg)


def cmd_grid_pq(cfg: RunConfig) -> list[tuple[float, float, float]]:
    """Node-only retrieval swept over the p, q grid; returns (p, q, MAP@10) rows."""
    started = time.time()
    work = Path(cfg.work_dir)
    _require(work, "prepare", cfg, "grid-pq")
    _require(work, "embed_text", cfg, "grid-pq")
    split = _load_split(work)
    graph = graph_embed.build_citation_graph(split.train)
    train_text_index, test_text, dense = _text_views(cfg, work, split)
    rows: list[tuple[float, float, float]] = []
    k = max(cfg.eval.ks)
    for p in PQ_GRID:
        for q in PQ_GRID:
            wcfg = graph_embed.WalkConfig(
                walks_per_node=cfg.graph.walks_per_node, walk_length=cfg.graph.walk_length,
                p=p, q=q, seed=cfg.seed, direction=cfg.graph.direction,
            )
            scfg = graph_embed.SkipGramConfig(
                dim=cfg.graph.dim, window=cfg.graph.window, negatives=cfg.graph.negatives,
                epochs=cfg.graph.epochs, initial_lr=cfg.graph.lr, seed=cfg.seed,
            )
            table = graph_embed.train_skipgram(graph_embed.generate_walks(graph, wcfg), scfg)
            est = _estimate_test_nodes(cfg, train_text_index, test_text, dense, table)
            index = retrieval.CandidateIndex.from_table(table)
            ranked = [
                retrieval.rank(est.vector(pid), index, k, query_id=pid) for pid in est.ids
            ]
            map10 = eval_mod.map_at_k(ranked, split.ground_truth, min(cfg.eval.ks), pad=cfg.eval.pad)
            rows.append((p, q, map10))
    best = max(rows, key=lambda r: (r[2], -r[0], -r[1]))
    with open(work / "grid_pq.tsv", "w", encoding="utf-8") as f:
        f.write("p\tq\tmap@%d\n" % min(cfg.eval.ks))
        for p, q, m in rows:
            f.write(f"{p}\t{q}\t{m:.6f}\n")
        f.write(f"# best\t{best[0]}\t{best[1]}\t{best[2]:.6f}\n")
    _write_manifest(work, "grid_pq", cfg, started, {"best_p": best[0], "best_q": best[1]})
    return rows


def cmd_grid_alpha(cfg: RunConfig) -> list[tuple[float, float]]:
    """Linear-combination fusion swept over the alpha grid; (alpha, MAP@kmin) rows."""
    started = time.time()
    work = Path(cfg.work_dir)
    _require(work, "train_fusion", cfg, "grid-alpha")
    rows: list[tuple[float, float]] = []
    for alpha in ALPHA_GRID:
        strategy = fusion_mod.FusionStrategy(kind="linear_combination", alpha=alpha)
        cmd_infer(cfg, strategy_override=strategy)
        cmd_rank(cfg)
        report = cmd_evaluate(cfg)
        kmin = min(cfg.eval.ks)
        rows.append((alpha, report.per_k[kmin]["map"]))
        (work / "metrics.txt").rename(work / f"metrics_alpha_{alpha}.txt")
    with open(work / "grid_alpha.tsv", "w", encoding="utf-8") as f:
        f.write("alpha\tmap@%d\n" % min(cfg.eval.ks))
        for alpha, m in rows:
            f.write(f"{alpha}\t{m:.6f}\n")
    _write_manifest(work, "grid_alpha", cfg, started)
    return rows


# --- entry point -------------------------------------------------------------

COMMANDS = {
    "prepare": cmd_prepare,
    "embed-text": cmd_embed_text,
    "embed-graph": cmd_embed_graph,
    "train-fusion": cmd_train_fusion,
    "infer": cmd_infer,
    "rank": cmd_rank,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
    "grid-pq": cmd_grid_pq,
    "grid-alpha": cmd_grid_alpha,
}


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.read(args.config) if args.config else RunConfig()
    if args.corpus:
        cfg.corpus_path = args.corpus
    if args.work_dir:
        cfg.work_dir = args.work_dir
    for override in args.set or []:
        key, _, value = override.partition("=")
        if not value:
            raise ConfigError(f"--set expects key=value, got {override!r}")
        cfg.set_dotted(key.strip(), value.strip())
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="citefuse",
        description="Multi-view citation recommendation pipeline",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="run configuration file (INI sections)")
    parser.add_argument("--corpus", help="corpus file (line-delimited records)")
    parser.add_argument("--work-dir", help="artifact directory")
    parser.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="override a dotted config key, e.g. --set graph.p=2",
    )
    parser.add_argument(
        "--deterministic", action="store_true",
        help="force single-worker deterministic training (always on in this build)",
    )
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        COMMANDS[args.command](cfg)
    except (StageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
