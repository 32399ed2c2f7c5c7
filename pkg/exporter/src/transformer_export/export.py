"""Batched transformer inference over a paper corpus.

Two export paths share one driver: ``scibert`` mean-pools the final hidden
layer over non-padding tokens of "title abstract"; ``specter2`` takes the
first-token (CLS) document vector of "title [SEP] abstract", activating the
retrieval adapter when loading from the hub. Embeddings are computed fully
before anything is written, so a failing paper aborts without producing a
partial output file. Output uses the shared interchange format: a
``<count> <dim>`` header, then one ``<id>\\t<v1> <v2> ...`` row per paper in
corpus order, with repr floats so values round-trip exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import read_corpus

log = logging.getLogger("transformer_export")


class ExportError(Exception):
    pass


MODEL_REFS = {
    "scibert": "allenai/scibert_scivocab_uncased",
    "specter2": "allenai/specter2_base",
}
SPECTER2_ADAPTER = "allenai/specter2"


@dataclass
class ExportJob:
    corpus_path: str
    model_choice: str  # scibert | specter2
    output_path: str
    batch_size: int = 8
    max_tokens: int | None = None  # default: the encoder's position limit
    model_path: str = ""  # local weights override (skips any download)
    revision: str = ""  # pinned model revision for hub loads

    def __post_init__(self):
        if self.model_choice not in MODEL_REFS:
            raise ExportError(f"unknown model {self.model_choice!r}")
        if self.batch_size < 1:
            raise ExportError("batch_size must be >= 1")


@dataclass
class ExportReport:
    papers: int = 0
    truncated: int = 0
    dim: int = 0
    source: str = ""
    revision: str = ""
    adapter: str = ""
    manifest_path: str = ""


def _load_model(job: ExportJob):
    import torch
    from transformers import AutoModel, AutoTokenizer

    source = job.model_path or MODEL_REFS[job.model_choice]
    kwargs = {"revision": job.revision} if job.revision else {}
    try:
        tokenizer = AutoTokenizer.from_pretrained(source, **kwargs)
        model = AutoModel.from_pretrained(source, **kwargs)
    except Exception as exc:
        raise ExportError(f"could not load model from {source!r}: {exc}") from exc
    adapter = ""
    if job.model_choice == "specter2" and not job.model_path:
        # hub weights are the base model; the document vectors come from the
        # retrieval adapter. A local model_path is assumed to have it merged.
        try:
            import adapters

            adapters.init(model)
            model.load_adapter(SPECTER2_ADAPTER, source="hf", set_active=True)
            adapter = SPECTER2_ADAPTER
        except ImportError as exc:
            raise ExportError(
                "specter2 hub export needs the 'adapters' package for the "
                "retrieval adapter; install it or pass a local model_path "
                "with merged weights"
            ) from exc
    model.eval()
    torch.set_grad_enabled(False)
    return tokenizer, model, source, adapter


def _input_text(paper, tokenizer, model_choice: str) -> str:
    if model_choice == "specter2":
        sep = tokenizer.sep_token or "[SEP]"
        return f"{paper.title} {sep} {paper.abstract}"
    return f"{paper.title} {paper.abstract}"


def _embed_batch(texts, tokenizer, model, model_choice: str, max_tokens: int):
    """Returns (matrix, number of truncated texts in this batch)."""
    import torch

    lengths = [len(tokenizer(t)["input_ids"]) for t in texts]
    truncated = sum(1 for n in lengths if n > max_tokens)
    enc = tokenizer(
        texts,
        padding=True,
        truncation=True,
        max_length=max_tokens,
        return_tensors="pt",
    )
    out = model(**enc)
    hidden = out.last_hidden_state  # (batch, tokens, dim)
    if model_choice == "specter2":
        vecs = hidden[:, 0, :]
    else:
        mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
        vecs = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
    return vecs.to(torch.float64).numpy(), truncated


def export_embeddings(job: ExportJob) -> ExportReport:
    papers = read_corpus(job.corpus_path)
    tokenizer, model, source, adapter = _load_model(job)
    max_tokens = job.max_tokens or min(
        int(getattr(model.config, "max_position_embeddings", 512)),
        int(tokenizer.model_max_length),
    )

    rows: list[np.ndarray] = []
    truncated = 0
    for start in range(0, len(papers), job.batch_size):
        batch = papers[start : start + job.batch_size]
        texts = [_input_text(p, tokenizer, job.model_choice) for p in batch]
        vecs, cut = _embed_batch(texts, tokenizer, model, job.model_choice, max_tokens)
        if cut:
            for p, n in zip(batch, (len(tokenizer(t)["input_ids"]) for t in texts)):
                if n > max_tokens:
                    log.warning("truncated %s: %d tokens > %d", p.id, n, max_tokens)
        truncated += cut
        rows.append(vecs)
    matrix = np.vstack(rows) if rows else np.empty((0, model.config.hidden_size))
    if not np.all(np.isfinite(matrix)):
        raise ExportError("non-finite embedding produced; nothing written")

    out = Path(job.output_path)
    with open(out, "w", encoding="utf-8") as f:
        f.write(f"{len(papers)} {matrix.shape[1]}\n")
        for paper, row in zip(papers, matrix):
            f.write(paper.id + "\t" + " ".join(repr(float(v)) for v in row) + "\n")

    report = ExportReport(
        papers=len(papers),
        truncated=truncated,
        dim=int(matrix.shape[1]),
        source=source,
        revision=job.revision or "default",
        adapter=adapter,
        manifest_path=str(out) + ".manifest",
    )
    with open(report.manifest_path, "w", encoding="utf-8") as f:
        f.write(f"model\t{job.model_choice}\n")
        f.write(f"source\t{source}\n")
        f.write(f"revision\t{report.revision}\n")
        f.write(f"adapter\t{adapter or 'none'}\n")
        f.write(f"papers\t{report.papers}\n")
        f.write(f"dim\t{report.dim}\n")
        f.write(f"max_tokens\t{max_tokens}\n")
        f.write(f"truncated\t{truncated}\n")
        f.write(f"batch_size\t{job.batch_size}\n")
    return report
