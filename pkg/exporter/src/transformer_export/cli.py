"""Command-line entry point: `transformer-export export ...`."""

from __future__ import annotations

import argparse
import logging
import sys

from .corpus import CorpusError
from .export import ExportError, ExportJob, export_embeddings


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="transformer-export",
        description="Export transformer document embeddings for a paper corpus",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    exp = sub.add_parser("export", help="embed a corpus and write the interchange file")
    exp.add_argument("--corpus", required=True, help="line-delimited paper records")
    exp.add_argument("--model", required=True, choices=("scibert", "specter2"))
    exp.add_argument("--out", required=True, help="output embedding file")
    exp.add_argument("--batch", type=int, default=8, help="inference batch size")
    exp.add_argument("--max-tokens", type=int, default=None,
                     help="token budget per paper (default: encoder limit)")
    exp.add_argument("--model-path", default="",
                     help="local model directory, overrides the hub reference")
    exp.add_argument("--revision", default="", help="pinned hub model revision")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        job = ExportJob(
            corpus_path=args.corpus,
            model_choice=args.model,
            output_path=args.out,
            batch_size=args.batch,
            max_tokens=args.max_tokens,
            model_path=args.model_path,
            revision=args.revision,
        )
        report = export_embeddings(job)
    except (ExportError, CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {report.papers} x {report.dim} embeddings "
        f"({report.truncated} truncated) from {report.source}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
