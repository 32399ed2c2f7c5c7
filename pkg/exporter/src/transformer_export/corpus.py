"""Minimal corpus reader for the line-delimited paper record format.

Only the fields the exporter needs (``id``, ``title``, ``abstract``) are
validated; papers are returned in file order, which is also the output
row order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class CorpusError(Exception):
    pass


@dataclass
class PaperText:
    id: str
    title: str
    abstract: str


def read_corpus(path) -> list[PaperText]:
    papers: list[PaperText] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: malformed record ({exc.msg})")
            for key in ("id", "title", "abstract"):
                if not isinstance(rec.get(key), str) or not rec[key].strip():
                    raise CorpusError(f"{path}: line {lineno}: missing or empty {key!r}")
            if rec["id"] in seen:
                raise CorpusError(f"{path}: line {lineno}: duplicate id {rec['id']!r}")
            seen.add(rec["id"])
            papers.append(PaperText(id=rec["id"], title=rec["title"], abstract=rec["abstract"]))
    return papers
