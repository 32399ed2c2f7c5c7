"""Shared fixture-building helpers for the citefuse test suite."""

import json

from citefuse.corpus import Paper


def make_paper(pid, year=2000, refs=(), title="A study", abstract="of things"):
    return Paper(id=pid, title=title, abstract=abstract, year=year, references=set(refs))


def record(pid, year=2000, refs=(), title="Title words here", abstract="Abstract words here"):
    return json.dumps(
        {"id": pid, "title": title, "abstract": abstract, "year": year, "references": list(refs)}
    )
