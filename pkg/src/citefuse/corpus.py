"""Corpus parsing, pruning and temporal train/test splitting.

The corpus file is line-delimited JSON, one record per line, with required
keys ``id``, ``title``, ``abstract``, ``year`` and ``references``. Records
with missing or empty required fields are dropped and counted.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from typing import IO, Iterable


class CorpusError(Exception):
    pass


@dataclass
class Paper:
    id: str
    title: str
    abstract: str
    year: int
    references: set[str]
    authors: list[str] = field(default_factory=list)
    venue: str = ""

    @property
    def text(self) -> str:
        """Title and abstract joined with a single space."""
        return f"{self.title} {self.abstract}"


@dataclass
class Corpus:
    papers: dict[str, Paper]

    def __len__(self) -> int:
        return len(self.papers)

    def __contains__(self, pid: str) -> bool:
        return pid in self.papers

    def __getitem__(self, pid: str) -> Paper:
        return self.papers[pid]

    @property
    def edge_count(self) -> int:
        """Citation links with both endpoints inside the corpus."""
        return sum(
            1 for p in self.papers.values() for r in p.references if r in self.papers
        )

    def ids(self) -> list[str]:
        return sorted(self.papers)


@dataclass
class SplitCorpus:
    train: Corpus
    test: Corpus
    ground_truth: dict[str, set[str]]


@dataclass
class ParseReport:
    accepted: int = 0
    rejected: int = 0
    errors: list[str] = field(default_factory=list)

    def summary(self) -> str:
        return f"accepted={self.accepted} rejected={self.rejected}"


@dataclass
class StatsReport:
    train_papers: int
    train_citations: int
    train_avg: float
    test_papers: int
    test_citations: int
    test_avg: float

    def lines(self) -> list[str]:
        return [
            f"train.papers\t{self.train_papers}",
            f"train.citations\t{self.train_citations}",
            f"train.avg_citations\t{self.train_avg:.2f}",
            f"test.papers\t{self.test_papers}",
            f"test.citations\t{self.test_citations}",
            f"test.avg_citations\t{self.test_avg:.2f}",
        ]


REQUIRED_FIELDS = ("id", "title", "abstract", "year", "references")


def _valid_record(rec: dict) -> bool:
    for key in REQUIRED_FIELDS:
        if key not in rec:
            return False
    if not isinstance(rec["id"], str) or not rec["id"]:
        return False
    # empty-but-present title/abstract counts as incomplete metadata
    if not isinstance(rec["title"], str) or not rec["title"].strip():
        return False
    if not isinstance(rec["abstract"], str) or not rec["abstract"].strip():
        return False
    if not isinstance(rec["year"], int):
        return False
    if not isinstance(rec["references"], list):
        return False
    return all(isinstance(r, str) for r in rec["references"])


def parse_corpus(stream: Iterable[str], report: ParseReport | None = None) -> Corpus:
    """Parse a line-delimited record stream into a Corpus.

    Malformed or incomplete records are excluded and counted in ``report``;
    an empty stream yields an empty corpus.
    """
    if report is None:
        report = ParseReport()
    papers: dict[str, Paper] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            report.rejected += 1
            report.errors.append(f"line {lineno}: malformed record ({exc.msg})")
            continue
        if not isinstance(rec, dict) or not _valid_record(rec):
            report.rejected += 1
            report.errors.append(f"line {lineno}: incomplete metadata")
            continue
        pid = rec["id"]
        if pid in papers:
            report.rejected += 1
            report.errors.append(f"line {lineno}: duplicate id {pid!r}")
            continue
        refs = {r for r in rec["references"] if r != pid}
        papers[pid] = Paper(
            id=pid,
            title=rec["title"],
            abstract=rec["abstract"],
            year=rec["year"],
            references=refs,
            authors=list(rec.get("authors", [])),
            venue=rec.get("venue", ""),
        )
        report.accepted += 1
    return Corpus(papers=papers)


def serialize_corpus(corpus: Corpus, out: IO[str]) -> None:
    """Write a corpus back to line-delimited records (stable id order)."""
    for pid in corpus.ids():
        p = corpus.papers[pid]
        rec = {
            "id": p.id,
            "title": p.title,
            "abstract": p.abstract,
            "year": p.year,
            "references": sorted(p.references),
        }
        if p.authors:
            rec["authors"] = p.authors
        if p.venue:
            rec["venue"] = p.venue
        out.write(json.dumps(rec, ensure_ascii=False) + "\n")


def _degrees(corpus: Corpus) -> tuple[dict[str, int], dict[str, int]]:
    in_deg = {pid: 0 for pid in corpus.papers}
    out_deg = {pid: 0 for pid in corpus.papers}
    for pid, p in corpus.papers.items():
        for ref in p.references:
            if ref in corpus.papers:
                out_deg[pid] += 1
                in_deg[ref] += 1
    return in_deg, out_deg


def prune(
    corpus: Corpus, min_in: int = 15, min_out: int = 20, iterate: bool = False
) -> Corpus:
    """Drop papers with in-degree < min_in or out-degree < min_out.

    Degrees are measured on the input graph (single pass). With
    ``iterate=True`` the filter is reapplied until a fixed point.
    """
    if min_in < 0 or min_out < 0:
        raise CorpusError("degree thresholds must be non-negative")
    current = corpus
    while True:
        in_deg, out_deg = _degrees(current)
        keep = {
            pid
            for pid in current.papers
            if in_deg[pid] >= min_in and out_deg[pid] >= min_out
        }
        pruned = Corpus(
            papers={
                pid: Paper(
                    id=p.id,
                    title=p.title,
                    abstract=p.abstract,
                    year=p.year,
                    references={r for r in p.references if r in keep},
                    authors=p.authors,
                    venue=p.venue,
                )
                for pid, p in current.papers.items()
                if pid in keep
            }
        )
        if not iterate or len(pruned) == len(current):
            return pruned
        current = pruned


def temporal_split(
    corpus: Corpus,
    train_end_year: int = 2013,
    test_start_year: int = 2014,
    test_end_year: int = 2017,
) -> SplitCorpus:
    """Split by publication year; keep only test papers citing the train set.

    Train reference sets are restricted to train ids so the citation graph
    is built from training papers only. Ground truth per test paper is its
    citations into the train set.
    """
    if not (train_end_year < test_start_year <= test_end_year):
        raise CorpusError("split years must satisfy train_end < test_start <= test_end")

    train_ids = {p.id for p in corpus.papers.values() if p.year <= train_end_year}
    train = Corpus(
        papers={
            pid: Paper(
                id=p.id,
                title=p.title,
                abstract=p.abstract,
                year=p.year,
                references=p.references & train_ids,
                authors=p.authors,
                venue=p.venue,
            )
            for pid, p in corpus.papers.items()
            if pid in train_ids
        }
    )

    test_papers: dict[str, Paper] = {}
    ground_truth: dict[str, set[str]] = {}
    for pid, p in corpus.papers.items():
        if not (test_start_year <= p.year <= test_end_year):
            continue
        truth = p.references & train_ids
        if not truth:
            continue
        test_papers[pid] = p
        ground_truth[pid] = truth
    return SplitCorpus(train=train, test=Corpus(papers=test_papers), ground_truth=ground_truth)


def corpus_stats(split: SplitCorpus) -> StatsReport:
    """Paper counts, retained citation counts and average citations per paper."""
    train_papers = len(split.train)
    train_cites = split.train.edge_count
    test_papers = len(split.test)
    test_cites = sum(len(v) for v in split.ground_truth.values())
    return StatsReport(
        train_papers=train_papers,
        train_citations=train_cites,
        train_avg=train_cites / train_papers if train_papers else 0.0,
        test_papers=test_papers,
        test_citations=test_cites,
        test_avg=test_cites / test_papers if test_papers else 0.0,
    )


def write_parse_report(report: ParseReport, out: IO[str] = sys.stderr) -> None:
    out.write(report.summary() + "\n")
    for err in report.errors:
        out.write(err + "\n")
