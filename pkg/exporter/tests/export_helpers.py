"""Shared helpers for the exporter test suite."""

import json

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "a", "study", "of", "things", "paper", "about", "neural",
    "networks", "graphs", "##s", "the", "and",
]


def write_corpus(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    return path
