"""Run configuration: sectioned key-value files, dotted overrides, hashing.

Defaults mirror the reference experimental settings (pruning 15/20, split
at 2013/2014-2017, 200x80 walks, p=4 q=2, 128-dim embeddings, DCCA with a
128-unit sigmoid hidden layer trained 20 epochs at batch 256).
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass
class PruneConfig:
    min_in: int = 15
    min_out: int = 20
    iterate: bool = False


@dataclass
class SplitConfig:
    train_end: int = 2013
    test_start: int = 2014
    test_end: int = 2017


@dataclass
class TextConfig:
    model: str = "tfidf"  # tfidf | external
    external_path: str = ""
    min_df: int = 5


@dataclass
class GraphConfig:
    walks_per_node: int = 200
    walk_length: int = 80
    p: float = 4.0
    q: float = 2.0
    direction: str = "directed"
    dim: int = 128
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025


@dataclass
class FusionConfig:
    method: str = "dcca"  # none | cca | dcca
    d: int = 128
    hidden: int = 128
    reg: float = 1e-4
    epochs: int = 20
    batch: int = 256
    lr: float = 1e-3
    strategy: str = "projected_concat"
    # text_only | node_only | simple_concat | projected_concat | linear_combination
    alpha: float = 0.5


@dataclass
class InferenceConfig:
    n_neighbors: int = 5


@dataclass
class EvalConfig:
    ks: tuple[int, ...] = (10, 15, 20)
    pad: bool = False


@dataclass
class RunConfig:
    corpus_path: str = ""
    work_dir: str = "run"
    seed: int = 0
    prune: PruneConfig = field(default_factory=PruneConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    text: TextConfig = field(default_factory=TextConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    _SECTIONS = ("prune", "split", "text", "graph", "fusion", "inference", "eval")

    def items(self) -> list[tuple[str, str]]:
        """Canonical (dotted key, value) pairs, sorted."""
        out = [
            ("run.corpus_path", self.corpus_path),
            ("run.work_dir", self.work_dir),
            ("run.seed", str(self.seed)),
        ]
        for section in self._SECTIONS:
            sub = getattr(self, section)
            for f in fields(sub):
                val = getattr(sub, f.name)
                if isinstance(val, tuple):
                    val = ",".join(str(v) for v in val)
                out.append((f"{section}.{f.name}", str(val)))
        return sorted(out)

    def hash(self) -> str:
        """Stable digest over everything except paths and work dir."""
        h = hashlib.sha256()
        for key, val in self.items():
            if key in ("run.work_dir",):
                continue
            h.update(f"{key}={val}\n".encode())
        return h.hexdigest()[:16]

    def set_dotted(self, key: str, value: str) -> None:
        section, _, name = key.partition(".")
        if section == "run" or not name:
            name = name or section
            if name == "seed":
                self.seed = int(value)
            elif name == "corpus_path":
                self.corpus_path = value
            elif name == "work_dir":
                self.work_dir = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
            return
        if section not in self._SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        sub = getattr(self, section)
        for f in fields(sub):
            if f.name == name:
                current = getattr(sub, f.name)
                if isinstance(current, bool):
                    setattr(sub, name, value.lower() in ("1", "true", "yes"))
                elif isinstance(current, int):
                    setattr(sub, name, int(value))
                elif isinstance(current, float):
                    setattr(sub, name, float(value))
                elif isinstance(current, tuple):
                    setattr(sub, name, tuple(int(v) for v in value.split(",")))
                else:
                    setattr(sub, name, value)
                return
        raise ConfigError(f"unknown config key {key!r}")

    def write(self, path: str | Path) -> None:
        cp = configparser.ConfigParser()
        for key, val in self.items():
            section, _, name = key.partition(".")
            if not cp.has_section(section):
                cp.add_section(section)
            cp.set(section, name, val)
        with open(path, "w", encoding="utf-8") as f:
            cp.write(f)

    @classmethod
    def read(cls, path: str | Path) -> "RunConfig":
        cp = configparser.ConfigParser()
        with open(path, encoding="utf-8") as f:
            cp.read_file(f)
        cfg = cls()
        for section in cp.sections():
            for name, value in cp.items(section):
                cfg.set_dotted(f"{section}.{name}", value)
        return cfg

    def header_lines(self) -> list[str]:
        """Full config dump for artifact provenance."""
        return [f"{k} = {v}" for k, v in self.items()]
