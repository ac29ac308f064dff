"""Run configuration: one JSON file with a section per subsystem.

Relative paths are resolved against the directory holding the config file.
Secrets never live here; sections name the environment variable to read.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


@dataclass
class CorpusConfig:
    store_path: str = "data/store.jsonl"
    chunk_words: int = 100


@dataclass
class SparseConfig:
    k1: float = 1.2
    b: float = 0.75
    title_weight: float = 2.0
    index_path: str = "data/sparse_index.json"


@dataclass
class DenseConfig:
    embedder: str = "hash"  # "hash" or "remote"
    dim: int = 256
    url: str = ""
    model: str = ""
    api_key_env: str = "EMBEDDING_API_KEY"
    index_path: str = "data/dense_index.npz"


@dataclass
class WebConfig:
    endpoint: str = "https://api.bing.microsoft.com/v7.0/search"
    api_key_env: str = "BING_SEARCH_KEY"
    rate: float = 3.0


@dataclass
class LLMConfig:
    backend: str = "remote"  # "remote" or "scripted"
    url: str = "http://localhost:8000/v1"
    model: str = "Qwen2-7B-Instruct"
    api_key_env: str = "OPENAI_API_KEY"
    script_path: str = ""
    temperature: float = 0.0
    max_retries: int = 4
    max_tokens: dict[str, int] = field(default_factory=dict)


@dataclass
class SearchersConfig:
    enabled: list[str] = field(default_factory=lambda: ["sparse", "dense"])
    k: int = 10
    sparse_max_depth: int = 3
    sparse_max_refinements: int = 27
    sparse_rewrite: bool = True
    sparse_feedback: bool = True
    dense_max_rewrites: int = 3
    vanilla_retrievers: list[str] = field(default_factory=lambda: ["sparse"])


@dataclass
class HighLevelSection:
    max_iterations: int = 3
    decompose: bool = True
    summarize: bool = True
    supplement: bool = True
    context_doc_cap: int = 10


@dataclass
class EvalConfig:
    normalization: str = "squad"


@dataclass
class Config:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    sparse: SparseConfig = field(default_factory=SparseConfig)
    dense: DenseConfig = field(default_factory=DenseConfig)
    web: WebConfig = field(default_factory=WebConfig)
    llm: LLMConfig = field(default_factory=LLMConfig)
    searchers: SearchersConfig = field(default_factory=SearchersConfig)
    high_level: HighLevelSection = field(default_factory=HighLevelSection)
    eval: EvalConfig = field(default_factory=EvalConfig)
    base_dir: Path = field(default_factory=Path.cwd, repr=False, compare=False)

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> "Config":
        sections = {}
        types = {f.name: f.default_factory for f in dataclasses.fields(cls) if f.name != "base_dir"}
        for name, value in data.items():
            if name not in types:
                raise ValueError(f"unknown config section {name!r}")
            section_cls = types[name]
            known = {f.name for f in dataclasses.fields(section_cls)}
            unknown = set(value) - known
            if unknown:
                raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
            sections[name] = section_cls(**value)
        return cls(**sections, base_dir=base_dir or Path.cwd())

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=path.resolve().parent)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: dataclasses.asdict(getattr(self, f.name))
                for f in dataclasses.fields(self) if f.name != "base_dir"}

    def resolve(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p
