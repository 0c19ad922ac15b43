"""Declarative service configuration.

One JSON file covers providers, thresholds, seeds, and storage paths so
nothing tunable hides in code. Validation reports the offending field by
dotted path. Credentials never live here; providers read them from the
environment (EVISYNTH_PROVIDER_TOKEN).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Optional

from ..errors import BadConfig


@dataclass
class EmbeddingConfig:
    provider: str = "hashed_local"  # hashed_local | remote
    dims: int = 256
    url: Optional[str] = None
    timeout: float = 10.0


@dataclass
class ChunkingConfig:
    max_tokens: int = 64
    overlap: int = 8


@dataclass
class ScreenerConfig:
    provider: str = "cues"  # cues | model
    model_path: Optional[str] = None
    theta: float = 0.5
    rubric_mode: str = "all_five"  # all_five | pio_s


@dataclass
class TopicsConfig:
    seed: int = 7
    n_topics: Optional[int] = None
    tau: float = 0.6
    min_cluster_size: int = 3
    top_k_terms: int = 10


@dataclass
class RetrievalConfig:
    k: int = 5
    retries: int = 2
    gamma: float = 0.2
    max_citations: int = 3


@dataclass
class AlertsConfig:
    rho: float = 0.8
    min_recent: int = 5
    window_years: int = 3


@dataclass
class UpdateConfig:
    refit_outlier_fraction: float = 0.2


@dataclass
class StorageConfig:
    dir: str = "./evisynth_data"
    audit_file: str = "audit.log"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8611


@dataclass
class Config:
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    screener: ScreenerConfig = field(default_factory=ScreenerConfig)
    topics: TopicsConfig = field(default_factory=TopicsConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    alerts: AlertsConfig = field(default_factory=AlertsConfig)
    update: UpdateConfig = field(default_factory=UpdateConfig)
    storage: StorageConfig = field(default_factory=StorageConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def as_dict(self) -> dict:
        out = {}
        for section in fields(self):
            value = getattr(self, section.name)
            out[section.name] = {f.name: getattr(value, f.name) for f in fields(value)}
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


_SECTIONS = {
    "embedding": EmbeddingConfig,
    "chunking": ChunkingConfig,
    "screener": ScreenerConfig,
    "topics": TopicsConfig,
    "retrieval": RetrievalConfig,
    "alerts": AlertsConfig,
    "update": UpdateConfig,
    "storage": StorageConfig,
    "service": ServiceConfig,
}


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise BadConfig(f"{path}: {message}")


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_config(config: Config) -> None:
    e = config.embedding
    _require(
        e.provider in ("hashed_local", "remote"),
        "embedding.provider",
        "must be 'hashed_local' or 'remote'",
    )
    _require(isinstance(e.dims, int) and e.dims >= 8, "embedding.dims", "must be an integer >= 8")
    if e.provider == "remote":
        _require(bool(e.url), "embedding.url", "required when provider is 'remote'")
    _require(_is_number(e.timeout) and e.timeout > 0, "embedding.timeout", "must be > 0")

    c = config.chunking
    _require(isinstance(c.max_tokens, int) and c.max_tokens > 0, "chunking.max_tokens", "must be a positive integer")
    _require(isinstance(c.overlap, int) and c.overlap >= 0, "chunking.overlap", "must be a non-negative integer")
    _require(c.max_tokens > c.overlap, "chunking.overlap", "must be smaller than max_tokens")

    s = config.screener
    _require(s.provider in ("cues", "model"), "screener.provider", "must be 'cues' or 'model'")
    if s.provider == "model":
        _require(bool(s.model_path), "screener.model_path", "required when provider is 'model'")
    _require(_is_number(s.theta) and 0.0 <= s.theta <= 1.0, "screener.theta", "must be in [0, 1]")
    _require(
        s.rubric_mode in ("all_five", "pio_s"),
        "screener.rubric_mode",
        "must be 'all_five' or 'pio_s'",
    )

    t = config.topics
    _require(isinstance(t.seed, int), "topics.seed", "must be an integer")
    if t.n_topics is not None:
        _require(isinstance(t.n_topics, int) and t.n_topics >= 1, "topics.n_topics", "must be an integer >= 1 or null")
    _require(_is_number(t.tau) and 0.0 < t.tau <= 2.0, "topics.tau", "must be in (0, 2]")
    _require(
        isinstance(t.min_cluster_size, int) and t.min_cluster_size >= 1,
        "topics.min_cluster_size",
        "must be an integer >= 1",
    )
    _require(
        isinstance(t.top_k_terms, int) and t.top_k_terms >= 1,
        "topics.top_k_terms",
        "must be an integer >= 1",
    )

    r = config.retrieval
    _require(isinstance(r.k, int) and r.k >= 1, "retrieval.k", "must be an integer >= 1")
    _require(isinstance(r.retries, int) and r.retries >= 0, "retrieval.retries", "must be an integer >= 0")
    _require(_is_number(r.gamma) and 0.0 <= r.gamma <= 1.0, "retrieval.gamma", "must be in [0, 1]")
    _require(
        isinstance(r.max_citations, int) and r.max_citations >= 1,
        "retrieval.max_citations",
        "must be an integer >= 1",
    )

    a = config.alerts
    _require(_is_number(a.rho) and 0.0 <= a.rho <= 1.0, "alerts.rho", "must be in [0, 1]")
    _require(isinstance(a.min_recent, int) and a.min_recent >= 1, "alerts.min_recent", "must be an integer >= 1")
    _require(
        isinstance(a.window_years, int) and a.window_years >= 1,
        "alerts.window_years",
        "must be an integer >= 1",
    )

    u = config.update
    _require(
        _is_number(u.refit_outlier_fraction) and 0.0 <= u.refit_outlier_fraction <= 1.0,
        "update.refit_outlier_fraction",
        "must be in [0, 1]",
    )

    st = config.storage
    _require(bool(st.dir), "storage.dir", "must be a non-empty path")
    _require(bool(st.audit_file), "storage.audit_file", "must be a non-empty file name")

    sv = config.service
    _require(bool(sv.host), "service.host", "must be non-empty")
    _require(
        isinstance(sv.port, int) and 1 <= sv.port <= 65535,
        "service.port",
        "must be an integer in [1, 65535]",
    )


def config_from_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise BadConfig("config root must be a JSON object")
    config = Config()
    for key, value in data.items():
        section_cls = _SECTIONS.get(key)
        if section_cls is None:
            raise BadConfig(f"{key}: unknown config section")
        if not isinstance(value, dict):
            raise BadConfig(f"{key}: must be an object")
        section = getattr(config, key)
        known = {f.name for f in fields(section_cls)}
        for name, item in value.items():
            if name not in known:
                raise BadConfig(f"{key}.{name}: unknown config field")
            setattr(section, name, item)
    validate_config(config)
    return config


def load_config(path: str) -> Config:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise BadConfig(f"cannot read config file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadConfig(f"config file {path!r} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def default_config() -> Config:
    return Config()
