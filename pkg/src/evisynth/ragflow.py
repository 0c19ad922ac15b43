"""Query pipeline: route, retrieve, grade, then answer or refuse.

Answers are assembled strictly from evidence graded relevant; when nothing
relevant survives the retries the pipeline refuses with an insufficiency
flag instead of guessing. Stub providers (lexical grader, extractive
synthesizer) keep the whole pipeline deterministic so the behavior is
testable end to end; LLM-backed providers plug in behind the same calls.

Every interaction lands in an append-only audit log of length-prefixed
JSON lines: "{byte-length} {json}\\n". The prefix lets recovery detect a
torn tail after a crash and keep every complete record.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .corpus import StudyRecord
from .designclf import DesignLabel, LEAVES
from .embedkit import Chunk, EmbeddingProvider, VectorIndex, tokenize
from .errors import (
    BackendDown,
    DegenerateQuery,
    EmptyIndex,
    EmptyQuery,
    GraderUnavailable,
    StorageFull,
)
from .graphcore import PropertyGraph
from .stemming import STOPWORDS

ROUTES = ("vector", "graph", "structured", "hybrid")

GRAPH_CUES = (
    "shared",
    "between",
    "linked to",
    "linking",
    "links",
    "relationship",
    "related to",
    "co-occur",
    "connected",
    "associated with",
)
STRUCTURED_CUES = (
    "how many",
    "count of",
    "number of",
    "per year",
    "published in",
    "in year",
    "average",
    "most common",
    "total number",
)

_YEAR_RE = re.compile(r"\b(19|20)\d{2}\b")


def route(query: str) -> str:
    """Keyword-shape routing; pure function of the query text."""
    if not query or not query.strip():
        raise EmptyQuery("query is empty")
    lowered = query.lower()
    wants_graph = any(cue in lowered for cue in GRAPH_CUES)
    wants_structured = any(cue in lowered for cue in STRUCTURED_CUES)
    if wants_graph and wants_structured:
        return "hybrid"
    if wants_graph:
        return "graph"
    if wants_structured:
        return "structured"
    return "vector"


def content_tokens(text: str) -> set[str]:
    return {tok for tok in tokenize(text) if tok not in STOPWORDS}


def overlap_ratio(query: str, evidence_text: str) -> float:
    q = content_tokens(query)
    if not q:
        return 0.0
    e = content_tokens(evidence_text)
    return len(q & e) / len(q)


class LexicalGrader:
    """Relevance by shared content-token ratio against a threshold."""

    name = "lexical"

    def __init__(self, gamma: float = 0.2) -> None:
        self.gamma = gamma

    def grade(self, query: str, evidence_text: str) -> str:
        return "relevant" if overlap_ratio(query, evidence_text) >= self.gamma else "irrelevant"


class ProviderGrader:
    """Wraps an external grading callable returning the same enum."""

    name = "provider"

    def __init__(self, fn: Callable[[str, str], str]) -> None:
        self._fn = fn

    def grade(self, query: str, evidence_text: str) -> str:
        try:
            verdict = self._fn(query, evidence_text)
        except Exception as exc:
            raise GraderUnavailable(f"grading provider failed: {exc}") from exc
        if verdict not in ("relevant", "irrelevant"):
            raise GraderUnavailable(f"grading provider returned {verdict!r}")
        return verdict


@dataclass(frozen=True)
class Evidence:
    record_id: str
    chunk_id: str
    text: str
    score: float
    origin: str  # which backend produced it

    def as_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "chunk_id": self.chunk_id,
            "text": self.text,
            "score": self.score,
            "origin": self.origin,
        }


@dataclass(frozen=True)
class Citation:
    record_id: str
    chunk_id: str
    span: str

    def as_dict(self) -> dict:
        return {"record_id": self.record_id, "chunk_id": self.chunk_id, "span": self.span}


@dataclass
class GroundedAnswer:
    answer: str
    citations: list[Citation]
    insufficient: bool

    def as_dict(self) -> dict:
        return {
            "answer": self.answer,
            "citations": [c.as_dict() for c in self.citations],
            "insufficient": self.insufficient,
        }


@dataclass
class QueryTrace:
    query: str
    route: str
    retrieved: list[dict] = field(default_factory=list)  # evidence dict + "grade"
    answer: Optional[dict] = None
    attempts: int = 0
    error: Optional[str] = None
    providers: dict = field(default_factory=dict)
    started: float = 0.0
    finished: float = 0.0

    def as_dict(self) -> dict:
        return {
            "query": self.query,
            "route": self.route,
            "retrieved": self.retrieved,
            "answer": self.answer,
            "attempts": self.attempts,
            "error": self.error,
            "providers": self.providers,
            "started": self.started,
            "finished": self.finished,
        }


@dataclass
class RagConfig:
    k: int = 5
    retries: int = 2
    gamma: float = 0.2
    max_citations: int = 3
    span_chars: int = 240


@dataclass
class RagBackends:
    provider: EmbeddingProvider
    index: VectorIndex
    chunks: Mapping[str, Chunk]
    records: Mapping[str, StudyRecord]
    graph: PropertyGraph
    designs: Mapping[str, DesignLabel] = field(default_factory=dict)


def _match_name(name: str) -> str:
    return " ".join(tokenize(name))


def _retrieve_vector(query: str, deps: RagBackends, k: int) -> list[Evidence]:
    try:
        vec = deps.provider.embed(query)
        hits = deps.index.search(np.asarray(vec), k)
    except (EmptyIndex, DegenerateQuery):
        return []
    out = []
    for chunk_id, score in hits:
        chunk = deps.chunks.get(chunk_id)
        if chunk is None:
            continue
        out.append(
            Evidence(
                record_id=chunk.record_id,
                chunk_id=chunk_id,
                text=chunk.text,
                score=float(score),
                origin="vector",
            )
        )
    return out


def _first_chunk_evidence(
    record_id: str, deps: RagBackends, origin: str
) -> Optional[Evidence]:
    chunk = deps.chunks.get(f"{record_id}:0")
    if chunk is None:
        return None
    return Evidence(
        record_id=record_id, chunk_id=chunk.chunk_id, text=chunk.text, score=1.0, origin=origin
    )


def _retrieve_graph(query: str, deps: RagBackends, k: int) -> list[Evidence]:
    query_norm = " ".join(tokenize(query))
    matched_ids = []
    for ent in deps.graph.entities():
        if ent.kind == "study":
            continue
        name = _match_name(ent.name)
        if name and f" {name} " in f" {query_norm} ":
            matched_ids.append(ent.id)
    study_ids: list[str] = []
    for eid in matched_ids:
        for neighbor in deps.graph.neighbors(eid, direction="both"):
            if neighbor.kind != "study":
                continue
            rid = neighbor.properties.get("record_id", neighbor.name)
            if rid not in study_ids:
                study_ids.append(rid)
    out = []
    for rid in sorted(study_ids)[:k]:
        ev = _first_chunk_evidence(rid, deps, "graph")
        if ev is not None:
            out.append(ev)
    return out


def _mentioned_designs(query: str) -> list[str]:
    query_norm = " ".join(tokenize(query))
    padded = f" {query_norm} "
    found = []
    for leaf in LEAVES:
        phrase = " ".join(leaf.split("_"))
        if f" {phrase} " in padded or f" {phrase}s " in padded:
            found.append(leaf)
    return found


def _retrieve_structured(
    query: str, deps: RagBackends, k: int
) -> tuple[list[Evidence], str]:
    """Filter records by mentioned years/designs; returns evidence plus a
    summary sentence describing the aggregate."""
    years = {int(m.group(0)) for m in _YEAR_RE.finditer(query)}
    designs = _mentioned_designs(query)
    matches = []
    for rid in sorted(deps.records):
        record = deps.records[rid]
        if years and record.year not in years:
            continue
        if designs:
            label = deps.designs.get(rid)
            if label is None or label.leaf not in designs:
                continue
        matches.append(rid)
    filters = []
    if years:
        filters.append("year in {" + ", ".join(str(y) for y in sorted(years)) + "}")
    if designs:
        filters.append("design in {" + ", ".join(designs) + "}")
    summary = (
        f"{len(matches)} records match " + " and ".join(filters) + "."
        if filters
        else f"{len(matches)} records in the corpus."
    )
    out = []
    for rid in matches[:k]:
        ev = _first_chunk_evidence(rid, deps, "structured")
        if ev is not None:
            out.append(ev)
    return out, summary


def _retrieve(query: str, deps: RagBackends, chosen: str, k: int) -> tuple[list[Evidence], str]:
    if chosen == "vector":
        return _retrieve_vector(query, deps, k), ""
    if chosen == "graph":
        return _retrieve_graph(query, deps, k), ""
    if chosen == "structured":
        return _retrieve_structured(query, deps, k)
    vector_hits = _retrieve_vector(query, deps, k)
    merged = list(vector_hits)
    seen = {ev.chunk_id for ev in merged}
    for ev in _retrieve_graph(query, deps, k):
        if ev.chunk_id not in seen:
            merged.append(ev)
            seen.add(ev.chunk_id)
    return merged[: 2 * k], ""


def _extractive_answer(
    relevant: Sequence[Evidence], summary: str, config: RagConfig
) -> GroundedAnswer:
    citations = []
    spans = []
    for i, ev in enumerate(relevant[: config.max_citations]):
        span = ev.text[: config.span_chars]
        citations.append(Citation(record_id=ev.record_id, chunk_id=ev.chunk_id, span=span))
        spans.append(f"[{i + 1}] {span}")
    head = summary + " " if summary else ""
    return GroundedAnswer(answer=head + " ".join(spans), citations=citations, insufficient=False)


REFUSAL_TEXT = "Insufficient evidence: no retrieved item was graded relevant to the query."


def answer(
    query: str,
    deps: RagBackends,
    config: RagConfig = RagConfig(),
    grader=None,
    router: Optional[Callable[[str], str]] = None,
) -> tuple[GroundedAnswer, QueryTrace]:
    """Run the full state machine for one query.

    Retries with a doubled k while no retrieved item grades relevant; after
    config.retries extra rounds it refuses with the insufficiency flag set.
    """
    grader = grader or LexicalGrader(config.gamma)
    chosen = router(query) if router is not None else route(query)
    if chosen not in ROUTES:
        chosen = route(query)
    trace = QueryTrace(
        query=query,
        route=chosen,
        providers={
            "embedder": getattr(deps.provider, "name", "unknown"),
            "grader": getattr(grader, "name", "unknown"),
            "synthesizer": "extractive",
        },
        started=time.time(),
    )
    try:
        k = config.k
        relevant: list[Evidence] = []
        summary = ""
        for attempt in range(config.retries + 1):
            trace.attempts = attempt + 1
            items, summary = _retrieve(query, deps, chosen, k)
            for ev in items:
                grade = grader.grade(query, ev.text)
                row = ev.as_dict()
                row["grade"] = grade
                trace.retrieved.append(row)
                if grade == "relevant":
                    relevant.append(ev)
            if relevant:
                break
            k *= 2
        if relevant:
            grounded = _extractive_answer(relevant, summary, config)
        else:
            grounded = GroundedAnswer(answer=REFUSAL_TEXT, citations=[], insufficient=True)
        trace.answer = grounded.as_dict()
        trace.finished = time.time()
        return grounded, trace
    except (GraderUnavailable, ConnectionError, OSError) as exc:
        trace.error = str(exc)
        trace.finished = time.time()
        failure = BackendDown(f"query pipeline failed: {exc}")
        failure.trace = trace  # partial progress for the caller to log
        raise failure from exc


# -- audit log ------------------------------------------------------------


class AuditLog:
    """Append-only log, one length-prefixed JSON record per line.

    Sequence numbers increase by one per append. Opening a log with a torn
    tail (crash mid-write) trims it back to the last complete record.
    """

    def __init__(self, path: str) -> None:
        self.path = path
        records, good_bytes = self.scan(path)
        actual = os.path.getsize(path) if os.path.exists(path) else 0
        if actual > good_bytes:
            with open(path, "rb+") as fh:
                fh.truncate(good_bytes)
        self._next_seq = (records[-1]["seq"] + 1) if records else 0

    @staticmethod
    def scan(path: str) -> tuple[list[dict], int]:
        """All complete records plus the byte offset where they end."""
        if not os.path.exists(path):
            return [], 0
        with open(path, "rb") as fh:
            data = fh.read()
        records: list[dict] = []
        offset = 0
        while offset < len(data):
            space = data.find(b" ", offset)
            if space == -1:
                break
            prefix = data[offset:space]
            if not prefix.isdigit():
                break
            length = int(prefix)
            start = space + 1
            end = start + length
            if end + 1 > len(data) or data[end : end + 1] != b"\n":
                break
            try:
                record = json.loads(data[start:end].decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                break
            if not isinstance(record, dict) or "seq" not in record:
                break
            records.append(record)
            offset = end + 1
        return records, offset

    def append(self, kind: str, payload: dict) -> dict:
        record = {
            "seq": self._next_seq,
            "ts": time.time(),
            "kind": kind,
            "payload": payload,
        }
        line = json.dumps(record, sort_keys=True, ensure_ascii=False).encode("utf-8")
        frame = str(len(line)).encode("ascii") + b" " + line + b"\n"
        try:
            with open(self.path, "ab") as fh:
                fh.write(frame)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            if exc.errno == 28:  # ENOSPC
                raise StorageFull(f"audit log write failed: {exc}") from exc
            raise
        self._next_seq += 1
        return record

    def entries(self, limit: Optional[int] = None, kind: Optional[str] = None) -> list[dict]:
        records, _ = self.scan(self.path)
        if kind is not None:
            records = [r for r in records if r.get("kind") == kind]
        if limit is not None:
            records = records[-limit:]
        return records


def log_interaction(log: AuditLog, trace: QueryTrace) -> dict:
    return log.append("query", trace.as_dict())
