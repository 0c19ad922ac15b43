"""Central orchestrator: owns all stores and runs the update pipeline.

Writes are serialized under one lock and land via a single reference swap:
mutations build a cloned state and publish it whole, so a reader holding
the previous state object never observes a half-applied update.

A record flows through dedupe, chunk embedding, sentence screening, design
classification, graph wiring, and (once a topic model is fitted) topic
assignment. `rebuild_derived` recomputes all of that from the stored
records and the current model; incremental updates must land on exactly
the same state, which is what the update-equivalence tests check.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import os
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .. import ragflow
from ..corpus import ParseResult, Reject, StudyRecord, normalize_title, parse_records, serialize_records
from ..designclf import DesignLabel, classify_design, path_to_leaf
from ..embedkit import Chunk, HashedLocalProvider, RemoteProvider, VectorIndex, chunk_document
from ..errors import (
    BadWindowParams,
    DecisionConflict,
    EmptyAbstract,
    NotInitialized,
    UnknownEntity,
)
from ..graphcore import PropertyGraph, entity_id
from ..ragflow import AuditLog, RagBackends, RagConfig
from ..screener import CueTagger, ModelTagger, PicosAssessment, SequenceModel, assess_compliance
from ..topicmill import (
    OUTLIER_TOPIC,
    RedundancyAlert,
    TopicModel,
    TrendMatrix,
    fit_topics,
    redundancy_alerts,
    refresh_terms,
    trends,
)
from .config import Config

SNAPSHOT_FILES = {
    "records": "records.jsonl",
    "model": "topic_model.json",
    "decisions": "decisions.json",
    "designs": "design_history.json",
}


def _now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


@dataclass
class ChangeReport:
    ingested: int = 0
    duplicates: int = 0
    rejects: list[dict] = field(default_factory=list)
    newly_compliant: int = 0
    topic_deltas: dict[str, int] = field(default_factory=dict)
    new_alerts: list[dict] = field(default_factory=list)
    refit_triggered: bool = False
    outlier_fraction: float = 0.0
    timestamp: str = ""

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class EngineState:
    records: dict[str, StudyRecord] = field(default_factory=dict)
    title_keys: dict[str, str] = field(default_factory=dict)
    chunks: dict[str, Chunk] = field(default_factory=dict)
    index: Optional[VectorIndex] = None
    record_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    screening: dict[str, PicosAssessment] = field(default_factory=dict)
    designs: dict[str, DesignLabel] = field(default_factory=dict)
    design_history: dict[str, list[dict]] = field(default_factory=dict)
    decisions: dict[str, dict] = field(default_factory=dict)
    model: Optional[TopicModel] = None
    graph: PropertyGraph = field(default_factory=PropertyGraph)
    pending_refit: bool = False

    def clone(self) -> "EngineState":
        model = None
        if self.model is not None:
            model = dataclasses.replace(
                self.model,
                assignments=dict(self.model.assignments),
                term_weights=dict(self.model.term_weights),
                labels=dict(self.model.labels),
            )
        return EngineState(
            records=dict(self.records),
            title_keys=dict(self.title_keys),
            chunks=dict(self.chunks),
            index=self.index.clone() if self.index is not None else None,
            record_vectors=dict(self.record_vectors),
            screening=dict(self.screening),
            designs=dict(self.designs),
            design_history={k: list(v) for k, v in self.design_history.items()},
            decisions=dict(self.decisions),
            model=model,
            graph=self.graph.clone(),
            pending_refit=self.pending_refit,
        )


class Engine:
    def __init__(self, config: Config) -> None:
        self.config = config
        self._write_lock = threading.RLock()
        self._state = EngineState(index=VectorIndex(config.embedding.dims))
        self.provider = self._make_provider()
        self.tagger = self._make_tagger()
        os.makedirs(config.storage.dir, exist_ok=True)
        self.audit = AuditLog(os.path.join(config.storage.dir, config.storage.audit_file))

    # -- wiring ----------------------------------------------------------

    def _make_provider(self):
        e = self.config.embedding
        if e.provider == "remote":
            return RemoteProvider(url=e.url, dims=e.dims, timeout=e.timeout)
        return HashedLocalProvider(dims=e.dims)

    def _make_tagger(self):
        s = self.config.screener
        if s.provider == "model":
            return ModelTagger(SequenceModel.load(s.model_path))
        return CueTagger()

    @property
    def state(self) -> EngineState:
        return self._state

    # -- record pipeline --------------------------------------------------

    def _screen(self, record: StudyRecord) -> PicosAssessment:
        try:
            tags = self.tagger.tag(record.text())
        except EmptyAbstract:
            tags = []
        if not tags:
            return assess_compliance(
                [], rubric_mode=self.config.screener.rubric_mode, theta=self.config.screener.theta
            )
        return assess_compliance(
            tags,
            rubric_mode=self.config.screener.rubric_mode,
            theta=self.config.screener.theta,
        )

    def _wire_record_into_graph(
        self, graph: PropertyGraph, record: StudyRecord, design: DesignLabel
    ) -> None:
        study = graph.upsert_entity(
            "study", record.id, {"record_id": record.id, "title": record.title}
        )
        for name in record.interventions:
            target = graph.upsert_entity("intervention", name)
            graph.upsert_edge(study, target, "evaluates")
        for name in record.outcomes:
            target = graph.upsert_entity("outcome", name)
            graph.upsert_edge(study, target, "reports")
        for name in record.authors:
            target = graph.upsert_entity("author", name)
            graph.upsert_edge(study, target, "authored_by")
        if record.venue:
            target = graph.upsert_entity("venue", record.venue)
            graph.upsert_edge(study, target, "published_in")
        target = graph.upsert_entity("design", design.leaf)
        graph.upsert_edge(study, target, "has_design")

    def _wire_topic_edge(self, graph: PropertyGraph, record_id: str, topic: int, label: str) -> None:
        study = entity_id("study", record_id)
        node = graph.upsert_entity("topic", str(topic), {"label": label})
        graph.upsert_edge(study, node, "assigned_topic")

    def _refresh_topic_labels(self, state: EngineState) -> None:
        """Recompute term rankings/labels and push them onto topic nodes."""
        assert state.model is not None
        texts = {rid: rec.text() for rid, rec in state.records.items()}
        refresh_terms(state.model, texts, top_k=self.config.topics.top_k_terms)
        for topic, label in state.model.labels.items():
            node = entity_id("topic", str(topic))
            if state.graph.has_entity(node):
                state.graph.upsert_entity("topic", str(topic), {"label": label})

    def _add_record(self, state: EngineState, record: StudyRecord) -> bool:
        """Full pipeline for one record; False when it is a duplicate."""
        title_key = normalize_title(record.title)
        if record.id in state.records or title_key in state.title_keys:
            return False
        record.validate()
        state.records[record.id] = record
        state.title_keys[title_key] = record.id
        for chunk in chunk_document(
            record,
            max_tokens=self.config.chunking.max_tokens,
            overlap=self.config.chunking.overlap,
        ):
            state.chunks[chunk.chunk_id] = chunk
            state.index.add(chunk.chunk_id, self.provider.embed(chunk.text))
        state.record_vectors[record.id] = self.provider.embed(record.text())
        state.screening[record.id] = self._screen(record)
        design = classify_design(record)
        state.designs[record.id] = design
        state.design_history.setdefault(record.id, []).append(
            {"provider": design.provider, "leaf": design.leaf, "ts": _now_iso()}
        )
        self._wire_record_into_graph(state.graph, record, design)
        if state.model is not None:
            topic = state.model.assign(state.record_vectors[record.id])
            state.model.assignments[record.id] = topic
            label = state.model.labels.get(topic, str(topic))
            self._wire_topic_edge(state.graph, record.id, topic, label)
        return True

    @staticmethod
    def _coerce_records(
        records: Optional[Sequence[dict | StudyRecord]] = None,
        payload: Optional[str] = None,
        format: str = "jsonl",
    ) -> ParseResult:
        if payload is not None:
            return parse_records(payload, format)
        rows: list[StudyRecord] = []
        rejects: list[Reject] = []
        for i, item in enumerate(records or []):
            if isinstance(item, StudyRecord):
                rows.append(item)
                continue
            try:
                parsed = parse_records(json.dumps(item, ensure_ascii=False), "jsonl")
                rows.extend(parsed.records)
                rejects.extend(parsed.rejects)
            except Exception as exc:  # record-level, keep going
                rejects.append(Reject(location=f"record {i}", reason=str(exc)))
        return ParseResult(rows, rejects)

    # -- public operations --------------------------------------------------

    def ingest(
        self,
        records: Optional[Sequence[dict | StudyRecord]] = None,
        payload: Optional[str] = None,
        format: str = "jsonl",
    ) -> dict:
        parsed = self._coerce_records(records, payload, format)
        with self._write_lock:
            state = self._state.clone()
            ingested = 0
            duplicates = 0
            for record in parsed.records:
                if self._add_record(state, record):
                    ingested += 1
                else:
                    duplicates += 1
            if state.model is not None and ingested:
                self._refresh_topic_labels(state)
            self._state = state
        report = {
            "ingested": ingested,
            "duplicates": duplicates,
            "rejects": [r.as_dict() for r in parsed.rejects],
        }
        self.audit.append("ingest", report)
        return report

    def fit(self, seed: Optional[int] = None, n_topics: Optional[int] = None) -> dict:
        cfg = self.config.topics
        with self._write_lock:
            state = self._state.clone()
            items = [
                (rid, state.records[rid].text(), state.record_vectors[rid])
                for rid in state.records
            ]
            state.model = fit_topics(
                items,
                seed=seed if seed is not None else cfg.seed,
                n_topics=n_topics if n_topics is not None else cfg.n_topics,
                tau=cfg.tau,
                min_cluster_size=cfg.min_cluster_size,
                top_k_terms=cfg.top_k_terms,
            )
            self._rebuild_graph(state)
            state.pending_refit = False
            self._state = state
            summary = {
                "records": len(state.records),
                "topics": int(state.model.centroids.shape[0]),
                "outliers": sum(
                    1 for t in state.model.assignments.values() if t == OUTLIER_TOPIC
                ),
                "seed": state.model.seed,
            }
        self.audit.append("fit", summary)
        return summary

    def _rebuild_graph(self, state: EngineState) -> None:
        graph = PropertyGraph()
        for rid in state.records:
            self._wire_record_into_graph(graph, state.records[rid], state.designs[rid])
        state.graph = graph
        if state.model is not None:
            texts = {rid: rec.text() for rid, rec in state.records.items()}
            refresh_terms(state.model, texts, top_k=self.config.topics.top_k_terms)
            for rid in state.records:
                topic = state.model.assignments.get(rid)
                if topic is None:
                    continue
                label = state.model.labels.get(topic, str(topic))
                self._wire_topic_edge(graph, rid, topic, label)

    def rebuild_derived(self) -> dict:
        """Recompute every derived structure from records + current model."""
        with self._write_lock:
            state = self._state.clone()
            if state.model is None:
                raise NotInitialized("no fitted topic model; run fit first")
            state.model.assignments = {
                rid: state.model.assign(state.record_vectors[rid]) for rid in state.records
            }
            state.screening = {rid: self._screen(rec) for rid, rec in state.records.items()}
            state.designs = {rid: classify_design(rec) for rid, rec in state.records.items()}
            self._reapply_overrides(state)
            self._rebuild_graph(state)
            self._state = state
            summary = {"records": len(state.records), "rebuilt": True}
        self.audit.append("rebuild", summary)
        return summary

    def living_update(
        self,
        records: Optional[Sequence[dict | StudyRecord]] = None,
        payload: Optional[str] = None,
        format: str = "jsonl",
    ) -> ChangeReport:
        parsed = self._coerce_records(records, payload, format)
        with self._write_lock:
            if self._state.model is None:
                raise NotInitialized("living update needs a fitted topic model")
            state = self._state.clone()
            before_alerts = {a.topic_id for a in self._alerts(state)}
            report = ChangeReport(timestamp=_now_iso())
            report.rejects = [r.as_dict() for r in parsed.rejects]
            for record in parsed.records:
                if not self._add_record(state, record):
                    report.duplicates += 1
                    continue
                report.ingested += 1
                if state.screening[record.id].compliant:
                    report.newly_compliant += 1
                topic = state.model.assignments[record.id]
                key = str(topic)
                report.topic_deltas[key] = report.topic_deltas.get(key, 0) + 1
            if report.ingested:
                self._refresh_topic_labels(state)
            report.outlier_fraction = state.model.outlier_fraction()
            report.refit_triggered = (
                report.outlier_fraction > self.config.update.refit_outlier_fraction
            )
            if report.refit_triggered:
                state.pending_refit = True
            after_alerts = self._alerts(state)
            report.new_alerts = [
                a.as_dict() for a in after_alerts if a.topic_id not in before_alerts
            ]
            self._state = state
        self.audit.append("update", report.as_dict())
        return report

    # -- read operations -----------------------------------------------------

    def _alerts(self, state: EngineState) -> list[RedundancyAlert]:
        if state.model is None:
            return []
        years = {rid: rec.year for rid, rec in state.records.items()}
        return redundancy_alerts(
            state.model,
            state.record_vectors,
            years,
            rho=self.config.alerts.rho,
            min_recent=self.config.alerts.min_recent,
            window_years=self.config.alerts.window_years,
        )

    def records_page(self, limit: int = 50, offset: int = 0) -> dict:
        state = self._state
        ids = list(state.records)
        page = ids[offset : offset + limit]
        return {
            "total": len(ids),
            "records": [state.records[rid].as_dict() for rid in page],
        }

    def screening_view(self, record_id: str) -> dict:
        state = self._state
        if record_id not in state.records:
            raise UnknownEntity(f"record {record_id!r} not found")
        model = state.model
        topic = model.assignments.get(record_id) if model is not None else None
        return {
            "record_id": record_id,
            "assessment": state.screening[record_id].as_dict(),
            "design": state.designs[record_id].as_dict(),
            "design_history": list(state.design_history.get(record_id, [])),
            "decision": state.decisions.get(record_id),
            "topic": topic,
        }

    def submit_decision(self, record_id: str, body: dict) -> dict:
        action = body.get("action")
        if action not in ("accepted", "overridden"):
            raise ValueError("action must be 'accepted' or 'overridden'")
        override = body.get("override") or {}
        if action == "overridden" and not override:
            raise ValueError("overridden decisions need an override payload")
        reviewer = str(body.get("reviewer", "reviewer"))
        with self._write_lock:
            state = self._state.clone()
            if record_id not in state.records:
                raise UnknownEntity(f"record {record_id!r} not found")
            if record_id in state.decisions:
                raise DecisionConflict(f"record {record_id!r} already has a decision")
            decision = {
                "action": action,
                "override": override or None,
                "reviewer": reviewer,
                "ts": _now_iso(),
            }
            state.decisions[record_id] = decision
            new_leaf = override.get("design")
            if action == "overridden" and new_leaf:
                self._apply_design_override(
                    state, record_id, new_leaf, override.get("setting"), reviewer
                )
                state.design_history.setdefault(record_id, []).append(
                    {"provider": "reviewer", "leaf": new_leaf, "ts": decision["ts"]}
                )
            self._state = state
        self.audit.append(
            "decision",
            {"record_id": record_id, "action": action, "override": override or None, "reviewer": reviewer},
        )
        return {"record_id": record_id, "decision": decision}

    def _apply_design_override(
        self,
        state: EngineState,
        record_id: str,
        leaf: str,
        setting: Optional[str],
        reviewer: str,
    ) -> None:
        """Replace a record's design label and rewire its graph edge."""
        old = state.designs[record_id]
        if leaf == old.leaf:
            return
        verdicts = {name: ("YES" if name == leaf else "NO") for name in old.verdicts}
        state.designs[record_id] = DesignLabel(
            path=tuple(path_to_leaf(leaf)),
            verdicts=verdicts,
            setting=setting or old.setting,
            rationale=f"reviewer override by {reviewer}",
            provider="reviewer",
        )
        study = entity_id("study", record_id)
        old_node = entity_id("design", old.leaf)
        if state.graph.has_entity(study):
            try:
                state.graph.delete_edge(study, old_node, "has_design")
            except UnknownEntity:
                pass
            new_node = state.graph.upsert_entity("design", leaf)
            state.graph.upsert_edge(study, new_node, "has_design")

    def _reapply_overrides(self, state: EngineState) -> None:
        """Reviewer overrides outrank the rules; re-impose them after a rebuild."""
        for record_id, decision in state.decisions.items():
            if decision.get("action") != "overridden":
                continue
            override = decision.get("override") or {}
            leaf = override.get("design")
            if leaf and record_id in state.designs:
                self._apply_design_override(
                    state,
                    record_id,
                    leaf,
                    override.get("setting"),
                    str(decision.get("reviewer", "reviewer")),
                )

    def topics_view(self) -> dict:
        state = self._state
        if state.model is None:
            return {"fitted": False, "topics": []}
        sizes = state.model.sizes()
        rows = []
        for topic in sorted(set(state.model.assignments.values()) | set(state.model.labels)):
            rows.append(
                {
                    "id": topic,
                    "label": state.model.labels.get(topic, str(topic)),
                    "size": sizes.get(topic, 0),
                    "terms": [
                        [term, weight]
                        for term, weight in state.model.term_weights.get(topic, [])
                    ],
                }
            )
        return {"fitted": True, "pending_refit": state.pending_refit, "topics": rows}

    def topic_terms(self, topic_id: int, n: int = 10) -> dict:
        state = self._state
        if state.model is None:
            raise NotInitialized("no fitted topic model")
        terms = state.model.top_terms(topic_id, n)
        return {
            "topic": topic_id,
            "label": state.model.labels.get(topic_id, str(topic_id)),
            "terms": [[term, weight] for term, weight in terms],
        }

    def trends_view(
        self, start: Optional[int] = None, end: Optional[int] = None
    ) -> dict:
        state = self._state
        if state.model is None:
            raise NotInitialized("no fitted topic model")
        if (start is None) != (end is None):
            raise BadWindowParams("start and end must be given together")
        if start is not None and start > end:
            raise BadWindowParams(f"start {start} is after end {end}")
        years = {rid: rec.year for rid, rec in state.records.items()}
        year_range = (start, end) if start is not None else None
        matrix = trends(state.model.assignments, years, year_range)
        payload = matrix.as_dict()
        payload["shares"] = matrix.shares()
        payload["labels"] = {
            str(t): state.model.labels.get(t, str(t)) for t in matrix.topic_ids
        }
        payload["alerts"] = [a.as_dict() for a in self._alerts(state)]
        return payload

    def query(self, question: str, k: Optional[int] = None) -> dict:
        state = self._state
        cfg = self.config.retrieval
        rag_config = RagConfig(
            k=k if k is not None else cfg.k,
            retries=cfg.retries,
            gamma=cfg.gamma,
            max_citations=cfg.max_citations,
        )
        deps = RagBackends(
            provider=self.provider,
            index=state.index,
            chunks=state.chunks,
            records=state.records,
            graph=state.graph,
            designs=state.designs,
        )
        try:
            grounded, trace = ragflow.answer(question, deps, rag_config)
        except ragflow.BackendDown as exc:
            trace = getattr(exc, "trace", None)
            if trace is not None:
                ragflow.log_interaction(self.audit, trace)
            raise
        ragflow.log_interaction(self.audit, trace)
        return {
            "answer": grounded.answer,
            "citations": [c.as_dict() for c in grounded.citations],
            "insufficient": grounded.insufficient,
            "route": trace.route,
            "attempts": trace.attempts,
        }

    def graph_query(self, body: dict) -> dict:
        state = self._state
        op = body.get("op")
        if op == "neighbors":
            rows = state.graph.neighbors(
                body["entity"],
                relation=body.get("relation"),
                direction=body.get("direction", "both"),
            )
            return {
                "entities": [
                    {"id": e.id, "kind": e.kind, "name": e.name, "properties": e.properties}
                    for e in rows
                ]
            }
        if op == "co_occurrence":
            pairs = state.graph.co_occurrence(
                body["kind_a"], body["kind_b"], via=body.get("via", "study")
            )
            return {"pairs": [[a, b, n] for a, b, n in pairs]}
        if op == "path":
            paths = state.graph.path_query(
                body["from"], body["to"], max_hops=int(body.get("max_hops", 3))
            )
            return {
                "paths": [
                    {"entities": list(p.entity_ids), "edges": [list(e) for e in p.edges]}
                    for p in paths
                ]
            }
        raise ValueError(f"unknown graph op {op!r}")

    def metrics_view(self) -> dict:
        state = self._state
        compliant = sum(1 for a in state.screening.values() if a.compliant)
        decisions = {"accepted": 0, "overridden": 0}
        for d in state.decisions.values():
            decisions[d["action"]] = decisions.get(d["action"], 0) + 1
        return {
            "records": len(state.records),
            "chunks": len(state.chunks),
            "index_size": len(state.index) if state.index is not None else 0,
            "topics": int(state.model.centroids.shape[0]) if state.model else 0,
            "fitted": state.model is not None,
            "outlier_fraction": state.model.outlier_fraction() if state.model else None,
            "pending_refit": state.pending_refit,
            "compliant": compliant,
            "non_compliant": len(state.screening) - compliant,
            "decisions": decisions,
            "audit_entries": len(self.audit.entries()),
        }

    def audit_view(self, limit: Optional[int] = None, kind: Optional[str] = None) -> dict:
        return {"entries": self.audit.entries(limit=limit, kind=kind)}

    def health(self) -> dict:
        state = self._state
        return {
            "status": "ok",
            "modules": {
                "corpus": True,
                "index": state.index is not None,
                "screener": self.tagger.name,
                "topics": state.model is not None,
                "graph": True,
                "audit": os.path.exists(self.audit.path),
            },
            "records": len(state.records),
        }

    # -- persistence -----------------------------------------------------------

    def save_snapshot(self) -> None:
        base = self.config.storage.dir
        os.makedirs(base, exist_ok=True)
        state = self._state
        files = {
            SNAPSHOT_FILES["records"]: serialize_records(state.records.values()),
            SNAPSHOT_FILES["decisions"]: _json_dumps(state.decisions),
            SNAPSHOT_FILES["designs"]: _json_dumps(state.design_history),
        }
        if state.model is not None:
            files[SNAPSHOT_FILES["model"]] = state.model.to_json()
        for name, content in files.items():
            path = os.path.join(base, name)
            tmp = path + ".tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(content)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)

    @classmethod
    def load(cls, config: Config) -> "Engine":
        """Restore an engine from a snapshot directory.

        Records are replayed through the normal pipeline (screening, designs
        and the graph come back deterministically); the topic model, review
        decisions and design history are restored from their files, then
        reviewer overrides are re-imposed on top of the recomputed designs.
        """
        engine = cls(config)
        base = config.storage.dir
        payload = _read_text(os.path.join(base, SNAPSHOT_FILES["records"]))
        if payload:
            engine.ingest(payload=payload, format="jsonl")
        model_text = _read_text(os.path.join(base, SNAPSHOT_FILES["model"]))
        decisions_text = _read_text(os.path.join(base, SNAPSHOT_FILES["decisions"]))
        history_text = _read_text(os.path.join(base, SNAPSHOT_FILES["designs"]))
        with engine._write_lock:
            state = engine._state.clone()
            if model_text:
                state.model = TopicModel.from_json(model_text)
            if decisions_text:
                state.decisions = json.loads(decisions_text)
            if history_text:
                state.design_history = json.loads(history_text)
            engine._reapply_overrides(state)
            if state.model is not None:
                engine._rebuild_graph(state)
            engine._state = state
        return engine


def _read_text(path: str) -> Optional[str]:
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2)
