"""In-process property graph of studies, interventions, outcomes, authors,
venues, topics, and designs.

Entity identity is (kind, normalized name); ids are derived from that key
so two graphs built from the same content in any insertion order export
identically. Queries run under the graph lock and therefore always see a
consistent snapshot.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import UnknownEndpoint, UnknownEntity

KINDS = ("study", "intervention", "outcome", "author", "venue", "topic", "design")
RELATIONS = (
    "evaluates",
    "reports",
    "authored_by",
    "published_in",
    "assigned_topic",
    "has_design",
)

MAX_HOPS_CAP = 4


def normalize_name(name: str) -> str:
    return " ".join(str(name).lower().split())


def entity_id(kind: str, name: str) -> str:
    return f"{kind}:{normalize_name(name)}"


@dataclass
class GraphEntity:
    id: str
    kind: str
    name: str
    properties: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GraphEdge:
    from_id: str
    to_id: str
    relation: str
    properties: tuple = ()

    def key(self) -> tuple[str, str, str]:
        return (self.from_id, self.to_id, self.relation)


@dataclass(frozen=True)
class Path:
    entity_ids: tuple[str, ...]
    edges: tuple[tuple[str, str, str], ...]  # (from, to, relation) as stored


class PropertyGraph:
    def __init__(self) -> None:
        self._entities: dict[str, GraphEntity] = {}
        self._edges: dict[tuple[str, str, str], GraphEdge] = {}
        self._out: dict[str, set[tuple[str, str]]] = {}  # id -> {(relation, to)}
        self._in: dict[str, set[tuple[str, str]]] = {}  # id -> {(relation, from)}
        self._lock = threading.RLock()

    # -- mutation -------------------------------------------------------

    def upsert_entity(self, kind: str, name: str, properties: Optional[dict] = None) -> str:
        if kind not in KINDS:
            raise ValueError(f"unknown entity kind {kind!r}")
        eid = entity_id(kind, name)
        with self._lock:
            existing = self._entities.get(eid)
            if existing is None:
                self._entities[eid] = GraphEntity(
                    id=eid, kind=kind, name=name, properties=dict(properties or {})
                )
                self._out[eid] = set()
                self._in[eid] = set()
            elif properties:
                existing.properties.update(properties)
        return eid

    def upsert_edge(
        self, from_id: str, to_id: str, relation: str, properties: Optional[dict] = None
    ) -> tuple[str, str, str]:
        if relation not in RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        with self._lock:
            if from_id not in self._entities or to_id not in self._entities:
                missing = from_id if from_id not in self._entities else to_id
                raise UnknownEndpoint(f"edge endpoint {missing!r} does not exist")
            key = (from_id, to_id, relation)
            if key not in self._edges:
                self._edges[key] = GraphEdge(
                    from_id=from_id,
                    to_id=to_id,
                    relation=relation,
                    properties=tuple(sorted((properties or {}).items())),
                )
                self._out[from_id].add((relation, to_id))
                self._in[to_id].add((relation, from_id))
            return key

    def delete_edge(self, from_id: str, to_id: str, relation: str) -> None:
        with self._lock:
            key = (from_id, to_id, relation)
            if key not in self._edges:
                raise UnknownEntity(f"edge {key!r} does not exist")
            self._out[from_id].discard((relation, to_id))
            self._in[to_id].discard((relation, from_id))
            del self._edges[key]

    def delete_entity(self, eid: str) -> None:
        """Remove an entity and every incident edge."""
        with self._lock:
            if eid not in self._entities:
                raise UnknownEntity(f"entity {eid!r} does not exist")
            incident = [k for k in self._edges if k[0] == eid or k[1] == eid]
            for key in incident:
                from_id, to_id, relation = key
                self._out[from_id].discard((relation, to_id))
                self._in[to_id].discard((relation, from_id))
                del self._edges[key]
            del self._entities[eid]
            del self._out[eid]
            del self._in[eid]

    def clear(self) -> None:
        with self._lock:
            self._entities.clear()
            self._edges.clear()
            self._out.clear()
            self._in.clear()

    def clone(self) -> "PropertyGraph":
        other = PropertyGraph()
        with self._lock:
            for eid, ent in self._entities.items():
                other._entities[eid] = GraphEntity(
                    id=ent.id, kind=ent.kind, name=ent.name, properties=dict(ent.properties)
                )
            other._edges = dict(self._edges)
            other._out = {eid: set(adj) for eid, adj in self._out.items()}
            other._in = {eid: set(adj) for eid, adj in self._in.items()}
        return other

    # -- lookup ---------------------------------------------------------

    def entity(self, eid: str) -> GraphEntity:
        ent = self._entities.get(eid)
        if ent is None:
            raise UnknownEntity(f"entity {eid!r} does not exist")
        return ent

    def has_entity(self, eid: str) -> bool:
        return eid in self._entities

    def entities(self, kind: Optional[str] = None) -> list[GraphEntity]:
        with self._lock:
            rows = list(self._entities.values())
        if kind is not None:
            rows = [e for e in rows if e.kind == kind]
        return sorted(rows, key=lambda e: e.id)

    def edge_count(self) -> int:
        return len(self._edges)

    def edges(self) -> list[GraphEdge]:
        with self._lock:
            return sorted(self._edges.values(), key=lambda e: e.key())

    # -- queries --------------------------------------------------------

    def neighbors(
        self, eid: str, relation: Optional[str] = None, direction: str = "out"
    ) -> list[GraphEntity]:
        """Adjacent entities under relation/direction, stable order by id."""
        if direction not in ("out", "in", "both"):
            raise ValueError(f"direction must be out/in/both, got {direction!r}")
        with self._lock:
            if eid not in self._entities:
                raise UnknownEntity(f"entity {eid!r} does not exist")
            found: set[str] = set()
            if direction in ("out", "both"):
                for rel, to_id in self._out[eid]:
                    if relation is None or rel == relation:
                        found.add(to_id)
            if direction in ("in", "both"):
                for rel, from_id in self._in[eid]:
                    if relation is None or rel == relation:
                        found.add(from_id)
            return [self._entities[i] for i in sorted(found)]

    def co_occurrence(
        self, kind_a: str, kind_b: str, via: str = "study"
    ) -> list[tuple[str, str, int]]:
        """Pairs of kind_a/kind_b entities sharing a common via-kind node,
        with shared counts, sorted by count desc then ids."""
        counts: dict[tuple[str, str], int] = {}
        with self._lock:
            hubs = [e.id for e in self._entities.values() if e.kind == via]
            for hub in hubs:
                attached = {to for _, to in self._out[hub]} | {f for _, f in self._in[hub]}
                side_a = sorted(
                    i for i in attached if self._entities[i].kind == kind_a and i != hub
                )
                side_b = sorted(
                    i for i in attached if self._entities[i].kind == kind_b and i != hub
                )
                if kind_a == kind_b:
                    for i, a in enumerate(side_a):
                        for b in side_a[i + 1 :]:
                            counts[(a, b)] = counts.get((a, b), 0) + 1
                else:
                    for a in side_a:
                        for b in side_b:
                            counts[(a, b)] = counts.get((a, b), 0) + 1
        rows = [(a, b, n) for (a, b), n in counts.items()]
        rows.sort(key=lambda row: (-row[2], row[0], row[1]))
        return rows

    def path_query(self, from_id: str, to_id: str, max_hops: int) -> list[Path]:
        """All simple paths up to max_hops, edges walkable in either
        direction, deterministic order by (length, node sequence)."""
        if max_hops > MAX_HOPS_CAP:
            raise ValueError(f"max_hops {max_hops} exceeds cap {MAX_HOPS_CAP}")
        with self._lock:
            for eid in (from_id, to_id):
                if eid not in self._entities:
                    raise UnknownEntity(f"entity {eid!r} does not exist")
            if from_id == to_id:
                return []
            paths: list[Path] = []

            def step(node: str, visited: list[str], edges: list[tuple[str, str, str]]):
                if len(edges) >= max_hops:
                    return
                hops: list[tuple[str, tuple[str, str, str]]] = []
                for rel, nxt in self._out[node]:
                    hops.append((nxt, (node, nxt, rel)))
                for rel, prev in self._in[node]:
                    hops.append((prev, (prev, node, rel)))
                for nxt, edge in sorted(hops, key=lambda h: (h[0], h[1])):
                    if nxt in visited:
                        continue
                    if nxt == to_id:
                        paths.append(
                            Path(
                                entity_ids=tuple(visited + [nxt]),
                                edges=tuple(edges + [edge]),
                            )
                        )
                        continue
                    step(nxt, visited + [nxt], edges + [edge])

            step(from_id, [from_id], [])
        unique = sorted(set(paths), key=lambda p: (len(p.edges), p.entity_ids, p.edges))
        return unique

    # -- persistence ----------------------------------------------------

    def to_jsonl(self) -> str:
        """One entity or edge per line, sorted, insertion-order independent."""
        lines = []
        for ent in self.entities():
            lines.append(
                json.dumps(
                    {
                        "type": "entity",
                        "id": ent.id,
                        "kind": ent.kind,
                        "name": ent.name,
                        "properties": ent.properties,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
        for edge in self.edges():
            lines.append(
                json.dumps(
                    {
                        "type": "edge",
                        "from": edge.from_id,
                        "to": edge.to_id,
                        "relation": edge.relation,
                        "properties": dict(edge.properties),
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str) -> "PropertyGraph":
        graph = cls()
        edges: list[dict] = []
        for line in text.splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            if row["type"] == "entity":
                eid = graph.upsert_entity(row["kind"], row["name"], row.get("properties"))
                if eid != row["id"]:
                    raise ValueError(f"entity id {row['id']!r} does not match content")
            else:
                edges.append(row)
        for row in edges:
            graph.upsert_edge(row["from"], row["to"], row["relation"], row.get("properties"))
        return graph
