"""Topic discovery over record embeddings.

Seeded centroid clustering with a cosine-distance cutoff: vectors farther
than tau from every centroid land in the outlier topic -1. Topic terms are
ranked by class-based TF-IDF over stemmed member tokens, and labels join
the top terms under the topic id. The fitted model is immutable; assigning
a new vector never mutates it.

Every stored assignment is produced by `TopicModel.assign` on one vector
at a time. Incremental updates and full rebuilds therefore agree bit for
bit with the assignments made at fit time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DimsMismatch, EmptyTopic, TooFewDocuments
from .stemming import term_tokens

OUTLIER_TOPIC = -1

DEFAULT_TAU = 0.6
DEFAULT_MIN_CLUSTER_SIZE = 3
DEFAULT_TOP_K_TERMS = 10
MAX_ITERATIONS = 100


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec.astype(np.float64)
    return vec.astype(np.float64) / norm


def assign_vector(vector: np.ndarray, centroids: np.ndarray, tau: float) -> int:
    """Nearest centroid by cosine if within distance tau, else -1.

    Single authoritative path for topic assignment: loops one centroid at a
    time so repeated calls on the same inputs are bit-identical regardless
    of how many vectors the caller is processing.
    """
    if centroids.shape[0] == 0:
        return OUTLIER_TOPIC
    v = _unit(np.asarray(vector, dtype=np.float64))
    best_idx = OUTLIER_TOPIC
    best_score = -2.0
    for idx in range(centroids.shape[0]):
        score = float(np.dot(centroids[idx], v))
        if score > best_score:
            best_score = score
            best_idx = idx
    if 1.0 - best_score > tau:
        return OUTLIER_TOPIC
    return best_idx


def ctfidf(
    counts_per_topic: Mapping[int, Mapping[str, int]], top_k: int = DEFAULT_TOP_K_TERMS
) -> dict[int, list[tuple[str, float]]]:
    """Class-based TF-IDF: W = tf * ln(1 + A / f_t).

    A is the mean token count per topic and f_t the term's total count over
    all topics. Rankings are descending by weight, ties broken by term.
    """
    if not counts_per_topic:
        raise EmptyTopic("no topics given")
    for topic_id, counts in counts_per_topic.items():
        if not counts:
            raise EmptyTopic(f"topic {topic_id} has no terms")
    corpus_freq: dict[str, int] = {}
    total_words = 0
    for counts in counts_per_topic.values():
        for term, count in counts.items():
            corpus_freq[term] = corpus_freq.get(term, 0) + count
            total_words += count
    avg_words = total_words / len(counts_per_topic)
    ranked: dict[int, list[tuple[str, float]]] = {}
    for topic_id, counts in counts_per_topic.items():
        weighted = [
            (term, count * math.log(1.0 + avg_words / corpus_freq[term]))
            for term, count in counts.items()
        ]
        weighted.sort(key=lambda item: (-item[1], item[0]))
        ranked[topic_id] = weighted[:top_k]
    return ranked


def label_topic(topic_id: int, top_terms: Sequence[str]) -> str:
    """"{id}_{t1}_{t2}_{t3}_{t4}" with up to the four strongest terms."""
    terms = list(top_terms[:4])
    return "_".join([str(topic_id)] + terms) if terms else str(topic_id)


@dataclass(frozen=True)
class RedundancyAlert:
    topic_id: int
    label: str
    member_count: int
    recent_count: int
    mean_similarity: float
    rule: str

    def as_dict(self) -> dict:
        return {
            "topic_id": self.topic_id,
            "label": self.label,
            "member_count": self.member_count,
            "recent_count": self.recent_count,
            "mean_similarity": self.mean_similarity,
            "rule": self.rule,
        }


@dataclass
class TrendMatrix:
    topic_ids: list[int]
    years: list[int]
    counts: list[list[int]]  # rows follow topic_ids, columns follow years
    undated: dict[int, int]

    def shares(self) -> list[list[float]]:
        """Per-year composition; each non-empty column sums to 1."""
        cols = len(self.years)
        rows = len(self.topic_ids)
        totals = [sum(self.counts[r][c] for r in range(rows)) for c in range(cols)]
        return [
            [
                (self.counts[r][c] / totals[c]) if totals[c] else 0.0
                for c in range(cols)
            ]
            for r in range(rows)
        ]

    def to_csv(self) -> str:
        header = "topic," + ",".join(str(y) for y in self.years)
        lines = [header]
        for r, topic_id in enumerate(self.topic_ids):
            lines.append(str(topic_id) + "," + ",".join(str(c) for c in self.counts[r]))
        return "\n".join(lines) + "\n"

    def to_long_jsonl(self) -> str:
        lines = []
        for r, topic_id in enumerate(self.topic_ids):
            for c, year in enumerate(self.years):
                lines.append(
                    json.dumps(
                        {"topic": topic_id, "year": year, "count": self.counts[r][c]},
                        sort_keys=True,
                    )
                )
        return "\n".join(lines) + ("\n" if lines else "")

    def as_dict(self) -> dict:
        return {
            "topics": self.topic_ids,
            "years": self.years,
            "counts": self.counts,
            "undated": {str(k): v for k, v in sorted(self.undated.items())},
        }


@dataclass
class TopicModel:
    dims: int
    tau: float
    min_cluster_size: int
    seed: int
    centroids: np.ndarray  # (k, dims), unit rows, row i = topic i
    assignments: dict[str, int] = field(default_factory=dict)
    term_weights: dict[int, list[tuple[str, float]]] = field(default_factory=dict)
    labels: dict[int, str] = field(default_factory=dict)

    def topic_ids(self) -> list[int]:
        ids = sorted(set(self.assignments.values()) | set(range(self.centroids.shape[0])))
        return ids

    def sizes(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for topic in self.assignments.values():
            out[topic] = out.get(topic, 0) + 1
        return out

    def assign(self, vector: np.ndarray) -> int:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dims,):
            raise DimsMismatch(f"expected dims {self.dims}, got {vec.shape}")
        return assign_vector(vec, self.centroids, self.tau)

    def outlier_fraction(self) -> float:
        if not self.assignments:
            return 0.0
        outliers = sum(1 for t in self.assignments.values() if t == OUTLIER_TOPIC)
        return outliers / len(self.assignments)

    def top_terms(self, topic_id: int, n: int = 10) -> list[tuple[str, float]]:
        if topic_id not in self.term_weights:
            raise EmptyTopic(f"topic {topic_id} has no terms")
        return self.term_weights[topic_id][:n]

    def to_json(self) -> str:
        payload = {
            "dims": self.dims,
            "tau": self.tau,
            "min_cluster_size": self.min_cluster_size,
            "seed": self.seed,
            "centroids": [[float(x) for x in row] for row in self.centroids],
            "assignments": self.assignments,
            "term_weights": {
                str(t): [[term, w] for term, w in rows]
                for t, rows in self.term_weights.items()
            },
            "labels": {str(t): lab for t, lab in self.labels.items()},
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "TopicModel":
        data = json.loads(text)
        centroids = np.array(data["centroids"], dtype=np.float64)
        if centroids.size == 0:
            centroids = np.zeros((0, data["dims"]), dtype=np.float64)
        return cls(
            dims=data["dims"],
            tau=data["tau"],
            min_cluster_size=data["min_cluster_size"],
            seed=data["seed"],
            centroids=centroids,
            assignments={k: int(v) for k, v in data["assignments"].items()},
            term_weights={
                int(t): [(term, float(w)) for term, w in rows]
                for t, rows in data["term_weights"].items()
            },
            labels={int(t): lab for t, lab in data["labels"].items()},
        )


def _default_n_topics(n: int) -> int:
    return max(1, min(n, int(round(math.sqrt(n / 2.0)))))


def _farthest_first(vectors: np.ndarray, k: int, seed: int) -> list[int]:
    n = vectors.shape[0]
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    min_dist = 1.0 - vectors @ vectors[chosen[0]]
    while len(chosen) < k:
        far = int(np.argmax(min_dist))
        if min_dist[far] <= 1e-12:
            break  # every remaining point coincides with a chosen seed
        chosen.append(far)
        min_dist = np.minimum(min_dist, 1.0 - vectors @ vectors[far])
    return chosen


def fit_topics(
    items: Sequence[tuple[str, str, np.ndarray]],
    *,
    seed: int,
    n_topics: Optional[int] = None,
    tau: float = DEFAULT_TAU,
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
    top_k_terms: int = DEFAULT_TOP_K_TERMS,
    max_iterations: int = MAX_ITERATIONS,
) -> TopicModel:
    """Cluster (id, text, vector) triples into a TopicModel.

    Deterministic for a fixed seed. Clusters smaller than min_cluster_size
    dissolve after the cutoff pass; their members fall to the surviving
    centroids or to -1. Surviving topics are renumbered largest-first.
    """
    if len(items) < max(min_cluster_size, 1):
        raise TooFewDocuments(
            f"need at least {max(min_cluster_size, 1)} documents, got {len(items)}"
        )
    ids = [item[0] for item in items]
    texts = {item[0]: item[1] for item in items}
    dims = int(np.asarray(items[0][2]).shape[0])
    vectors = np.stack([_unit(np.asarray(item[2], dtype=np.float64)) for item in items])
    if vectors.shape[1] != dims:
        raise DimsMismatch("inconsistent vector dims")

    k = n_topics if n_topics is not None else _default_n_topics(len(items))
    k = max(1, min(k, len(items)))
    centroid_rows = vectors[_farthest_first(vectors, k, seed)].copy()

    labels = np.zeros(len(items), dtype=np.int64)
    for _ in range(max_iterations):
        scores = vectors @ centroid_rows.T
        new_labels = np.argmax(scores, axis=1)  # argmax takes the lowest index on ties
        keep = []
        for idx in range(centroid_rows.shape[0]):
            members = vectors[new_labels == idx]
            if members.shape[0] == 0:
                continue
            mean = members.mean(axis=0)
            norm = float(np.linalg.norm(mean))
            if norm == 0.0:
                continue
            keep.append((idx, mean / norm))
        if len(keep) < centroid_rows.shape[0]:
            remap = {old: new for new, (old, _) in enumerate(keep)}
            centroid_rows = np.stack([row for _, row in keep])
            new_labels = np.array([remap[int(l)] for l in new_labels], dtype=np.int64)
            labels = new_labels
            continue
        centroid_rows = np.stack([row for _, row in keep])
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    # Authoritative pass: cutoff applied per vector, one at a time.
    raw = [assign_vector(vectors[i], centroid_rows, tau) for i in range(len(items))]

    sizes: dict[int, int] = {}
    for topic in raw:
        if topic != OUTLIER_TOPIC:
            sizes[topic] = sizes.get(topic, 0) + 1
    survivors = [idx for idx in range(centroid_rows.shape[0]) if sizes.get(idx, 0) >= min_cluster_size]
    if len(survivors) < centroid_rows.shape[0]:
        centroid_rows = (
            np.stack([centroid_rows[i] for i in survivors])
            if survivors
            else np.zeros((0, dims), dtype=np.float64)
        )
        raw = [assign_vector(vectors[i], centroid_rows, tau) for i in range(len(items))]
        sizes = {}
        for topic in raw:
            if topic != OUTLIER_TOPIC:
                sizes[topic] = sizes.get(topic, 0) + 1

    # Renumber by size, largest topic first; stable on ties.
    order = sorted(sizes, key=lambda t: (-sizes[t], t))
    renumber = {old: new for new, old in enumerate(order)}
    if order:
        centroid_rows = np.stack([centroid_rows[old] for old in order])
    assignments = {
        ids[i]: (renumber[raw[i]] if raw[i] != OUTLIER_TOPIC else OUTLIER_TOPIC)
        for i in range(len(items))
    }

    model = TopicModel(
        dims=dims,
        tau=tau,
        min_cluster_size=min_cluster_size,
        seed=seed,
        centroids=centroid_rows,
        assignments=assignments,
    )
    refresh_terms(model, texts, top_k=top_k_terms)
    return model


def topic_term_counts(
    assignments: Mapping[str, int], texts: Mapping[str, str]
) -> dict[int, dict[str, int]]:
    counts: dict[int, dict[str, int]] = {}
    for record_id, topic in assignments.items():
        text = texts.get(record_id, "")
        bucket = counts.setdefault(topic, {})
        for token in term_tokens(text, stem=True):
            bucket[token] = bucket.get(token, 0) + 1
    return counts


def refresh_terms(
    model: TopicModel, texts: Mapping[str, str], top_k: int = DEFAULT_TOP_K_TERMS
) -> None:
    """Recompute term rankings and labels from member texts."""
    counts = topic_term_counts(model.assignments, texts)
    nonempty = {t: c for t, c in counts.items() if c}
    model.term_weights = ctfidf(nonempty, top_k=top_k) if nonempty else {}
    model.labels = {}
    for topic in sorted(counts):
        terms = [term for term, _ in model.term_weights.get(topic, [])]
        model.labels[topic] = label_topic(topic, terms)


def trends(
    assignments: Mapping[str, int],
    years: Mapping[str, Optional[int]],
    year_range: Optional[tuple[int, int]] = None,
) -> TrendMatrix:
    """Topic-by-year count matrix; records without a year are tallied apart."""
    dated: dict[tuple[int, int], int] = {}
    undated: dict[int, int] = {}
    seen_years: set[int] = set()
    topics: set[int] = set()
    for record_id, topic in assignments.items():
        topics.add(topic)
        year = years.get(record_id)
        if year is None:
            undated[topic] = undated.get(topic, 0) + 1
            continue
        seen_years.add(year)
        dated[(topic, year)] = dated.get((topic, year), 0) + 1
    if year_range is not None:
        lo, hi = year_range
        year_list = list(range(lo, hi + 1))
    else:
        year_list = sorted(seen_years)
    topic_list = sorted(topics)
    counts = [
        [dated.get((topic, year), 0) for year in year_list] for topic in topic_list
    ]
    return TrendMatrix(topic_ids=topic_list, years=year_list, counts=counts, undated=undated)


def redundancy_alerts(
    model: TopicModel,
    vectors: Mapping[str, np.ndarray],
    years: Mapping[str, Optional[int]],
    *,
    rho: float = 0.8,
    min_recent: int = 5,
    window_years: int = 3,
    as_of_year: Optional[int] = None,
) -> list[RedundancyAlert]:
    """Flag tight topics with a burst of recent members.

    Fires when mean pairwise cosine similarity >= rho AND at least
    min_recent members carry a year inside the trailing window. The
    outlier topic never alerts.
    """
    members: dict[int, list[str]] = {}
    for record_id, topic in model.assignments.items():
        if topic == OUTLIER_TOPIC:
            continue
        members.setdefault(topic, []).append(record_id)
    if as_of_year is None:
        dated = [y for y in years.values() if y is not None]
        if not dated:
            return []
        as_of_year = max(dated)
    cutoff = as_of_year - window_years + 1
    alerts: list[RedundancyAlert] = []
    for topic in sorted(members):
        ids = sorted(members[topic])
        if len(ids) < 2:
            continue
        rows = np.stack([_unit(np.asarray(vectors[i], dtype=np.float64)) for i in ids])
        sims = rows @ rows.T
        n = len(ids)
        pair_sum = (float(np.sum(sims)) - float(np.trace(sims))) / 2.0
        mean_sim = pair_sum / (n * (n - 1) / 2.0)
        recent = sum(
            1 for i in ids if years.get(i) is not None and years[i] >= cutoff
        )
        if mean_sim >= rho and recent >= min_recent:
            alerts.append(
                RedundancyAlert(
                    topic_id=topic,
                    label=model.labels.get(topic, str(topic)),
                    member_count=n,
                    recent_count=recent,
                    mean_similarity=mean_sim,
                    rule=f"mean_similarity>={rho} and recent>={min_recent} within {window_years}y",
                )
            )
    return alerts
