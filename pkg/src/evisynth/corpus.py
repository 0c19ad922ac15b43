"""Study-record ingestion: parsing, normalization, dedup, and eligibility.

The corpus is the single source of truth every other component reads.
Parsing never aborts a whole batch over a dirty row; malformed entries go
into a rejects report instead, because real bibliographic exports are
dirty.
"""

from __future__ import annotations

import csv
import io
import json
import re
import string
import threading
from dataclasses import dataclass, field, asdict
from typing import Iterable, Optional

from .errors import EmptyPayload, InvalidRubric, UnknownFormat

YEAR_MIN = 1800
YEAR_MAX = 2100

FORMATS = ("jsonl", "csv", "ris")

_LIST_FIELDS = ("authors", "interventions", "outcomes", "population")


@dataclass
class StudyRecord:
    id: str
    title: str
    abstract: Optional[str] = None
    year: Optional[int] = None
    venue: Optional[str] = None
    authors: list[str] = field(default_factory=list)
    interventions: list[str] = field(default_factory=list)
    outcomes: list[str] = field(default_factory=list)
    population: list[str] = field(default_factory=list)
    source_tag: str = ""
    raw: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not str(self.id):
            raise ValueError("record id must be non-empty")
        if not self.title or not self.title.strip():
            raise ValueError("title must be non-empty")
        if self.year is not None and not (YEAR_MIN <= self.year <= YEAR_MAX):
            raise ValueError(f"year {self.year} outside [{YEAR_MIN}, {YEAR_MAX}]")

    def text(self) -> str:
        """Title plus abstract when present; the searchable surface."""
        if self.abstract:
            return f"{self.title} {self.abstract}"
        return self.title

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Reject:
    location: str
    reason: str
    source: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ParseResult:
    records: list[StudyRecord]
    rejects: list[Reject]


def rejects_to_jsonl(rejects: Iterable[Reject]) -> str:
    return "".join(json.dumps(r.as_dict(), sort_keys=True) + "\n" for r in rejects)


def _coerce_year(value) -> Optional[int]:
    if value is None or value == "":
        return None
    if isinstance(value, int):
        return value
    match = re.search(r"\d{4}", str(value))
    if not match:
        raise ValueError(f"cannot parse year from {value!r}")
    return int(match.group())


def _record_from_mapping(row: dict, source_tag: str) -> StudyRecord:
    known = {
        "id": str(row.get("id", "")).strip(),
        "title": str(row.get("title", "")).strip(),
        "abstract": row.get("abstract") or None,
        "year": _coerce_year(row.get("year")),
        "venue": row.get("venue") or None,
        "source_tag": row.get("source_tag") or source_tag,
    }
    for name in _LIST_FIELDS:
        value = row.get(name) or []
        if isinstance(value, str):
            value = [part.strip() for part in value.split(";") if part.strip()]
        known[name] = [str(v) for v in value]
    extras = {k: v for k, v in row.items() if k not in known and k not in _LIST_FIELDS}
    record = StudyRecord(raw=extras, **known)
    record.validate()
    return record


def _parse_jsonl(text: str) -> ParseResult:
    records, rejects = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            if not isinstance(row, dict):
                raise ValueError("line is not a JSON object")
            records.append(_record_from_mapping(row, source_tag="jsonl"))
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            rejects.append(Reject(location=f"line {lineno}", reason=str(exc), source=line[:200]))
    return ParseResult(records, rejects)


def _parse_csv(text: str) -> ParseResult:
    records, rejects = [], []
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise EmptyPayload("csv payload has no header row")
    for lineno, row in enumerate(reader, start=2):
        try:
            records.append(_record_from_mapping(row, source_tag="csv"))
        except (ValueError, TypeError) as exc:
            rejects.append(Reject(location=f"line {lineno}", reason=str(exc), source=str(row)[:200]))
    return ParseResult(records, rejects)


# RIS tag subset handled at ingestion; everything else is preserved in raw.
_RIS_TAGS = {"TY", "TI", "AB", "PY", "AU", "JO", "ID"}


def _ris_entry_to_record(entry: dict) -> StudyRecord:
    row = {
        "id": entry.get("ID", [""])[0],
        "title": entry.get("TI", [""])[0],
        "abstract": entry.get("AB", [None])[0],
        "year": entry.get("PY", [None])[0],
        "venue": entry.get("JO", [None])[0],
        "authors": entry.get("AU", []),
        "type": entry.get("TY", [""])[0],
    }
    if not row["id"]:
        raise ValueError("RIS entry missing ID tag")
    return _record_from_mapping(row, source_tag="ris")


def _parse_ris(text: str) -> ParseResult:
    records, rejects = [], []
    entry: dict[str, list[str]] = {}
    entry_start = 1
    in_entry = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        match = re.match(r"^([A-Z][A-Z0-9])\s*-\s?(.*)$", stripped)
        if not match:
            continue
        tag, value = match.group(1), match.group(2).strip()
        if tag == "TY":
            entry = {}
            entry_start = lineno
            in_entry = True
        if tag == "ER":
            if in_entry:
                try:
                    records.append(_ris_entry_to_record(entry))
                except (ValueError, TypeError) as exc:
                    rejects.append(
                        Reject(location=f"entry at line {entry_start}", reason=str(exc))
                    )
            entry, in_entry = {}, False
            continue
        if in_entry and tag in _RIS_TAGS:
            entry.setdefault(tag, []).append(value)
    if in_entry and entry:
        rejects.append(Reject(location=f"entry at line {entry_start}", reason="unterminated RIS entry"))
    return ParseResult(records, rejects)


def parse_records(payload: bytes | str, format: str) -> ParseResult:
    """Parse a byte stream of study records in the declared format.

    Malformed rows are collected into the rejects report; only an empty
    payload or an unknown format aborts.
    """
    if format not in FORMATS:
        raise UnknownFormat(f"unknown format {format!r}; expected one of {FORMATS}")
    if isinstance(payload, bytes):
        text = payload.decode("utf-8")
    else:
        text = payload
    if not text.strip():
        raise EmptyPayload("payload is empty")
    if format == "jsonl":
        return _parse_jsonl(text)
    if format == "csv":
        return _parse_csv(text)
    return _parse_ris(text)


def serialize_records(records: Iterable[StudyRecord]) -> str:
    """JSONL round-trip form; parse(serialize(x)) retains every field."""
    lines = []
    for record in records:
        row = record.as_dict()
        raw = row.pop("raw")
        row.update(raw)
        lines.append(json.dumps(row, sort_keys=True, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_title(title: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    lowered = title.lower().translate(_PUNCT_TABLE)
    return " ".join(lowered.split())


@dataclass
class DedupeResult:
    kept: list[StudyRecord]
    duplicates: list[tuple[StudyRecord, StudyRecord]]  # (kept, dropped)


def dedupe(records: Iterable[StudyRecord]) -> DedupeResult:
    """Drop exact-id and normalized-title duplicates; first occurrence wins."""
    kept: list[StudyRecord] = []
    duplicates: list[tuple[StudyRecord, StudyRecord]] = []
    by_id: dict[str, StudyRecord] = {}
    by_title: dict[str, StudyRecord] = {}
    for record in records:
        title_key = normalize_title(record.title)
        winner = by_id.get(record.id) or by_title.get(title_key)
        if winner is not None:
            duplicates.append((winner, record))
            continue
        by_id[record.id] = record
        by_title[title_key] = record
        kept.append(record)
    return DedupeResult(kept=kept, duplicates=duplicates)


# Keyword cue sets mirror the screening rubric's criteria families so an
# LLM-backed scorer can drop in behind the same structure later.
DEFAULT_PARTICIPANT_CUES = (
    "patients", "participants", "adults", "diagnosed", "diagnosis",
    "individuals", "subjects",
)
DEFAULT_INTERVENTION_CUES = (
    "intervention", "program", "training", "therapy", "treatment", "sessions",
)
DEFAULT_COMPARATOR_CUES = (
    "control", "placebo", "usual care", "comparison", "comparator", "sham", "waitlist",
)
DEFAULT_OUTCOME_CUES = (
    "outcome", "measured", "scale", "score", "questionnaire", "validated", "assessed",
)
DEFAULT_TIMING_CUES = (
    "follow-up", "followup", "post-intervention", "baseline", "weeks", "months",
)


@dataclass
class EligibilityRubric:
    require_participants: bool = True
    require_intervention: bool = True
    require_comparator: bool = True
    require_outcomes: bool = True
    require_timing: bool = True
    participant_cues: tuple[str, ...] = DEFAULT_PARTICIPANT_CUES
    intervention_cues: tuple[str, ...] = DEFAULT_INTERVENTION_CUES
    comparator_cues: tuple[str, ...] = DEFAULT_COMPARATOR_CUES
    outcome_cues: tuple[str, ...] = DEFAULT_OUTCOME_CUES
    timing_cues: tuple[str, ...] = DEFAULT_TIMING_CUES

    def enabled(self) -> dict[str, tuple[str, ...]]:
        flags = {
            "participants": (self.require_participants, self.participant_cues),
            "intervention": (self.require_intervention, self.intervention_cues),
            "comparator": (self.require_comparator, self.comparator_cues),
            "outcomes": (self.require_outcomes, self.outcome_cues),
            "timing": (self.require_timing, self.timing_cues),
        }
        return {name: cues for name, (on, cues) in flags.items() if on}

    def validate(self) -> None:
        enabled = self.enabled()
        if not enabled:
            raise InvalidRubric("at least one requirement must be enabled")
        for name, cues in enabled.items():
            if not cues:
                raise InvalidRubric(f"criterion {name!r} is enabled but has no cues")


@dataclass
class EligibilityResult:
    criteria: dict[str, bool]
    verdict: str  # "pass" | "fail" | "indeterminate"


def evaluate_eligibility(record: StudyRecord, rubric: EligibilityRubric) -> EligibilityResult:
    """Score each enabled criterion by cue presence in title+abstract.

    Records without an abstract are never failed: too little text to judge,
    so the verdict is "indeterminate".
    """
    rubric.validate()
    haystack = record.text().lower()
    criteria = {
        name: any(cue in haystack for cue in cues)
        for name, cues in rubric.enabled().items()
    }
    if record.abstract is None or not record.abstract.strip():
        verdict = "indeterminate"
    else:
        verdict = "pass" if all(criteria.values()) else "fail"
    return EligibilityResult(criteria=criteria, verdict=verdict)


class Corpus:
    """Ordered id-keyed record store; one serialized writer, snapshot reads."""

    def __init__(self) -> None:
        self._records: dict[str, StudyRecord] = {}
        self._title_keys: dict[str, str] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._records

    def get(self, record_id: str) -> Optional[StudyRecord]:
        return self._records.get(record_id)

    def snapshot(self) -> list[StudyRecord]:
        with self._lock:
            return list(self._records.values())

    def find_duplicate(self, record: StudyRecord) -> Optional[StudyRecord]:
        existing_id = self._title_keys.get(normalize_title(record.title))
        if record.id in self._records:
            return self._records[record.id]
        if existing_id is not None:
            return self._records[existing_id]
        return None

    def add(self, record: StudyRecord) -> bool:
        """Insert unless a duplicate exists; returns True when stored."""
        record.validate()
        with self._lock:
            if self.find_duplicate(record) is not None:
                return False
            self._records[record.id] = record
            self._title_keys[normalize_title(record.title)] = record.id
            return True

    def to_jsonl(self) -> str:
        return serialize_records(self.snapshot())

    @classmethod
    def from_jsonl(cls, text: str) -> "Corpus":
        store = cls()
        for record in parse_records(text, "jsonl").records:
            store.add(record)
        return store
