"""Sentence tagging backends and abstract-level compliance verdicts."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from ..errors import EmptyAbstract, UnknownModel
from .model import LABELS, SequenceModel

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")

DEFAULT_THETA = 0.5

RUBRIC_MODES = ("all_five", "pio_s")
_REQUIRED = {"all_five": ("P", "I", "C", "O", "S"), "pio_s": ("P", "I", "O", "S")}


def split_sentences(text: str) -> list[str]:
    parts = [part.strip() for part in _SENTENCE_SPLIT.split(text.strip())]
    return [part for part in parts if part]


@dataclass(frozen=True)
class SentenceTag:
    index: int
    text: str
    label: str
    probs: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "text": self.text,
            "label": self.label,
            "probs": dict(self.probs),
        }


class Tagger(Protocol):
    name: str

    def tag(self, abstract: str) -> list[SentenceTag]: ...


class ModelTagger:
    """Tags each sentence with the trained sequence model."""

    def __init__(self, model: Optional[SequenceModel]) -> None:
        if model is None:
            raise UnknownModel("no sequence model loaded")
        self.model = model
        self.name = "model"

    def tag(self, abstract: str) -> list[SentenceTag]:
        sentences = split_sentences(abstract or "")
        if not sentences:
            raise EmptyAbstract("abstract has no sentences")
        tags = []
        for idx, sentence in enumerate(sentences):
            probs = self.model.predict_probs(sentence)
            label = LABELS[int(np.argmax(probs))]
            tags.append(
                SentenceTag(
                    index=idx,
                    text=sentence,
                    label=label,
                    probs={lab: float(p) for lab, p in zip(LABELS, probs)},
                )
            )
        return tags


_CUES: dict[str, tuple[str, ...]] = {
    "C": (
        "control group",
        "comparator",
        "comparison condition",
        "placebo",
        "usual care",
        "waitlist",
        "controls were",
        "no treatment",
        "standard therapy",
    ),
    "P": (
        "participants were",
        "patients diagnosed",
        "enrolled",
        "population",
        "subjects",
        "children with",
        "adults",
        "aged",
    ),
    "I": (
        "intervention",
        "received",
        "underwent",
        "treatment consisted",
        "therapy",
        "program",
        "training",
        "sessions",
    ),
    "O": (
        "outcome",
        "outcomes",
        "endpoint",
        "measured",
        "score",
        "change in",
    ),
    "S": (
        "randomized",
        "randomised",
        "trial",
        "cohort",
        "case-control",
        "cross-sectional",
        "survey",
        "study design",
        "systematic review",
        "meta-analysis",
        "protocol",
    ),
}

_CUE_PRIORITY = ("C", "P", "I", "O", "S")


class CueTagger:
    """Keyword fallback tagger; deterministic, needs no training.

    Picks the label with the most matched cues, ties broken by a fixed
    priority, OTHER when nothing matches. Probabilities are one-hot.
    """

    name = "cues"

    def tag(self, abstract: str) -> list[SentenceTag]:
        sentences = split_sentences(abstract or "")
        if not sentences:
            raise EmptyAbstract("abstract has no sentences")
        tags = []
        for idx, sentence in enumerate(sentences):
            lowered = sentence.lower()
            scores = {
                label: sum(1 for cue in cues if cue in lowered)
                for label, cues in _CUES.items()
            }
            best = "OTHER"
            best_score = 0
            for label in _CUE_PRIORITY:
                if scores[label] > best_score:
                    best = label
                    best_score = scores[label]
            probs = {label: 0.0 for label in LABELS}
            probs[best] = 1.0
            tags.append(SentenceTag(index=idx, text=sentence, label=best, probs=probs))
        return tags


@dataclass(frozen=True)
class PicosAssessment:
    sentence_labels: tuple[str, ...]
    elements: dict[str, bool]
    compliant: bool
    confidence: float
    evidence: dict[str, tuple[int, ...]]
    rubric_mode: str
    theta: float

    def as_dict(self) -> dict:
        return {
            "sentence_labels": list(self.sentence_labels),
            "elements": dict(self.elements),
            "compliant": self.compliant,
            "confidence": self.confidence,
            "evidence": {k: list(v) for k, v in self.evidence.items()},
            "rubric_mode": self.rubric_mode,
            "theta": self.theta,
        }


def assess_compliance(
    tags: Sequence[SentenceTag],
    rubric_mode: str = "all_five",
    theta: float = DEFAULT_THETA,
) -> PicosAssessment:
    """Fold sentence tags into an abstract-level PICOS verdict.

    An element counts as present when at least one sentence carries its
    label with probability >= theta. Confidence is the weakest required
    element's best sentence probability.
    """
    if rubric_mode not in _REQUIRED:
        raise ValueError(f"unknown rubric mode {rubric_mode!r}")
    elements: dict[str, bool] = {}
    evidence: dict[str, tuple[int, ...]] = {}
    best_prob: dict[str, float] = {}
    for element in ("P", "I", "C", "O", "S"):
        hits = tuple(
            tag.index
            for tag in tags
            if tag.label == element and tag.probs.get(element, 0.0) >= theta
        )
        elements[element] = bool(hits)
        evidence[element] = hits
        best_prob[element] = max((tag.probs.get(element, 0.0) for tag in tags), default=0.0)
    required = _REQUIRED[rubric_mode]
    compliant = all(elements[e] for e in required)
    confidence = min(best_prob[e] for e in required)
    return PicosAssessment(
        sentence_labels=tuple(tag.label for tag in tags),
        elements=elements,
        compliant=compliant,
        confidence=confidence,
        evidence=evidence,
        rubric_mode=rubric_mode,
        theta=theta,
    )
