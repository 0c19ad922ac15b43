"""Seeded synthetic sentence corpus for training and evaluating the tagger.

Five templates per label with small filler pools. Deliberately easy: each
label leans on its own vocabulary, so a working model should separate the
classes almost perfectly and anything below that points at the
implementation rather than the data.
"""

from __future__ import annotations

import numpy as np

from .model import LABELS

TEMPLATES: dict[str, tuple[str, ...]] = {
    "P": (
        "Participants were {n} adults with {condition}.",
        "We enrolled {n} patients diagnosed with {condition}.",
        "The study population comprised {n} older adults living with {condition}.",
        "Eligible subjects were adults aged {age} years with {condition}.",
        "A total of {n} children with {condition} took part.",
    ),
    "I": (
        "The intervention group received {intervention}.",
        "Patients underwent {intervention} for {weeks} weeks.",
        "Treatment consisted of daily {intervention}.",
        "Participants in the active arm practiced {intervention}.",
        "The program delivered {intervention} sessions twice weekly.",
    ),
    "C": (
        "The control group received {comparator}.",
        "Comparator arms continued {comparator}.",
        "Controls were given {comparator} instead.",
        "The comparison condition was {comparator}.",
        "A placebo group received {comparator}.",
    ),
    "O": (
        "The primary outcome was {outcome}.",
        "Outcomes included {outcome} at follow-up.",
        "We measured {outcome} after {weeks} weeks.",
        "The main endpoint was change in {outcome}.",
        "Secondary outcomes covered {outcome}.",
    ),
    "S": (
        "This was a {design}.",
        "We conducted a {design} across {n} sites.",
        "The study used a {design} design.",
        "A {design} was carried out.",
        "Methods followed a {design} protocol.",
    ),
    "OTHER": (
        "The weather was unremarkable during data collection.",
        "Funding was provided by a national agency.",
        "The authors declare no conflicts of interest.",
        "This section discusses unrelated administrative matters.",
        "Data are available upon reasonable request.",
    ),
}

CONDITIONS = ("stroke", "diabetes", "depression", "hypertension", "asthma", "arthritis")
INTERVENTIONS = (
    "supervised exercise",
    "mindfulness training",
    "cognitive behavioral therapy",
    "a walking program",
    "dietary counseling",
)
COMPARATORS = ("usual care", "a placebo", "standard therapy", "no treatment", "a waitlist")
OUTCOMES = (
    "pain intensity",
    "quality of life",
    "blood pressure",
    "depressive symptoms",
    "walking speed",
)
DESIGNS = (
    "randomized controlled trial",
    "cohort study",
    "case-control study",
    "cross-sectional survey",
    "pilot trial",
)
AGES = ("18-35", "40-60", "60-75", "65-80")


def _fill(template: str, rng: np.random.Generator) -> str:
    return template.format(
        n=int(rng.integers(20, 400)),
        weeks=int(rng.integers(4, 52)),
        age=AGES[int(rng.integers(len(AGES)))],
        condition=CONDITIONS[int(rng.integers(len(CONDITIONS)))],
        intervention=INTERVENTIONS[int(rng.integers(len(INTERVENTIONS)))],
        comparator=COMPARATORS[int(rng.integers(len(COMPARATORS)))],
        outcome=OUTCOMES[int(rng.integers(len(OUTCOMES)))],
        design=DESIGNS[int(rng.integers(len(DESIGNS)))],
    )


def generate_sentences(n_sentences: int = 600, seed: int = 13) -> list[tuple[str, str]]:
    """Balanced labeled sentences, n_sentences split evenly over the labels."""
    rng = np.random.default_rng(seed)
    per_label = n_sentences // len(LABELS)
    rows: list[tuple[str, str]] = []
    for label in LABELS:
        templates = TEMPLATES[label]
        for i in range(per_label):
            template = templates[i % len(templates)]
            rows.append((_fill(template, rng), label))
    order = rng.permutation(len(rows))
    return [rows[i] for i in order]


def generate_abstract(seed: int, compliant: bool = True) -> tuple[str, dict[str, bool]]:
    """One synthetic abstract plus the ground-truth element presence map.

    Non-compliant abstracts drop the comparator and outcome sentences.
    """
    rng = np.random.default_rng(seed)
    wanted = ["P", "I", "C", "O", "S"] if compliant else ["P", "I", "S"]
    sentences = []
    for label in wanted:
        templates = TEMPLATES[label]
        sentences.append(_fill(templates[int(rng.integers(len(templates)))], rng))
    presence = {label: label in wanted for label in ("P", "I", "C", "O", "S")}
    return " ".join(sentences), presence
