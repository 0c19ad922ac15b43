import numpy as np
import pytest

from evisynth.corpus import StudyRecord

# Vocabulary families give records controllable embedding geometry: records
# built from the same family land close in hashed-embedding space, records
# from different families are near-orthogonal.
THEMES = {
    "exercise": {
        "condition": "knee osteoarthritis",
        "intervention": "supervised exercise therapy",
        "outcome": "pain intensity",
        "words": "exercise therapy knee pain osteoarthritis physiotherapy strength training mobility",
    },
    "ssri": {
        "condition": "major depression",
        "intervention": "sertraline",
        "outcome": "depression severity",
        "words": "sertraline depression antidepressant mood serotonin relapse remission psychiatric",
    },
    "vaccine": {
        "condition": "influenza",
        "intervention": "quadrivalent vaccine",
        "outcome": "infection rate",
        "words": "vaccine influenza immunization antibody titer seroconversion vaccination efficacy",
    },
    "telehealth": {
        "condition": "type 2 diabetes",
        "intervention": "telehealth coaching",
        "outcome": "glycated hemoglobin",
        "words": "telehealth remote monitoring diabetes glucose coaching digital adherence smartphone",
    },
}

_DESIGN_SENTENCES = {
    "rct": "This was a randomized controlled trial.",
    "cohort": "This was a prospective cohort study.",
    "case_control": "We conducted a case-control comparison.",
    "systematic_review": "This systematic review followed a registered protocol.",
}


def make_record(
    i: int,
    theme: str = "exercise",
    year: int = 2020,
    design: str = "rct",
    rid: str | None = None,
) -> dict:
    t = THEMES[theme]
    abstract = (
        f"Adults with {t['condition']} were enrolled from outpatient clinics. "
        f"Participants received {t['intervention']} for twelve weeks. "
        f"The comparison group received usual care. "
        f"The primary outcome was {t['outcome']} measured with a validated scale. "
        f"{_DESIGN_SENTENCES[design]} "
        f"Key terms: {t['words']}."
    )
    return {
        "id": rid or f"{theme}-{i}",
        "title": f"Study {i} of {t['intervention']} for {t['condition']}",
        "abstract": abstract,
        "year": year,
        "venue": f"Journal of {theme.title()} Research",
        "authors": [f"Author {theme.title()}", f"Collaborator {i % 3}"],
        "interventions": [t["intervention"]],
        "outcomes": [t["outcome"]],
    }


def make_corpus(n: int, seed: int = 0) -> list[dict]:
    """n themed records cycling through all themes, years 2016..2023."""
    rng = np.random.default_rng(seed)
    themes = list(THEMES)
    rows = []
    for i in range(n):
        theme = themes[i % len(themes)]
        year = int(rng.integers(2016, 2024))
        design = ["rct", "cohort", "case_control", "systematic_review"][i % 4]
        rows.append(make_record(i, theme=theme, year=year, design=design))
    return rows


def study_record(**kwargs) -> StudyRecord:
    base = {"id": "r1", "title": "A study"}
    base.update(kwargs)
    return StudyRecord(**base)


@pytest.fixture
def tmp_storage(tmp_path):
    return str(tmp_path / "store")
