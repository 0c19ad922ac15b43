"""Hierarchical study-design classification and care-setting tagging.

The rules provider walks a fixed design tree with cue lexicons and a
priority order (synthesis beats RCT beats other interventional beats
observational). Records matching nothing land on the "unclassified" leaf
with every real design marked NO. An LLM provider can produce the same
shape; classification itself is stateless and pure.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable, Optional

from .corpus import StudyRecord
from .errors import ProviderUnavailable

# Parent -> children. Leaves are the keys never appearing as parents.
HIERARCHY: dict[str, tuple[str, ...]] = {
    "root": ("interventional", "observational", "synthesis", "unclassified"),
    "interventional": ("randomized", "non_randomized"),
    "randomized": ("rct",),
    "observational": ("cohort", "case_control", "cross_sectional"),
    "synthesis": ("systematic_review", "meta_analysis"),
}

LEAVES: tuple[str, ...] = (
    "rct",
    "non_randomized",
    "cohort",
    "case_control",
    "cross_sectional",
    "systematic_review",
    "meta_analysis",
    "unclassified",
)

SETTINGS: tuple[str, ...] = ("community", "locked_facility", "hospital", "other_unknown")

# Leaf priority for multi-cue records; first match wins.
_PRIORITY: tuple[str, ...] = (
    "meta_analysis",
    "systematic_review",
    "rct",
    "non_randomized",
    "cohort",
    "case_control",
    "cross_sectional",
)

DEFAULT_DESIGN_CUES: dict[str, tuple[str, ...]] = {
    "meta_analysis": ("meta-analysis", "meta analysis", "pooled analysis"),
    "systematic_review": ("systematic review", "umbrella review", "evidence synthesis"),
    "rct": (
        "randomized controlled trial",
        "randomised controlled trial",
        "randomized clinical trial",
        "randomised clinical trial",
        "randomized trial",
        "randomised trial",
        "rct",
    ),
    "non_randomized": (
        "non-randomized",
        "non-randomised",
        "nonrandomized",
        "quasi-experimental",
        "single-arm",
        "open-label trial",
        "pilot trial",
    ),
    "cohort": ("cohort", "followed", "longitudinal", "prospective study"),
    "case_control": ("case-control", "case control"),
    "cross_sectional": ("cross-sectional", "cross sectional", "survey"),
}

DEFAULT_SETTING_CUES: dict[str, tuple[str, ...]] = {
    "locked_facility": (
        "locked facility",
        "secure unit",
        "prison",
        "forensic",
        "detention",
        "inpatient psychiatric",
    ),
    "hospital": (
        "hospital",
        "inpatient",
        "ward",
        "emergency department",
        "intensive care",
        "clinic",
    ),
    "community": (
        "community",
        "community-dwelling",
        "home-based",
        "school",
        "workplace",
        "primary care",
    ),
}


def path_to_leaf(leaf: str) -> list[str]:
    parents = {child: parent for parent, children in HIERARCHY.items() for child in children}
    path = [leaf]
    while path[0] != "root":
        path.insert(0, parents[path[0]])
    return path


@dataclass(frozen=True)
class DesignLabel:
    path: tuple[str, ...]
    verdicts: dict[str, str]  # every leaf -> "YES"/"NO"
    setting: str
    rationale: str
    provider: str

    @property
    def leaf(self) -> str:
        return self.path[-1]

    def as_dict(self) -> dict:
        return {
            "path": list(self.path),
            "verdicts": dict(self.verdicts),
            "setting": self.setting,
            "rationale": self.rationale,
            "provider": self.provider,
        }


def _record_text(record: StudyRecord) -> str:
    return " ".join(part for part in (record.title, record.abstract or "") if part).lower()


def _match_cues(text: str, cues: tuple[str, ...]) -> list[str]:
    found = []
    for cue in cues:
        if re.search(rf"(?<![a-z0-9]){re.escape(cue)}(?![a-z0-9])", text):
            found.append(cue)
    return found


def _label_for_leaf(leaf: str, matched: list[str], setting: str, provider: str) -> DesignLabel:
    verdicts = {name: ("YES" if name == leaf else "NO") for name in LEAVES}
    rationale = (
        "matched cues: " + ", ".join(matched) if matched else "no design cues matched"
    )
    return DesignLabel(
        path=tuple(path_to_leaf(leaf)),
        verdicts=verdicts,
        setting=setting,
        rationale=rationale,
        provider=provider,
    )


def classify_setting(
    record: StudyRecord, cues: Optional[dict[str, tuple[str, ...]]] = None
) -> str:
    text = _record_text(record)
    lexicon = cues or DEFAULT_SETTING_CUES
    for setting in ("locked_facility", "hospital", "community"):
        if _match_cues(text, lexicon.get(setting, ())):
            return setting
    return "other_unknown"


LlmDesignFn = Callable[[str], dict]


def classify_design(
    record: StudyRecord,
    provider: str = "rules",
    *,
    cues: Optional[dict[str, tuple[str, ...]]] = None,
    setting_cues: Optional[dict[str, tuple[str, ...]]] = None,
    llm: Optional[LlmDesignFn] = None,
) -> DesignLabel:
    if provider == "llm":
        if llm is None:
            raise ProviderUnavailable("no llm design provider configured")
        try:
            raw = llm(_record_text(record))
        except Exception as exc:
            raise ProviderUnavailable(f"llm design provider failed: {exc}") from exc
        leaf = raw.get("leaf", "unclassified")
        if leaf not in LEAVES:
            leaf = "unclassified"
        setting = raw.get("setting", "other_unknown")
        if setting not in SETTINGS:
            setting = "other_unknown"
        verdicts = {name: ("YES" if name == leaf else "NO") for name in LEAVES}
        return DesignLabel(
            path=tuple(path_to_leaf(leaf)),
            verdicts=verdicts,
            setting=setting,
            rationale=str(raw.get("rationale", "provider verdict")),
            provider="llm",
        )
    text = _record_text(record)
    lexicon = cues or DEFAULT_DESIGN_CUES
    setting = classify_setting(record, setting_cues)
    for leaf in _PRIORITY:
        matched = _match_cues(text, lexicon.get(leaf, ()))
        if matched:
            return _label_for_leaf(leaf, matched, setting, "rules")
    return _label_for_leaf("unclassified", [], setting, "rules")


def load_cues(path: str) -> tuple[dict[str, tuple[str, ...]], dict[str, tuple[str, ...]]]:
    """Read design and setting cue lexicons from a JSON file.

    Shape: {"design": {leaf: [cues]}, "setting": {category: [cues]}};
    missing sections fall back to the defaults.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    design = {k: tuple(v) for k, v in data.get("design", {}).items()} or dict(
        DEFAULT_DESIGN_CUES
    )
    setting = {k: tuple(v) for k, v in data.get("setting", {}).items()} or dict(
        DEFAULT_SETTING_CUES
    )
    return design, setting


def dump_default_cues() -> str:
    return json.dumps(
        {
            "design": {k: list(v) for k, v in DEFAULT_DESIGN_CUES.items()},
            "setting": {k: list(v) for k, v in DEFAULT_SETTING_CUES.items()},
        },
        indent=2,
        sort_keys=True,
    )
