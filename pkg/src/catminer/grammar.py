"""The extraction output grammar (normative, versioned).

One line per label, ``LABEL: value[; value]*``, ``None`` for absent:

    MATERIAL: Cu nanowire; Cu foil
    CONTROL METHOD: None
    ...

Rendering always emits all eight lines in canonical order. Parsing is
tolerant by contract: it is a total function over arbitrary text, unknown
labels are collected as warnings, missing labels yield empty lists, and no
value is ever invented that is not a substring of the raw text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import NER_LABELS, EntityLabel

GRAMMAR_VERSION = "extract-grammar-v1"

# Table-style synonym seen in the wild for the applied-potential label.
_LABEL_ALIASES = {"POTENTIAL": EntityLabel.VOLTAGE}

_NONE_TOKENS = {"none", "n/a", "na", "null"}

_LINE = re.compile(r"^\s*([A-Za-z][A-Za-z_ ]*?)\s*:\s*(.*)$")


@dataclass
class ExtractionResult:
    """Per-label extracted values for the eight NER labels plus the verbatim
    model output. Empty lists are first-class (an empty answer can be the
    correct answer)."""

    entities: dict[EntityLabel, list[str]]
    raw_text: str = ""
    unknown_labels: list[str] = field(default_factory=list)

    def values_for(self, label: EntityLabel) -> list[str]:
        return self.entities.get(label, [])

    def is_empty(self) -> bool:
        return all(not v for v in self.entities.values())

    def to_dict(self) -> dict:
        return {label.value: list(values) for label, values in self.entities.items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[str]], raw_text: str = "") -> "ExtractionResult":
        entities = empty_entities()
        for key, values in data.items():
            label = _resolve_label(key)
            if label is not None:
                entities[label] = [str(v) for v in values]
        return cls(entities=entities, raw_text=raw_text)


def empty_entities() -> dict[EntityLabel, list[str]]:
    return {label: [] for label in NER_LABELS}


def empty_extraction(raw_text: str = "") -> ExtractionResult:
    return ExtractionResult(entities=empty_entities(), raw_text=raw_text)


def _resolve_label(name: str) -> EntityLabel | None:
    key = re.sub(r"\s+", "_", name.strip().upper()).strip("_")
    if key in _LABEL_ALIASES:
        return _LABEL_ALIASES[key]
    try:
        label = EntityLabel(key)
    except ValueError:
        return None
    return label if label in NER_LABELS else None


def _is_none_token(value: str) -> bool:
    return value.rstrip(".").strip().lower() in _NONE_TOKENS


def render_extraction(entities: Mapping[EntityLabel, Sequence[str]]) -> str:
    """Render values in the output grammar: all eight lines, canonical order."""
    lines = []
    for label in NER_LABELS:
        values = [v for v in entities.get(label, []) if v]
        lines.append(f"{label.display}: {'; '.join(values) if values else 'None'}")
    return "\n".join(lines)


def gold_entities_by_doc(records) -> dict[str, dict[EntityLabel, list[str]]]:
    """Group corpus EntityRecords into per-document gold entity maps over the
    eight NER labels, exact-deduplicated, products and faradaic efficiencies
    ordered by rank."""
    grouped: dict[str, dict[EntityLabel, list[tuple[int, int, str]]]] = {}
    for pos, record in enumerate(records):
        if record.label not in NER_LABELS:
            continue
        doc = grouped.setdefault(record.doc_id, {label: [] for label in NER_LABELS})
        if all(text != record.entity_text for _, _, text in doc[record.label]):
            doc[record.label].append((record.rank, pos, record.entity_text))
    out: dict[str, dict[EntityLabel, list[str]]] = {}
    for doc_id, labels in grouped.items():
        entities = empty_entities()
        for label, values in labels.items():
            entities[label] = [text for _, _, text in sorted(values)]
        out[doc_id] = entities
    return out


def parse_extraction(raw: str) -> ExtractionResult:
    """Parse model output tolerantly; never fails.

    Lines (and ``|``-separated segments within a line) matching
    ``LABEL: values`` populate that label; everything else is ignored, with
    unknown label-shaped segments collected as warnings. ``None``/``N/A``/
    empty means an empty list. Worst case: all lists empty, raw preserved.
    """
    result = empty_extraction(raw_text=raw)
    for line in raw.splitlines():
        for segment in line.split("|"):
            match = _LINE.match(segment.lstrip(" \t-*•"))
            if not match:
                continue
            name, rest = match.groups()
            label = _resolve_label(name)
            if label is None:
                result.unknown_labels.append(name.strip())
                continue
            values = [v.strip() for v in rest.split(";")]
            result.entities[label].extend(
                v for v in values if v and not _is_none_token(v)
            )
    return result
