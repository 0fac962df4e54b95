"""Annotated-entity corpus: 9-label schema, CSV round-trip, validation, stats.

The corpus file is comma-separated UTF-8 with header
``entity_text,label,rank,context_sentence,doc_id`` and RFC 4180 quoting.
"""

from __future__ import annotations

import csv
import io
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataError


class MissingColumn(DataError):
    pass


class EmptyInput(DataError):
    pass


class EntityLabel(str, Enum):
    """The closed label set of the standard corpus."""

    MATERIAL = "MATERIAL"
    CONTROL_METHOD = "CONTROL_METHOD"
    PRODUCT = "PRODUCT"
    FARADAIC_EFFICIENCY = "FARADAIC_EFFICIENCY"
    CELL_SETUP = "CELL_SETUP"
    ELECTROLYTE = "ELECTROLYTE"
    SYNTHESIS_METHOD = "SYNTHESIS_METHOD"
    CURRENT_DENSITY = "CURRENT_DENSITY"
    VOLTAGE = "VOLTAGE"

    @property
    def display(self) -> str:
        return self.value.replace("_", " ")


# Second/third products and their faradaic efficiencies are modelled as a
# rank qualifier on these two base labels; every other label is rank 1.
RANKED_LABELS = frozenset({EntityLabel.PRODUCT, EntityLabel.FARADAIC_EFFICIENCY})

# The eight labels of the extraction task (synthesis method is corpus-only),
# in the canonical reporting order.
NER_LABELS: tuple[EntityLabel, ...] = (
    EntityLabel.MATERIAL,
    EntityLabel.CONTROL_METHOD,
    EntityLabel.PRODUCT,
    EntityLabel.FARADAIC_EFFICIENCY,
    EntityLabel.ELECTROLYTE,
    EntityLabel.VOLTAGE,
    EntityLabel.CURRENT_DENSITY,
    EntityLabel.CELL_SETUP,
)

CORPUS_FIELDS = ("entity_text", "label", "rank", "context_sentence", "doc_id")

_WS = re.compile(r"\s+")


def normalize_text(s: str) -> str:
    """NFC-normalize and collapse whitespace; the equality used everywhere a
    'substring after normalization' check is required."""
    return _WS.sub(" ", unicodedata.normalize("NFC", s)).strip()


def parse_label(raw: str) -> EntityLabel | None:
    """Map a label cell to an EntityLabel, tolerating case and spaces."""
    name = _WS.sub("_", raw.strip().upper())
    try:
        return EntityLabel(name)
    except ValueError:
        return None


@dataclass(frozen=True)
class EntityRecord:
    """One annotated entity: text, label, rank qualifier, context, provenance."""

    entity_text: str
    label: EntityLabel
    rank: int
    context_sentence: str
    doc_id: str


@dataclass(frozen=True)
class RejectedRow:
    row: int  # 1-based position among the data rows
    reason: str
    data: Mapping[str, str]


@dataclass(frozen=True)
class CorpusStats:
    per_label: Mapping[EntityLabel, int]
    total: int


def validate_record(record: EntityRecord) -> list[str]:
    """Return every violated invariant (empty list means the record is valid)."""
    violations = []
    if not record.entity_text:
        violations.append("empty-entity-text")
    if not record.context_sentence:
        violations.append("empty-context-sentence")
    if not record.doc_id:
        violations.append("empty-doc-id")
    if not 1 <= record.rank <= 3:
        violations.append("rank-out-of-range")
    elif record.rank != 1 and record.label not in RANKED_LABELS:
        violations.append("rank-not-allowed")
    if record.entity_text and record.context_sentence:
        if normalize_text(record.entity_text) not in normalize_text(record.context_sentence):
            violations.append("substring-mismatch")
    return violations


def parse_corpus(
    rows: Iterable[Mapping[str, str]],
    fieldnames: Sequence[str] | None = None,
) -> tuple[list[EntityRecord], list[RejectedRow]]:
    """Partition tabular rows into valid records and a rejects report.

    Never raises on a malformed row; |records| + |rejects| == |rows|.
    Raises MissingColumn if the header lacks a required field and EmptyInput
    if there is no header at all.
    """
    rows = list(rows)
    if fieldnames is None:
        if not rows:
            raise EmptyInput("corpus input contains no rows")
        fieldnames = list(rows[0].keys())
    missing = [f for f in CORPUS_FIELDS if f not in fieldnames]
    if missing:
        raise MissingColumn(f"corpus header missing column(s): {', '.join(missing)}")

    records: list[EntityRecord] = []
    rejects: list[RejectedRow] = []
    for i, row in enumerate(rows, start=1):
        reasons = []
        label = parse_label(row.get("label") or "")
        if label is None:
            reasons.append("unknown-label")
        try:
            rank = int(str(row.get("rank", "")).strip())
        except ValueError:
            rank = 0
            reasons.append("bad-rank")
        if reasons:
            rejects.append(RejectedRow(i, ",".join(reasons), dict(row)))
            continue
        record = EntityRecord(
            entity_text=row.get("entity_text") or "",
            label=label,
            rank=rank,
            context_sentence=row.get("context_sentence") or "",
            doc_id=row.get("doc_id") or "",
        )
        violations = validate_record(record)
        if violations:
            rejects.append(RejectedRow(i, ",".join(violations), dict(row)))
        else:
            records.append(record)
    return records, rejects


def read_corpus(path: str | Path) -> tuple[list[EntityRecord], list[RejectedRow]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyInput(f"{path}: empty corpus file")
        return parse_corpus(list(reader), fieldnames=reader.fieldnames)


def emit_corpus(records: Iterable[EntityRecord]) -> str:
    """Serialize records to CSV text; parse_corpus(emit_corpus(R)) == R."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CORPUS_FIELDS)
    for r in records:
        writer.writerow([r.entity_text, r.label.value, r.rank, r.context_sentence, r.doc_id])
    return buf.getvalue()


def write_corpus(records: Iterable[EntityRecord], path: str | Path) -> None:
    Path(path).write_text(emit_corpus(records), encoding="utf-8")


def corpus_stats(records: Iterable[EntityRecord]) -> CorpusStats:
    counts = Counter(r.label for r in records)
    per_label = {label: counts.get(label, 0) for label in EntityLabel}
    return CorpusStats(per_label=per_label, total=sum(per_label.values()))


def check_doc_ids(records: Iterable[EntityRecord], known_doc_ids: set[str]) -> list[str]:
    """Corpus-wide check: doc_ids that do not resolve to a known document."""
    return sorted({r.doc_id for r in records} - known_doc_ids)
