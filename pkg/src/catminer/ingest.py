"""Tagged-span PDF extractions -> cleaned, section-structured documents.

Binary PDF decoding is an external extractor's job; this module consumes the
tagged-span interchange format (one JSON document per file, fields
``doc_id``/``pages``, span fields ``text``/``font_size``/``bold``/``y_order``)
and applies the versioned cleaning rule set.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError

RULE_SET_VERSION = "default-v1"

# Heading rule: font at least this much above the modal body size, or bold
# and at most this many words.
HEADING_FONT_DELTA = 1.5
HEADING_MAX_WORDS = 12


class MalformedSpanStream(DataError):
    pass


class EmptyAfterCleaning(DataError):
    pass


class InvalidRulePattern(DataError):
    pass


class DuplicateDocId(DataError):
    pass


class MissingColumn(DataError):
    pass


@dataclass(frozen=True)
class Span:
    text: str
    font_size: float
    bold: bool
    y_order: int


@dataclass
class TaggedSpanDocument:
    doc_id: str
    pages: list[list[Span]]


@dataclass(frozen=True)
class CleaningRule:
    rule_id: str
    kind: str  # regex-delete | regex-replace | repeated-line-drop | min-length-drop
    pattern: str = ""
    replacement: str = ""
    threshold: int = 0


RULE_KINDS = ("regex-delete", "regex-replace", "repeated-line-drop", "min-length-drop")


@dataclass
class CleaningRuleSet:
    """Ordered cleaning rules; order is semantic. Identified by rule_set_id so
    results can cite the exact rule set they were produced with."""

    rule_set_id: str
    rules: list[CleaningRule] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen = set()
        for rule in self.rules:
            if rule.rule_id in seen:
                raise InvalidRulePattern(f"duplicate rule_id {rule.rule_id!r}")
            seen.add(rule.rule_id)
            if rule.kind not in RULE_KINDS:
                raise InvalidRulePattern(f"{rule.rule_id}: unknown kind {rule.kind!r}")
        self._compiled = {}
        for rule in self.rules:
            if rule.kind in ("regex-delete", "regex-replace"):
                try:
                    self._compiled[rule.rule_id] = re.compile(rule.pattern)
                except re.error as exc:
                    raise InvalidRulePattern(f"{rule.rule_id}: {exc}") from exc

    def compiled(self, rule: CleaningRule) -> re.Pattern:
        return self._compiled[rule.rule_id]

    def repeated_line_threshold(self) -> int | None:
        """Percentage threshold of the first repeated-line-drop rule, if any."""
        for rule in self.rules:
            if rule.kind == "repeated-line-drop":
                return rule.threshold
        return None


def default_rules() -> CleaningRuleSet:
    """The shipped rule set (id ``default-v1``): control characters out,
    ligatures expanded, whitespace collapsed, running lines and short
    fragments dropped."""
    return CleaningRuleSet(
        RULE_SET_VERSION,
        [
            CleaningRule("strip-control", "regex-delete", pattern=r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f]"),
            CleaningRule("lig-ff", "regex-replace", pattern="ﬀ", replacement="ff"),
            CleaningRule("lig-fi", "regex-replace", pattern="ﬁ", replacement="fi"),
            CleaningRule("lig-fl", "regex-replace", pattern="ﬂ", replacement="fl"),
            CleaningRule("lig-ffi", "regex-replace", pattern="ﬃ", replacement="ffi"),
            CleaningRule("lig-ffl", "regex-replace", pattern="ﬄ", replacement="ffl"),
            CleaningRule("lig-st", "regex-replace", pattern="[ﬅﬆ]", replacement="st"),
            CleaningRule("collapse-ws", "regex-replace", pattern=r"\s+", replacement=" "),
            CleaningRule("trim", "regex-replace", pattern=r"^ +| +$", replacement=""),
            CleaningRule("drop-running-lines", "repeated-line-drop", threshold=60),
            CleaningRule("drop-short", "min-length-drop", threshold=20),
        ],
    )


RULE_SETS: dict[str, CleaningRuleSet] = {RULE_SET_VERSION: default_rules()}


def _apply_regex_rules(text: str, rules: CleaningRuleSet) -> str:
    for rule in rules.rules:
        if rule.kind == "regex-delete":
            text = rules.compiled(rule).sub("", text)
        elif rule.kind == "regex-replace":
            text = rules.compiled(rule).sub(rule.replacement, text)
    return text


def _min_length(rules: CleaningRuleSet) -> int:
    return max((r.threshold for r in rules.rules if r.kind == "min-length-drop"), default=0)


def clean_paragraph(text: str, rules: CleaningRuleSet) -> str:
    """Apply the rule set to one paragraph; returns "" when dropped.

    repeated-line-drop needs document context and is a no-op here.
    Idempotent for the shipped default rule set.
    """
    text = _apply_regex_rules(text, rules)
    if len(text) < _min_length(rules):
        return ""
    return text


@dataclass(frozen=True)
class DocumentMeta:
    doc_id: str
    title: str
    abstract: str = ""
    journal: str = ""
    year: int | None = None
    open_access: bool = False


@dataclass
class Section:
    heading: str
    paragraphs: list[str]


@dataclass
class StructuredDocument:
    doc_id: str
    meta: DocumentMeta
    sections: list[Section]


def _check_span_stream(raw: TaggedSpanDocument) -> None:
    if not raw.pages:
        raise MalformedSpanStream(f"{raw.doc_id}: document has zero pages")
    for page_no, page in enumerate(raw.pages):
        prev = -1
        for span in page:
            if span.y_order <= prev:
                raise MalformedSpanStream(
                    f"{raw.doc_id}: page {page_no}: y_order not strictly increasing"
                )
            prev = span.y_order


def _repeated_lines(raw: TaggedSpanDocument, threshold_pct: int) -> set[str]:
    # Running headers/footers: identical (whitespace-collapsed) lines present
    # on >= threshold% of pages. Needs >= 2 pages, otherwise everything on a
    # single-page document would qualify.
    if len(raw.pages) < 2:
        return set()
    pages_with_line: Counter[str] = Counter()
    for page in raw.pages:
        for key in {re.sub(r"\s+", " ", s.text).strip() for s in page if s.text.strip()}:
            pages_with_line[key] += 1
    n = len(raw.pages)
    return {
        key
        for key, count in pages_with_line.items()
        if count >= 2 and count * 100 >= threshold_pct * n
    }


def _is_heading(text: str, font_size: float, bold: bool, modal_size: float) -> bool:
    if font_size >= modal_size + HEADING_FONT_DELTA:
        return True
    return bold and len(text.split()) <= HEADING_MAX_WORDS


def _stub_meta(doc_id: str, sections: list[Section]) -> DocumentMeta:
    title = ""
    for section in sections:
        if section.heading:
            title = section.heading
            break
    if not title:
        for section in sections:
            if section.paragraphs:
                title = section.paragraphs[0][:80]
                break
    abstract = ""
    for section in sections:
        if re.match(r"abstract", section.heading, re.IGNORECASE):
            abstract = " ".join(section.paragraphs)
            break
    return DocumentMeta(doc_id=doc_id, title=title or doc_id, abstract=abstract)


def ingest_document(
    raw: TaggedSpanDocument,
    rules: CleaningRuleSet,
    meta: DocumentMeta | None = None,
) -> StructuredDocument:
    """Clean a tagged-span document and rebuild its section/paragraph structure.

    A span is a heading iff its font size is at least the modal body size plus
    1.5pt, or it is bold and at most 12 words; every other surviving span
    becomes one paragraph of the current section, in reading order.
    """
    _check_span_stream(raw)

    threshold = rules.repeated_line_threshold()
    dropped_lines = _repeated_lines(raw, threshold) if threshold is not None else set()

    # Phase 1: regex cleaning (min-length applies to body spans only, later,
    # so that short headings survive).
    cleaned: list[tuple[str, float, bool]] = []
    for page in raw.pages:
        for span in page:
            key = re.sub(r"\s+", " ", span.text).strip()
            if key in dropped_lines:
                continue
            text = _apply_regex_rules(span.text, rules)
            if not text:
                continue
            cleaned.append((text, span.font_size, span.bold))
    if not cleaned:
        raise EmptyAfterCleaning(f"{raw.doc_id}: no span survived cleaning")

    font_counts = Counter(fs for _, fs, _ in cleaned)
    top = max(font_counts.values())
    modal_size = min(fs for fs, count in font_counts.items() if count == top)

    min_len = _min_length(rules)
    sections: list[Section] = []
    for text, font_size, bold in cleaned:
        if _is_heading(text, font_size, bold, modal_size):
            sections.append(Section(heading=text, paragraphs=[]))
        else:
            if len(text) < min_len:
                continue
            if not sections:
                sections.append(Section(heading="", paragraphs=[]))
            sections[-1].paragraphs.append(text)
    if not any(s.heading or s.paragraphs for s in sections):
        raise EmptyAfterCleaning(f"{raw.doc_id}: no span survived cleaning")

    return StructuredDocument(
        doc_id=raw.doc_id,
        meta=meta if meta is not None else _stub_meta(raw.doc_id, sections),
        sections=sections,
    )


# --- interchange formats ---------------------------------------------------


def load_tagged_spans(source: str | Path | Mapping) -> TaggedSpanDocument:
    """Parse the tagged-span interchange JSON; empty spans are dropped here."""
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        data = source
    pages = []
    for page in data["pages"]:
        spans = [
            Span(
                text=s["text"],
                font_size=float(s["font_size"]),
                bold=bool(s["bold"]),
                y_order=int(s["y_order"]),
            )
            for s in page
            if s["text"]
        ]
        pages.append(spans)
    return TaggedSpanDocument(doc_id=data["doc_id"], pages=pages)


def structured_to_json(doc: StructuredDocument) -> str:
    """Canonical serialization; identical documents yield identical bytes."""
    payload = {
        "doc_id": doc.doc_id,
        "meta": {
            "doc_id": doc.meta.doc_id,
            "title": doc.meta.title,
            "abstract": doc.meta.abstract,
            "journal": doc.meta.journal,
            "year": doc.meta.year,
            "open_access": doc.meta.open_access,
        },
        "sections": [
            {"heading": s.heading, "paragraphs": list(s.paragraphs)} for s in doc.sections
        ],
    }
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def structured_from_json(text: str) -> StructuredDocument:
    data = json.loads(text)
    meta = data["meta"]
    return StructuredDocument(
        doc_id=data["doc_id"],
        meta=DocumentMeta(
            doc_id=meta["doc_id"],
            title=meta["title"],
            abstract=meta.get("abstract", ""),
            journal=meta.get("journal", ""),
            year=meta.get("year"),
            open_access=bool(meta.get("open_access", False)),
        ),
        sections=[
            Section(heading=s["heading"], paragraphs=list(s["paragraphs"]))
            for s in data["sections"]
        ],
    )


_TRUE = {"true", "1", "yes", "y"}


@dataclass(frozen=True)
class MetaReject:
    row: int
    reason: str
    data: Mapping[str, str]


def load_metadata(
    rows: Iterable[Mapping[str, str]],
) -> tuple[list[DocumentMeta], list[MetaReject]]:
    """Build DocumentMeta records from tabular rows; bad rows are reported,
    never silently dropped. Raises on a missing column or duplicate doc_id."""
    rows = list(rows)
    if rows:
        fields = set(rows[0].keys())
        missing = {"doc_id", "title"} - fields
        if missing:
            raise MissingColumn(f"metadata header missing column(s): {', '.join(sorted(missing))}")

    metas: list[DocumentMeta] = []
    rejects: list[MetaReject] = []
    seen: set[str] = set()
    for i, row in enumerate(rows, start=1):
        doc_id = (row.get("doc_id") or "").strip()
        title = (row.get("title") or "").strip()
        if not doc_id:
            rejects.append(MetaReject(i, "empty-doc-id", dict(row)))
            continue
        if not title:
            rejects.append(MetaReject(i, "empty-title", dict(row)))
            continue
        if doc_id in seen:
            raise DuplicateDocId(f"duplicate doc_id {doc_id!r} at row {i}")
        seen.add(doc_id)
        year_raw = (row.get("year") or "").strip()
        try:
            year = int(year_raw) if year_raw else None
        except ValueError:
            rejects.append(MetaReject(i, "bad-year", dict(row)))
            continue
        metas.append(
            DocumentMeta(
                doc_id=doc_id,
                title=title,
                abstract=(row.get("abstract") or "").strip(),
                journal=(row.get("journal") or "").strip(),
                year=year,
                open_access=(row.get("open_access") or "").strip().lower() in _TRUE,
            )
        )
    return metas, rejects


def read_metadata_csv(path: str | Path) -> tuple[list[DocumentMeta], list[MetaReject]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MissingColumn(f"{path}: empty metadata file")
        return load_metadata(list(reader))
