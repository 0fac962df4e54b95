"""Prompt assembly and the retrieval-augmented extraction/recommendation flow.

Prompt templates are reconstructions and therefore versioned: any template
edit must bump TEMPLATE_VERSION, which the golden tests enforce.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from .corpus import NER_LABELS, EntityLabel
from .errors import DataError
from .gateway import ChatBackend, ChatMessage, CompletionRequest, canonical_digest, complete
from .grammar import (
    ExtractionResult,
    gold_entities_by_doc,
    parse_extraction,
    render_extraction,
)
from .index import EmbedderPort, VectorIndex, embed, normalize_for_embedding

TEMPLATE_VERSION = "prompt-templates-v1"

MAX_FEW_SHOT = 8
DEFAULT_FEW_SHOT_K = 3


class ExemplarModeMismatch(DataError):
    pass


@dataclass(frozen=True)
class ShotMode:
    kind: str  # zero_shot | few_shot
    k: int = 0

    def __post_init__(self) -> None:
        if self.kind == "zero_shot":
            if self.k != 0:
                raise ValueError("zero_shot carries no exemplar count")
        elif self.kind == "few_shot":
            if not 1 <= self.k <= MAX_FEW_SHOT:
                raise ValueError(f"few_shot k must be in 1..{MAX_FEW_SHOT}")
        else:
            raise ValueError(f"unknown shot mode {self.kind!r}")

    @classmethod
    def zero(cls) -> "ShotMode":
        return cls("zero_shot")

    @classmethod
    def few(cls, k: int = DEFAULT_FEW_SHOT_K) -> "ShotMode":
        return cls("few_shot", k)

    @property
    def is_few(self) -> bool:
        return self.kind == "few_shot"

    def label(self) -> str:
        return self.kind if not self.is_few else f"few_shot:{self.k}"


def parse_shot_mode(text: str) -> ShotMode:
    text = text.strip().lower().replace("-", "_")
    if text in ("zero", "zero_shot"):
        return ShotMode.zero()
    m = re.fullmatch(r"(?:few|few_shot)(?::(\d+))?", text)
    if m:
        return ShotMode.few(int(m.group(1)) if m.group(1) else DEFAULT_FEW_SHOT_K)
    raise ValueError(f"cannot parse shot mode {text!r}")


_LABEL_DEFINITIONS: dict[EntityLabel, str] = {
    EntityLabel.MATERIAL: "the catalyst material studied (e.g. Cu nanowire arrays)",
    EntityLabel.CONTROL_METHOD: "the strategy used to tune catalyst behaviour (e.g. structure control, alloying, composite construction)",
    EntityLabel.PRODUCT: "a CO2 reduction product (e.g. CO, C2H4, C2H5OH, HCOOH)",
    EntityLabel.FARADAIC_EFFICIENCY: "the faradaic efficiency reported for a product, value with unit (e.g. 70%)",
    EntityLabel.ELECTROLYTE: "the electrolyte solution (e.g. 0.1 M KHCO3)",
    EntityLabel.VOLTAGE: "the applied potential (e.g. -0.9 V vs RHE)",
    EntityLabel.CURRENT_DENSITY: "the reported current density (e.g. 200 mA cm-2)",
    EntityLabel.CELL_SETUP: "the electrochemical cell configuration (e.g. H-cell, flow cell)",
}


def _ner_system_message() -> str:
    defs = "\n".join(f"- {label.display}: {_LABEL_DEFINITIONS[label]}" for label in NER_LABELS)
    order = ", ".join(label.display for label in NER_LABELS)
    return (
        "You extract entities from electrocatalytic CO2 reduction abstracts.\n"
        "Entity types:\n"
        f"{defs}\n"
        "Answer with exactly eight lines, one per entity type, in this order: "
        f"{order}.\n"
        "Each line has the form 'TYPE: value' with multiple values separated by '; '. "
        "Write 'TYPE: None' when the abstract does not mention that entity type."
    )


@dataclass(frozen=True)
class Exemplar:
    chunk_id: str
    text: str
    entities: Mapping[EntityLabel, list[str]]


@dataclass
class NerPromptBundle:
    abstract: str
    exemplars: list[Exemplar]
    rendered: list[ChatMessage]
    template_version: str


def exemplar_store_from_corpus(records) -> dict[str, ExtractionResult]:
    """Gold entities per document, keyed by doc_id (the default chunk id)."""
    return {
        doc_id: ExtractionResult(entities=entities)
        for doc_id, entities in gold_entities_by_doc(records).items()
    }


def retrieve_exemplars(
    abstract: str,
    k: int,
    index: VectorIndex,
    embedder: EmbedderPort,
    exemplar_store: Mapping[str, ExtractionResult],
) -> list[Exemplar]:
    """Nearest annotated chunks to the abstract, self-excluded, at most k.

    A chunk whose text equals the query abstract (under the embedder's text
    normalization) is the query itself leaking into its own prompt and is
    skipped. Chunks without a gold entry cannot serve as exemplars.
    """
    if not exemplar_store or len(index) == 0:
        return []
    query = embed(abstract, embedder)
    query_key = normalize_for_embedding(abstract)
    want = k + 8
    while True:
        hits = index.search_topk(query, want)
        exemplars = []
        for hit in hits:
            chunk = index.get(hit.chunk_id)
            if chunk is None or hit.chunk_id not in exemplar_store:
                continue
            if normalize_for_embedding(chunk.text) == query_key:
                continue
            gold = exemplar_store[hit.chunk_id]
            exemplars.append(Exemplar(hit.chunk_id, chunk.text, dict(gold.entities)))
            if len(exemplars) == k:
                return exemplars
        if len(hits) >= len(index):
            return exemplars
        want = min(len(index), want * 2)


def assemble_ner_prompt(
    abstract: str, exemplars: list[Exemplar], mode: ShotMode
) -> NerPromptBundle:
    """Render the extraction prompt; byte-deterministic given inputs and
    TEMPLATE_VERSION."""
    if not mode.is_few and exemplars:
        raise ExemplarModeMismatch("zero_shot prompt cannot carry exemplars")
    if mode.is_few and len(exemplars) > mode.k:
        raise ExemplarModeMismatch(f"few_shot k={mode.k} got {len(exemplars)} exemplars")
    messages = [ChatMessage("system", _ner_system_message())]
    for ex in exemplars:
        messages.append(
            ChatMessage(
                "user",
                "Example abstract:\n"
                f"{ex.text}\n\n"
                "Example entities:\n"
                f"{render_extraction(ex.entities)}",
            )
        )
    messages.append(
        ChatMessage(
            "user",
            f"Abstract:\n{abstract}\n\n"
            "Extract the eight entity types from the abstract above. "
            "Answer in the required format.",
        )
    )
    return NerPromptBundle(
        abstract=abstract,
        exemplars=list(exemplars),
        rendered=messages,
        template_version=TEMPLATE_VERSION,
    )


@dataclass(frozen=True)
class RecommendationQuery:
    product: str
    material_category: str
    control_method_type: str

    def __post_init__(self) -> None:
        for name, value in (
            ("product", self.product),
            ("material_category", self.material_category),
            ("control_method_type", self.control_method_type),
        ):
            if not value or not value.strip():
                raise ValueError(f"recommendation query field {name} must be non-empty")


@dataclass
class RecommendationAnswer:
    recommended_material: str
    control_method_description: str
    rationale: str
    raw_text: str


RECOMMEND_SYSTEM = (
    "You recommend catalyst materials for electrocatalytic CO2 reduction. "
    "Given a target product, a material category and a control method type, "
    "name the most suitable catalyst material and describe the control or "
    "preparation method to use."
)


def assemble_recommendation_prompt(q: RecommendationQuery) -> list[ChatMessage]:
    """Fixed recommendation template over the (product, category, method) triple."""
    return [
        ChatMessage("system", RECOMMEND_SYSTEM),
        ChatMessage(
            "user",
            f"Input: {q.product}, {q.material_category}, {q.control_method_type}\n"
            "Which catalyst material is most suitable for producing the target "
            "product, and which control method should be used?",
        ),
    ]


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_MATERIAL_SENTENCE = re.compile(r"\b(?:material|catalyst)\b", re.IGNORECASE)
_IS_TAIL = re.compile(r".*\bis\b\s+(.+?)\s*$", re.DOTALL)


def parse_recommendation(raw: str) -> RecommendationAnswer:
    """Heuristic split of a free-form answer; raw text is always preserved and
    an unparseable answer degrades to an empty recommended_material."""
    sentences = [s.strip() for s in _SENTENCE_SPLIT.split(raw.strip()) if s.strip()]
    material = ""
    used: set[int] = set()
    for i, sentence in enumerate(sentences):
        if _MATERIAL_SENTENCE.search(sentence) and "control method" not in sentence.lower():
            m = _IS_TAIL.match(sentence)
            if m:
                material = m.group(1).rstrip(".").strip()
                used.add(i)
                break
    control_parts = []
    for i, sentence in enumerate(sentences):
        if i not in used and "control method" in sentence.lower():
            control_parts.append(sentence)
            used.add(i)
    rationale = " ".join(s for i, s in enumerate(sentences) if i not in used)
    return RecommendationAnswer(
        recommended_material=material,
        control_method_description=" ".join(control_parts),
        rationale=rationale,
        raw_text=raw,
    )


# --- orchestration ----------------------------------------------------------


def _fixed_clock() -> str:
    return "1970-01-01T00:00:00Z"


@dataclass
class ExtractionSettings:
    mode: ShotMode
    model: str
    temperature: float = 0.0
    max_tokens: int = 512


@dataclass
class PipelinePorts:
    backend: ChatBackend
    index: VectorIndex | None = None
    embedder: EmbedderPort | None = None
    exemplar_store: Mapping[str, ExtractionResult] | None = None
    clock: Callable[[], str] = _fixed_clock


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def extract_entities(
    abstract: str,
    settings: ExtractionSettings,
    ports: PipelinePorts,
    item_id: str = "",
) -> tuple[ExtractionResult, dict]:
    """retrieve -> assemble -> complete -> parse, with full provenance.

    Returns (result, run_record). On a gateway failure the run record is
    still produced (status failed, partial provenance) and the error
    propagates; no result is fabricated.
    """
    started = ports.clock()
    if settings.mode.is_few:
        if ports.index is None or ports.embedder is None or ports.exemplar_store is None:
            raise ExemplarModeMismatch("few_shot extraction needs index, embedder and exemplar store")
        exemplars = retrieve_exemplars(
            abstract, settings.mode.k, ports.index, ports.embedder, ports.exemplar_store
        )
    else:
        exemplars = []
    bundle = assemble_ner_prompt(abstract, exemplars, settings.mode)
    req = CompletionRequest(
        model=settings.model,
        messages=tuple(bundle.rendered),
        temperature=settings.temperature,
        max_tokens=settings.max_tokens,
        request_tag=f"ner:{item_id}" if item_id else "ner",
    )
    record = {
        "item_id": item_id,
        "kind": "ner",
        "abstract_digest": text_digest(abstract),
        "prompt_digest": canonical_digest(req),
        "exemplar_ids": [ex.chunk_id for ex in exemplars],
        "template_version": bundle.template_version,
        "model": settings.model,
        "mode": settings.mode.label(),
        "started_at": started,
    }
    try:
        resp = complete(req, ports.backend)
    except Exception as exc:
        record.update({"status": "failed", "error": str(exc), "finished_at": ports.clock()})
        raise
    result = parse_extraction(resp.text)
    record.update(
        {
            "status": "ok",
            "raw_text": resp.text,
            "result": result.to_dict(),
            "finished_at": ports.clock(),
        }
    )
    return result, record


def recommend(
    q: RecommendationQuery,
    settings: ExtractionSettings,
    ports: PipelinePorts,
    item_id: str = "",
) -> tuple[RecommendationAnswer, dict]:
    """Run one recommendation query through the gateway and parse the answer."""
    started = ports.clock()
    messages = assemble_recommendation_prompt(q)
    req = CompletionRequest(
        model=settings.model,
        messages=tuple(messages),
        temperature=settings.temperature,
        max_tokens=settings.max_tokens,
        request_tag=f"recommend:{item_id}" if item_id else "recommend",
    )
    record = {
        "item_id": item_id,
        "kind": "recommend",
        "query": {
            "product": q.product,
            "material_category": q.material_category,
            "control_method_type": q.control_method_type,
        },
        "prompt_digest": canonical_digest(req),
        "template_version": TEMPLATE_VERSION,
        "model": settings.model,
        "started_at": started,
    }
    try:
        resp = complete(req, ports.backend)
    except Exception as exc:
        record.update({"status": "failed", "error": str(exc), "finished_at": ports.clock()})
        raise
    answer = parse_recommendation(resp.text)
    record.update(
        {
            "status": "ok",
            "raw_text": resp.text,
            "answer": {
                "recommended_material": answer.recommended_material,
                "control_method_description": answer.control_method_description,
                "rationale": answer.rationale,
            },
            "finished_at": ports.clock(),
        }
    )
    return answer, record


def run_record_line(record: Mapping) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def extract_batch(
    items: list[tuple[str, str]],
    settings: ExtractionSettings,
    ports: PipelinePorts,
    out_path: str | Path | None = None,
) -> list[dict]:
    """Extract (item_id, abstract) pairs; optionally write run records as JSONL."""
    records = []
    for item_id, abstract in items:
        _, record = extract_entities(abstract, settings, ports, item_id=item_id)
        records.append(record)
    if out_path is not None:
        Path(out_path).write_text(
            "".join(run_record_line(r) + "\n" for r in records), encoding="utf-8"
        )
    return records
