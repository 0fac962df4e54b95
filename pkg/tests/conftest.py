"""Shared fixture builders: synthetic evaluation items, scripted ablation
transcripts, and the tiny exemplar corpus the few-shot cells retrieve from."""

from __future__ import annotations

import re
from pathlib import Path

import pytest

from catminer.corpus import NER_LABELS, EntityLabel, EntityRecord
from catminer.evaluation import EvalItem
from catminer.gateway import CallableBackend, CompletionRequest, Transcript, TranscriptBackend
from catminer.grammar import render_extraction
from catminer.index import HashEmbedder, IndexedChunk, VectorIndex, embed
from catminer.ingest import DocumentMeta, Section, StructuredDocument
from catminer.rag import exemplar_store_from_corpus

DATA_DIR = Path(__file__).parent / "data"

# A plausible single answer value per category, used by scripted model output.
CATEGORY_VALUES = {
    EntityLabel.MATERIAL: "Cu nanowire",
    EntityLabel.CONTROL_METHOD: "structure control",
    EntityLabel.PRODUCT: "C2H4",
    EntityLabel.FARADAIC_EFFICIENCY: "70%",
    EntityLabel.ELECTROLYTE: "0.1 M KHCO3",
    EntityLabel.VOLTAGE: "-0.9 V vs RHE",
    EntityLabel.CURRENT_DENSITY: "200 mA cm-2",
    EntityLabel.CELL_SETUP: "H-cell",
}


def make_eval_items(per_category: int = 20, prefix: str = "ab") -> list[EvalItem]:
    """Synthetic abstracts, 20 per category by default, ids embedded in the
    text so scripted backends can recognize the item inside a prompt."""
    items = []
    for label in NER_LABELS:
        for i in range(1, per_category + 1):
            item_id = f"{prefix}-{label.value}-{i:02d}"
            items.append(
                EvalItem(
                    item_id=item_id,
                    category=label,
                    abstract=(
                        f"[item:{item_id}] Synthetic abstract {i} on electrocatalytic "
                        f"CO2 reduction, focused on {label.display.lower()} reporting. "
                        "Copper-based electrodes were studied in aqueous media."
                    ),
                )
            )
    return items


_ITEM_TOKEN = re.compile(r"\[item:([A-Za-z0-9_-]+)\]")


def make_scripted_backend(answers_by_key):
    """Backend whose reply depends on (model, shot kind, item id); answers_by_key
    maps (model, 'few'|'zero', item_id) -> completion text."""

    def respond(req: CompletionRequest) -> str:
        match = _ITEM_TOKEN.search(req.messages[-1].content)
        if not match:
            raise AssertionError("prompt has no item token")
        shots = "few" if any("Example abstract:" in m.content for m in req.messages) else "zero"
        return answers_by_key[(req.model, shots, match.group(1))]

    return CallableBackend(respond, backend_id="scripted-eval")


def answer_text(category: EntityLabel, empty: bool) -> str:
    entities = {label: [] for label in NER_LABELS}
    if not empty:
        entities[category] = [CATEGORY_VALUES[category]]
    return render_extraction(entities)


def make_exemplar_corpus(n_docs: int = 6):
    """Tiny annotated corpus + structured docs + index chunks for few-shot
    retrieval in tests. Chunk ids are doc ids."""
    docs = []
    records = []
    for i in range(1, n_docs + 1):
        doc_id = f"ex{i:02d}"
        abstract = (
            f"Exemplar study {i}: copper oxide catalysts for CO2 reduction in "
            f"bicarbonate electrolyte, variant {i}."
        )
        docs.append(
            StructuredDocument(
                doc_id=doc_id,
                meta=DocumentMeta(doc_id=doc_id, title=f"Exemplar {i}", abstract=abstract),
                sections=[Section(heading="Abstract", paragraphs=[abstract])],
            )
        )
        sentence = f"The copper oxide catalyst {i} converted CO2 to CO."
        records.append(
            EntityRecord(
                entity_text=f"copper oxide catalyst {i}",
                label=EntityLabel.MATERIAL,
                rank=1,
                context_sentence=sentence,
                doc_id=doc_id,
            )
        )
        records.append(
            EntityRecord(
                entity_text="CO",
                label=EntityLabel.PRODUCT,
                rank=1,
                context_sentence=sentence,
                doc_id=doc_id,
            )
        )
    return docs, records


@pytest.fixture
def exemplar_setup():
    docs, records = make_exemplar_corpus()
    embedder = HashEmbedder()
    index = VectorIndex(dim=embedder.dim)
    for doc in docs:
        text = f"{doc.meta.title} {doc.meta.abstract}"
        index.upsert(
            IndexedChunk(
                chunk_id=doc.doc_id,
                doc_id=doc.doc_id,
                text=text,
                vector=embed(text, embedder),
            )
        )
    return {
        "docs": docs,
        "records": records,
        "embedder": embedder,
        "index": index,
        "store": exemplar_store_from_corpus(records),
    }


def recording_backend(path: Path, answers_by_key) -> TranscriptBackend:
    return TranscriptBackend(
        Transcript.load(path, mode="record"), inner=make_scripted_backend(answers_by_key)
    )


def replay_backend(path: Path) -> TranscriptBackend:
    return TranscriptBackend(Transcript.load(path, mode="replay"))
