"""Instruction-tuning dataset compilation: recommendation and extraction
samples, exact dedup + cleanliness filtering, JSONL emission with a training
manifest carrying the LoRA hyperparameters."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import EntityRecord
from .errors import DataError
from .grammar import gold_entities_by_doc, render_extraction
from .ingest import StructuredDocument

BUILDER_VERSION = "builder-v1"

MIN_OUTPUT_CHARS = 10

_CONTROL_CHARS = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f]")


class UnresolvedDocId(DataError):
    pass


class DestinationUnwritable(DataError):
    pass


@dataclass(frozen=True)
class ProductEntry:
    name: str
    faradaic_efficiency: str = ""


@dataclass(frozen=True)
class ProcessRecord:
    """One structured catalytic process: material, control method, ranked
    products, and the optional condition fields."""

    doc_id: str
    material: str
    control_method: str
    products: tuple[ProductEntry, ...]
    cell_setup: str = ""
    electrolyte: str = ""
    synthesis_method: str = ""
    current_density: str = ""
    voltage: str = ""

    def __post_init__(self) -> None:
        if not self.material:
            raise ValueError("process record needs a material")
        if not 1 <= len(self.products) <= 3:
            raise ValueError("process record needs 1..3 products")


@dataclass(frozen=True)
class InstructionSample:
    instruction: str
    input: str
    output: str
    task_tag: str  # ner | recommend
    doc_id: str = ""
    builder_version: str = BUILDER_VERSION


@dataclass(frozen=True)
class TrainingManifest:
    """Fine-tuning hyperparameters emitted next to the dataset; training
    itself happens elsewhere."""

    base_model: str = ""
    dataset_digest: str = ""
    batch_size: int = 10
    learning_rate: float = 3e-4
    lora_r: int = 8
    lora_alpha: int = 32
    lora_dropout: float = 0.1


# --- material categories ----------------------------------------------------

# Keyword rules applied in order; first hit wins. The category taxonomy is
# configuration, not ground truth, so callers can replace it wholesale.
DEFAULT_CATEGORY_RULES: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("Alloys/composites of two or more metals", ("alloy", "bimetallic", "intermetallic")),
    ("Metal oxide", ("oxide", "o2", "o3", "o4")),
    (
        "Composites consisting of metal and carbon",
        ("carbon", "graphene", "graphite", "cnt", "n-doped", "nitrogen-doped", "/c"),
    ),
)
SINGLE_METAL_CATEGORY = "Single metal"
FALLBACK_CATEGORY = "Other"


@dataclass
class MaterialVocabulary:
    rules: Sequence[tuple[str, tuple[str, ...]]] = DEFAULT_CATEGORY_RULES
    overrides: Mapping[str, str] = field(default_factory=dict)

    def classify(self, material: str) -> str:
        key = material.strip().lower()
        if key in self.overrides:
            return self.overrides[key]
        for category, keywords in self.rules:
            if any(kw in key for kw in keywords):
                return category
        if len(key.split()) == 1:
            return SINGLE_METAL_CATEGORY
        return FALLBACK_CATEGORY


RECOMMEND_INSTRUCTION = (
    "Given a target CO2 reduction product, a catalyst material category and a "
    "control method type, recommend the most suitable catalyst material and "
    "the control method to use."
)

NER_INSTRUCTION = (
    "Extract the electrocatalytic CO2 reduction entities from the abstract. "
    "Answer with one line per entity type in the required format, writing "
    "'None' for absent types."
)


def build_recommendation_samples(
    records: Iterable[ProcessRecord],
    vocabulary: MaterialVocabulary | None = None,
) -> list[InstructionSample]:
    """One recommendation sample per process record, keyed on the rank-1
    product; the answer names the material and its control method."""
    vocab = vocabulary or MaterialVocabulary()
    samples = []
    for record in records:
        product = record.products[0].name
        category = vocab.classify(record.material)
        samples.append(
            InstructionSample(
                instruction=RECOMMEND_INSTRUCTION,
                input=f"{product}, {category}, {record.control_method}",
                output=(
                    "Based on the given information, the most suitable catalyst "
                    f"material for producing {product} is {record.material}. "
                    f"The control method that should be used is {record.control_method}."
                ),
                task_tag="recommend",
                doc_id=record.doc_id,
            )
        )
    return samples


def build_ner_samples(
    corpus: Iterable[EntityRecord],
    docs: Iterable[StructuredDocument],
) -> list[InstructionSample]:
    """Group gold entities by document and render one extraction sample per
    document whose abstract is known. Synthesis-method records are corpus-only
    and do not appear in the eight-label output."""
    corpus = list(corpus)
    doc_map = {doc.doc_id: doc for doc in docs}
    for record in corpus:
        if record.doc_id not in doc_map:
            raise UnresolvedDocId(f"corpus references unknown doc_id {record.doc_id!r}")
    gold = gold_entities_by_doc(corpus)
    order: list[str] = []
    for record in corpus:
        if record.doc_id in gold and record.doc_id not in order:
            order.append(record.doc_id)
    return [
        InstructionSample(
            instruction=NER_INSTRUCTION,
            input=doc_map[doc_id].meta.abstract,
            output=render_extraction(gold[doc_id]),
            task_tag="ner",
            doc_id=doc_id,
        )
        for doc_id in order
    ]


@dataclass(frozen=True)
class DroppedSample:
    index: int
    reason: str  # duplicate | empty-output | short-output | control-chars
    sample: InstructionSample


def dedup_filter(
    samples: Sequence[InstructionSample],
) -> tuple[list[InstructionSample], list[DroppedSample]]:
    """Drop unclean samples and collapse exact (instruction, input, output)
    duplicates to their first occurrence. Idempotent;
    |kept| + |drops| == |input|."""
    kept: list[InstructionSample] = []
    drops: list[DroppedSample] = []
    seen: set[tuple[str, str, str]] = set()
    for i, sample in enumerate(samples):
        if not sample.output:
            drops.append(DroppedSample(i, "empty-output", sample))
            continue
        if len(sample.output) < MIN_OUTPUT_CHARS:
            drops.append(DroppedSample(i, "short-output", sample))
            continue
        if any(
            _CONTROL_CHARS.search(text)
            for text in (sample.instruction, sample.input, sample.output)
        ):
            drops.append(DroppedSample(i, "control-chars", sample))
            continue
        key = (sample.instruction, sample.input, sample.output)
        if key in seen:
            drops.append(DroppedSample(i, "duplicate", sample))
            continue
        seen.add(key)
        kept.append(sample)
    return kept, drops


def dataset_lines(samples: Iterable[InstructionSample]) -> str:
    return "".join(
        json.dumps(
            {"instruction": s.instruction, "input": s.input, "output": s.output},
            ensure_ascii=False,
        )
        + "\n"
        for s in samples
    )


def emit_dataset(
    samples: Sequence[InstructionSample],
    manifest: TrainingManifest,
    destination: str | Path,
) -> tuple[Path, Path]:
    """Write dataset.jsonl plus manifest.json; the manifest's dataset_digest is
    the content digest of the dataset file, so re-emitting identical samples
    yields identical bytes."""
    if not samples:
        raise ValueError("refusing to emit an empty dataset")
    dest = Path(destination)
    try:
        dest.mkdir(parents=True, exist_ok=True)
        dataset_path = dest / "dataset.jsonl"
        payload = dataset_lines(samples)
        dataset_path.write_text(payload, encoding="utf-8")
        digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
        manifest_path = dest / "manifest.json"
        manifest_path.write_text(
            json.dumps(
                {
                    "base_model": manifest.base_model,
                    "dataset_digest": digest,
                    "batch_size": manifest.batch_size,
                    "learning_rate": manifest.learning_rate,
                    "lora_r": manifest.lora_r,
                    "lora_alpha": manifest.lora_alpha,
                    "lora_dropout": manifest.lora_dropout,
                },
                sort_keys=True,
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise DestinationUnwritable(f"cannot write dataset to {destination}: {exc}") from exc
    return dataset_path, manifest_path


def read_process_records(path: str | Path) -> list[ProcessRecord]:
    """Load structured process records from JSONL."""
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        records.append(
            ProcessRecord(
                doc_id=data["doc_id"],
                material=data["material"],
                control_method=data["control_method"],
                products=tuple(
                    ProductEntry(p["name"], p.get("faradaic_efficiency", ""))
                    for p in data["products"]
                ),
                cell_setup=data.get("cell_setup", ""),
                electrolyte=data.get("electrolyte", ""),
                synthesis_method=data.get("synthesis_method", ""),
                current_density=data.get("current_density", ""),
                voltage=data.get("voltage", ""),
            )
        )
    return records
