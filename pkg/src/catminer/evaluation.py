"""Per-category Count/Correct/Existence/Modified-Correct/Modified-Accuracy
scoring over expert-judged items, and the fine-tune x shot-mode ablation
runner.

Modified Correct credits the model both for a correct answer on an entity
that exists in the text and for an empty answer on an entity that does not;
Modified Accuracy is Modified Correct / Count, kept as an exact rational
until the presentation edge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import NER_LABELS, EntityLabel
from .errors import DataError
from .rag import ExtractionSettings, PipelinePorts, ShotMode, extract_entities


class EmptyItemSet(DataError):
    pass


class IncompleteJudgments(DataError):
    def __init__(self, missing: Sequence[tuple[str, str]]):
        preview = ", ".join(f"{c}:{i}" for c, i in list(missing)[:5])
        suffix = "..." if len(missing) > 5 else ""
        super().__init__(f"{len(missing)} judgment(s) missing: {preview}{suffix}")
        self.missing = list(missing)


@dataclass(frozen=True)
class Judgment:
    answer_correct: bool
    entity_exists: bool


@dataclass(frozen=True)
class JudgedItem:
    item_id: str
    category: EntityLabel
    llm_answer: tuple[str, ...]
    judgment: Judgment
    judged_by: str = ""
    judged_at: str = ""


@dataclass(frozen=True)
class CategoryMetrics:
    category: EntityLabel | None  # None marks the OVERALL roll-up
    count: int
    correct: int
    existence: int
    modified_correct: int
    modified_accuracy: Fraction


def format_pct(value: Fraction) -> str:
    """Render a rational as a percentage with exactly two decimals.

    Rounding is half-even: 85/160 renders 53.12%, 59/160 renders 36.88%.
    """
    pct = Decimal(value.numerator) * 100 / Decimal(value.denominator)
    return f"{pct.quantize(Decimal('0.01'), rounding=ROUND_HALF_EVEN)}%"


def score_category(items: Sequence[JudgedItem], category: EntityLabel) -> CategoryMetrics:
    """Roll one category's judged items up into the Table-style metrics row."""
    if not items:
        raise EmptyItemSet(f"no judged items for category {category.value}")
    for item in items:
        if item.category != category:
            raise ValueError(
                f"item {item.item_id!r} has category {item.category.value}, expected {category.value}"
            )
    count = len(items)
    existence = sum(1 for i in items if i.judgment.entity_exists)
    correct = sum(1 for i in items if i.judgment.answer_correct and i.judgment.entity_exists)
    credited_empty = sum(
        1 for i in items if not i.judgment.entity_exists and not i.llm_answer
    )
    modified_correct = correct + credited_empty
    return CategoryMetrics(
        category=category,
        count=count,
        correct=correct,
        existence=existence,
        modified_correct=modified_correct,
        modified_accuracy=Fraction(modified_correct, count),
    )


def score_items(items: Iterable[JudgedItem]) -> dict[EntityLabel, CategoryMetrics]:
    """Group judged items by category and score each, in canonical order."""
    by_category: dict[EntityLabel, list[JudgedItem]] = {}
    for item in items:
        by_category.setdefault(item.category, []).append(item)
    return {
        label: score_category(by_category[label], label)
        for label in NER_LABELS
        if label in by_category
    }


def aggregate(per_category: Sequence[CategoryMetrics]) -> CategoryMetrics:
    """Fieldwise sums over disjoint categories; the OVERALL row."""
    if not per_category:
        raise EmptyItemSet("nothing to aggregate")
    count = sum(m.count for m in per_category)
    modified_correct = sum(m.modified_correct for m in per_category)
    return CategoryMetrics(
        category=None,
        count=count,
        correct=sum(m.correct for m in per_category),
        existence=sum(m.existence for m in per_category),
        modified_correct=modified_correct,
        modified_accuracy=Fraction(modified_correct, count),
    )


# --- judgment fixture files --------------------------------------------------


def judged_item_to_dict(item: JudgedItem) -> dict:
    return {
        "item_id": item.item_id,
        "category": item.category.value,
        "llm_answer": list(item.llm_answer),
        "judgment": {
            "answer_correct": item.judgment.answer_correct,
            "entity_exists": item.judgment.entity_exists,
        },
        "judged_by": item.judged_by,
        "judged_at": item.judged_at,
    }


def judged_item_from_dict(data: Mapping) -> JudgedItem:
    judgment = data["judgment"]
    return JudgedItem(
        item_id=str(data["item_id"]),
        category=EntityLabel(data["category"]),
        llm_answer=tuple(data.get("llm_answer") or ()),
        judgment=Judgment(
            answer_correct=bool(judgment["answer_correct"]),
            entity_exists=bool(judgment["entity_exists"]),
        ),
        judged_by=data.get("judged_by", ""),
        judged_at=data.get("judged_at", ""),
    )


def read_judged_items(path: str | Path) -> list[JudgedItem]:
    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            items.append(judged_item_from_dict(json.loads(line)))
    return items


def write_judged_items(items: Iterable[JudgedItem], path: str | Path) -> None:
    Path(path).write_text(
        "".join(json.dumps(judged_item_to_dict(i), ensure_ascii=False) + "\n" for i in items),
        encoding="utf-8",
    )


# --- ablation ----------------------------------------------------------------


MODEL_VARIANTS = ("baseline", "fine_tuned")


@dataclass(frozen=True)
class AblationConfig:
    model_variant: str  # baseline | fine_tuned
    shot_mode: ShotMode

    def __post_init__(self) -> None:
        if self.model_variant not in MODEL_VARIANTS:
            raise ValueError(f"unknown model variant {self.model_variant!r}")

    @property
    def key(self) -> str:
        return f"{self.model_variant}/{self.shot_mode.label()}"

    @property
    def display(self) -> str:
        shots = "few-shot" if self.shot_mode.is_few else "zero-shot"
        variant = "fine-tuned" if self.model_variant == "fine_tuned" else "baseline"
        return f"{variant} + {shots}"


def canonical_grid(k: int = 3) -> list[AblationConfig]:
    """The four-cell matrix in canonical order: baseline/zero, baseline/few,
    fine_tuned/zero, fine_tuned/few."""
    return [
        AblationConfig("baseline", ShotMode.zero()),
        AblationConfig("baseline", ShotMode.few(k)),
        AblationConfig("fine_tuned", ShotMode.zero()),
        AblationConfig("fine_tuned", ShotMode.few(k)),
    ]


def _canonical_order_key(config: AblationConfig) -> tuple[int, int]:
    return (MODEL_VARIANTS.index(config.model_variant), 1 if config.shot_mode.is_few else 0)


@dataclass(frozen=True)
class EvalItem:
    item_id: str
    category: EntityLabel
    abstract: str


def read_eval_items(path: str | Path) -> list[EvalItem]:
    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            data = json.loads(line)
            items.append(
                EvalItem(
                    item_id=str(data["item_id"]),
                    category=EntityLabel(data["category"]),
                    abstract=data["abstract"],
                )
            )
    return items


class JudgmentSource:
    """Judgments keyed by (config key, item id); fixture-file or review-log
    backed. Missing pairs are collected, never silently skipped."""

    def __init__(self, entries: Mapping[tuple[str, str], Judgment]):
        self._entries = dict(entries)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "JudgmentSource":
        entries = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            judgment = data["judgment"]
            entries[(data["config"], str(data["item_id"]))] = Judgment(
                answer_correct=bool(judgment["answer_correct"]),
                entity_exists=bool(judgment["entity_exists"]),
            )
        return cls(entries)

    def lookup(self, config_key: str, item_id: str) -> Judgment | None:
        return self._entries.get((config_key, item_id))


@dataclass(frozen=True)
class AblationRow:
    config: AblationConfig
    item_count: int
    correct: int
    modified_correct: int
    modified_accuracy: Fraction


@dataclass
class AblationReport:
    rows: list[AblationRow]
    per_category: dict[str, dict[EntityLabel, CategoryMetrics]] = field(default_factory=dict)


def run_ablation(
    grid: Sequence[AblationConfig],
    items: Sequence[EvalItem],
    model_map: Mapping[str, str],
    ports: PipelinePorts,
    judgments: JudgmentSource,
    temperature: float = 0.0,
    max_tokens: int = 512,
) -> AblationReport:
    """Run the full extraction pipeline per config over the identical item set
    and score each cell with its own judgments.

    Raises IncompleteJudgments listing every missing (config, item) pair;
    partial reports are never produced.
    """
    if not items:
        raise EmptyItemSet("ablation needs a non-empty item set")
    ordered = sorted(grid, key=_canonical_order_key)

    # Fail before any gateway call if judgments are incomplete.
    missing = [
        (config.key, item.item_id)
        for config in ordered
        for item in items
        if judgments.lookup(config.key, item.item_id) is None
    ]
    if missing:
        raise IncompleteJudgments(missing)

    rows = []
    per_category_all: dict[str, dict[EntityLabel, CategoryMetrics]] = {}
    for config in ordered:
        settings = ExtractionSettings(
            mode=config.shot_mode,
            model=model_map[config.model_variant],
            temperature=temperature,
            max_tokens=max_tokens,
        )
        judged: list[JudgedItem] = []
        for item in items:
            result, _ = extract_entities(item.abstract, settings, ports, item_id=item.item_id)
            judged.append(
                JudgedItem(
                    item_id=item.item_id,
                    category=item.category,
                    llm_answer=tuple(result.values_for(item.category)),
                    judgment=judgments.lookup(config.key, item.item_id),
                )
            )
        per_category = score_items(judged)
        overall = aggregate(list(per_category.values()))
        per_category_all[config.key] = per_category
        rows.append(
            AblationRow(
                config=config,
                item_count=overall.count,
                correct=overall.correct,
                modified_correct=overall.modified_correct,
                modified_accuracy=overall.modified_accuracy,
            )
        )
    return AblationReport(rows=rows, per_category=per_category_all)
