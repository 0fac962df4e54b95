"""Embedded run/judgment store: an append-only JSONL event log plus an
in-memory projection rebuilt at startup.

Judgments are acknowledged only after the event line is flushed and fsynced,
they are never deleted, and corrections append a superseding version (latest
wins in metrics, every version stays in the audit trail).
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import NER_LABELS, EntityLabel
from .errors import DataError
from .evaluation import CategoryMetrics, JudgedItem, Judgment, score_category
from .grammar import parse_extraction

RUN_KINDS = ("ner", "recommend", "ablation")
RUN_STATUSES = ("running", "complete", "failed")


class InvalidConfig(DataError):
    pass


class UnknownRun(DataError):
    pass


class UnknownItem(DataError):
    pass


class RunNotComplete(DataError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class JudgmentRecord:
    version: int
    answer_correct: bool
    entity_exists: bool
    reviewer: str
    judged_at: str


@dataclass
class ReviewItem:
    item_id: str
    run_id: str
    category: EntityLabel | None
    source_text: str
    raw_text: str | None = None
    answers: dict[str, list[str]] | None = None
    judgments: list[JudgmentRecord] = field(default_factory=list)

    @property
    def judged(self) -> bool:
        return bool(self.judgments)

    @property
    def latest(self) -> JudgmentRecord | None:
        return self.judgments[-1] if self.judgments else None

    def llm_answer(self) -> tuple[str, ...]:
        if self.category is None or not self.answers:
            return ()
        return tuple(self.answers.get(self.category.value, ()))


@dataclass
class Run:
    run_id: str
    kind: str
    config: dict
    item_ids: list[str]
    status: str
    created_at: str
    idempotency_key: str = ""


@dataclass(frozen=True)
class ItemSeed:
    """Item source for run creation; raw_text/answers may be pre-computed
    (seeded review runs) or attached later by the batch pipeline."""

    source_text: str
    category: EntityLabel | None = None
    item_id: str = ""
    raw_text: str | None = None
    answers: Mapping[str, list[str]] | None = None


class WorkbenchStore:
    """Single-writer, many-reader store over one events.jsonl file."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.path = self.directory / "events.jsonl"
        self._lock = threading.Lock()
        self.runs: dict[str, Run] = {}
        self.items: dict[str, ReviewItem] = {}
        self._by_key: dict[str, str] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._apply(json.loads(line))

    # -- event plumbing -------------------------------------------------------

    def _append(self, event: dict, durable: bool = False) -> None:
        line = json.dumps(event, sort_keys=True, ensure_ascii=False)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            if durable:
                os.fsync(fh.fileno())
        self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event["type"]
        if kind == "run_created":
            data = event["run"]
            run = Run(
                run_id=data["run_id"],
                kind=data["kind"],
                config=data["config"],
                item_ids=list(data["item_ids"]),
                status=data["status"],
                created_at=data["created_at"],
                idempotency_key=data.get("idempotency_key", ""),
            )
            self.runs[run.run_id] = run
            if run.idempotency_key:
                self._by_key[run.idempotency_key] = run.run_id
        elif kind == "item_added":
            data = event["item"]
            category = EntityLabel(data["category"]) if data.get("category") else None
            self.items[data["item_id"]] = ReviewItem(
                item_id=data["item_id"],
                run_id=data["run_id"],
                category=category,
                source_text=data["source_text"],
                raw_text=data.get("raw_text"),
                answers=data.get("answers"),
            )
        elif kind == "item_result":
            item = self.items[event["item_id"]]
            item.raw_text = event["raw_text"]
            item.answers = event["answers"]
        elif kind == "run_status":
            self.runs[event["run_id"]].status = event["status"]
        elif kind == "judgment":
            self.items[event["item_id"]].judgments.append(
                JudgmentRecord(
                    version=event["version"],
                    answer_correct=event["answer_correct"],
                    entity_exists=event["entity_exists"],
                    reviewer=event["reviewer"],
                    judged_at=event["judged_at"],
                )
            )

    # -- runs ------------------------------------------------------------------

    def create_run(
        self,
        kind: str,
        config: Mapping,
        items: Iterable[ItemSeed],
        idempotency_key: str = "",
    ) -> Run:
        """Persist a run and its items before anything else happens to them.
        The same idempotency key returns the already-created run."""
        items = list(items)
        if kind not in RUN_KINDS:
            raise InvalidConfig(f"unknown run kind {kind!r}")
        if not items:
            raise InvalidConfig("item source is empty")
        with self._lock:
            if idempotency_key and idempotency_key in self._by_key:
                return self.runs[self._by_key[idempotency_key]]
            run_id = uuid.uuid4().hex[:12]
            seeds = []
            for i, seed in enumerate(items, start=1):
                item_id = seed.item_id or f"{run_id}-{i:04d}"
                if item_id in self.items:
                    raise InvalidConfig(f"duplicate item_id {item_id!r}")
                answers = dict(seed.answers) if seed.answers is not None else None
                if answers is None and seed.raw_text is not None:
                    answers = parse_extraction(seed.raw_text).to_dict()
                seeds.append((item_id, seed, answers))
            complete = all(
                seed.raw_text is not None or answers is not None for _, seed, answers in seeds
            )
            self._append(
                {
                    "type": "run_created",
                    "run": {
                        "run_id": run_id,
                        "kind": kind,
                        "config": dict(config),
                        "item_ids": [item_id for item_id, _, _ in seeds],
                        "status": "complete" if complete else "running",
                        "created_at": _now(),
                        "idempotency_key": idempotency_key,
                    },
                }
            )
            for item_id, seed, answers in seeds:
                self._append(
                    {
                        "type": "item_added",
                        "item": {
                            "item_id": item_id,
                            "run_id": run_id,
                            "category": seed.category.value if seed.category else None,
                            "source_text": seed.source_text,
                            "raw_text": seed.raw_text,
                            "answers": answers,
                        },
                    }
                )
            return self.runs[run_id]

    def get_run(self, run_id: str) -> Run:
        if run_id not in self.runs:
            raise UnknownRun(f"unknown run {run_id!r}")
        return self.runs[run_id]

    def find_run_by_key(self, idempotency_key: str) -> Run | None:
        run_id = self._by_key.get(idempotency_key)
        return self.runs[run_id] if run_id else None

    def add_result(self, item_id: str, raw_text: str, answers: Mapping[str, list[str]] | None = None) -> None:
        if item_id not in self.items:
            raise UnknownItem(f"unknown item {item_id!r}")
        if answers is None:
            answers = parse_extraction(raw_text).to_dict()
        with self._lock:
            self._append(
                {"type": "item_result", "item_id": item_id, "raw_text": raw_text, "answers": dict(answers)}
            )

    def set_run_status(self, run_id: str, status: str) -> None:
        run = self.get_run(run_id)
        if status not in RUN_STATUSES:
            raise InvalidConfig(f"unknown status {status!r}")
        order = {s: i for i, s in enumerate(RUN_STATUSES)}
        if order[status] < order[run.status]:
            raise InvalidConfig(f"run status only moves forward ({run.status} -> {status})")
        with self._lock:
            self._append({"type": "run_status", "run_id": run_id, "status": status})

    # -- items and judgments -----------------------------------------------------

    def get_item(self, item_id: str) -> ReviewItem:
        if item_id not in self.items:
            raise UnknownItem(f"unknown item {item_id!r}")
        return self.items[item_id]

    def list_items(self, run_id: str, status: str | None = None, category: str | None = None) -> list[ReviewItem]:
        run = self.get_run(run_id)
        items = [self.items[i] for i in run.item_ids]
        if status == "pending":
            items = [i for i in items if not i.judged]
        elif status == "judged":
            items = [i for i in items if i.judged]
        if category:
            items = [i for i in items if i.category is not None and i.category.value == category]
        return items

    def submit_judgment(
        self,
        item_id: str,
        answer_correct: bool,
        entity_exists: bool,
        reviewer: str,
        judged_at: str | None = None,
    ) -> JudgmentRecord:
        """Append one judgment version; acknowledged only after fsync."""
        item = self.get_item(item_id)
        run = self.get_run(item.run_id)
        if run.status != "complete":
            raise RunNotComplete(f"run {run.run_id} is {run.status}; judgments need a complete run")
        with self._lock:
            version = len(item.judgments) + 1
            self._append(
                {
                    "type": "judgment",
                    "item_id": item_id,
                    "version": version,
                    "answer_correct": bool(answer_correct),
                    "entity_exists": bool(entity_exists),
                    "reviewer": reviewer,
                    "judged_at": judged_at or _now(),
                },
                durable=True,
            )
            return item.judgments[-1]

    # -- metrics -------------------------------------------------------------

    def judged_items(self, run_id: str) -> list[JudgedItem]:
        """Latest-version judged items, ready for the evaluation module."""
        out = []
        for item in self.list_items(run_id):
            if item.category is None or not item.judged:
                continue
            latest = item.latest
            out.append(
                JudgedItem(
                    item_id=item.item_id,
                    category=item.category,
                    llm_answer=item.llm_answer(),
                    judgment=Judgment(
                        answer_correct=latest.answer_correct,
                        entity_exists=latest.entity_exists,
                    ),
                    judged_by=latest.reviewer,
                    judged_at=latest.judged_at,
                )
            )
        return out

    def run_metrics(
        self, run_id: str
    ) -> tuple[dict[EntityLabel, CategoryMetrics], dict[EntityLabel, int]]:
        """(per-category metrics over judged items, pending counts). The math
        lives in the evaluation module; this only groups."""
        judged = self.judged_items(run_id)
        by_category: dict[EntityLabel, list[JudgedItem]] = {}
        for item in judged:
            by_category.setdefault(item.category, []).append(item)
        metrics = {
            label: score_category(items, label) for label, items in by_category.items()
        }
        pending: dict[EntityLabel, int] = {}
        for item in self.list_items(run_id, status="pending"):
            if item.category is not None:
                pending[item.category] = pending.get(item.category, 0) + 1
        ordered_metrics = {label: metrics[label] for label in NER_LABELS if label in metrics}
        ordered_pending = {label: pending[label] for label in NER_LABELS if label in pending}
        return ordered_metrics, ordered_pending
