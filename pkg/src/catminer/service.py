"""HTTP review service feeding the expert-review UI.

JSON bodies throughout; errors use a uniform {error_code, message} shape with
400/404/409. Metric math is never reimplemented here: responses come from the
evaluation module via the shared report renderers, byte-identical to the CLI.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .corpus import EntityLabel
from .report import category_report_data, render_category_table, render_json
from .store import (
    InvalidConfig,
    ItemSeed,
    ReviewItem,
    RunNotComplete,
    UnknownItem,
    UnknownRun,
    WorkbenchStore,
)


class ItemSeedBody(BaseModel):
    source_text: str
    category: Optional[str] = None
    item_id: str = ""
    raw_text: Optional[str] = None
    answers: Optional[dict[str, list[str]]] = None


class RunCreateBody(BaseModel):
    kind: str
    config: dict = Field(default_factory=dict)
    items: list[ItemSeedBody]
    idempotency_key: str = ""


class JudgmentBody(BaseModel):
    answer_correct: bool
    entity_exists: bool
    reviewer: str = "reviewer"


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error_code": code, "message": message})


def _run_payload(store: WorkbenchStore, run_id: str) -> dict:
    run = store.get_run(run_id)
    judged = sum(1 for i in store.list_items(run_id) if i.judged)
    return {
        "run_id": run.run_id,
        "kind": run.kind,
        "config": run.config,
        "status": run.status,
        "created_at": run.created_at,
        "item_count": len(run.item_ids),
        "judged_count": judged,
        "pending_count": len(run.item_ids) - judged,
    }


def _item_summary(item: ReviewItem) -> dict:
    latest = item.latest
    return {
        "item_id": item.item_id,
        "run_id": item.run_id,
        "category": item.category.value if item.category else None,
        "judgment_state": {"status": "judged", "version": latest.version}
        if latest
        else {"status": "pending"},
    }


def _item_detail(item: ReviewItem) -> dict:
    payload = _item_summary(item)
    payload.update(
        {
            "source_text": item.source_text,
            "raw_text": item.raw_text,
            "answers": item.answers,
            "llm_answer": list(item.llm_answer()),
            "judgments": [
                {
                    "version": j.version,
                    "answer_correct": j.answer_correct,
                    "entity_exists": j.entity_exists,
                    "reviewer": j.reviewer,
                    "judged_at": j.judged_at,
                }
                for j in item.judgments
            ],
        }
    )
    return payload


def create_app(store: WorkbenchStore) -> FastAPI:
    app = FastAPI(title="catminer review service")

    @app.exception_handler(UnknownRun)
    async def _unknown_run(request: Request, exc: UnknownRun):
        return _error(404, "unknown_run", str(exc))

    @app.exception_handler(UnknownItem)
    async def _unknown_item(request: Request, exc: UnknownItem):
        return _error(404, "unknown_item", str(exc))

    @app.exception_handler(RunNotComplete)
    async def _not_complete(request: Request, exc: RunNotComplete):
        return _error(409, "run_not_complete", str(exc))

    @app.exception_handler(InvalidConfig)
    async def _invalid(request: Request, exc: InvalidConfig):
        return _error(400, "invalid_config", str(exc))

    @app.post("/runs", status_code=201)
    def create_run(body: RunCreateBody, response: Response):
        seeds = []
        for item in body.items:
            category = None
            if item.category:
                try:
                    category = EntityLabel(item.category)
                except ValueError:
                    raise InvalidConfig(f"unknown category {item.category!r}")
            seeds.append(
                ItemSeed(
                    source_text=item.source_text,
                    category=category,
                    item_id=item.item_id,
                    raw_text=item.raw_text,
                    answers=item.answers,
                )
            )
        existing = store.find_run_by_key(body.idempotency_key) if body.idempotency_key else None
        run = store.create_run(body.kind, body.config, seeds, idempotency_key=body.idempotency_key)
        if existing is not None:
            response.status_code = 200
        return _run_payload(store, run.run_id)

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return _run_payload(store, run_id)

    @app.get("/runs/{run_id}/items")
    def list_items(
        run_id: str,
        status: Optional[str] = Query(default=None),
        category: Optional[str] = Query(default=None),
    ):
        items = store.list_items(run_id, status=status, category=category)
        return {"run_id": run_id, "items": [_item_summary(i) for i in items]}

    @app.get("/items/{item_id}")
    def get_item(item_id: str):
        return _item_detail(store.get_item(item_id))

    @app.post("/items/{item_id}/judgment")
    def submit_judgment(item_id: str, body: JudgmentBody):
        record = store.submit_judgment(
            item_id,
            answer_correct=body.answer_correct,
            entity_exists=body.entity_exists,
            reviewer=body.reviewer,
        )
        return {"item_id": item_id, "version": record.version}

    @app.get("/runs/{run_id}/metrics")
    def get_metrics(run_id: str):
        metrics, pending = store.run_metrics(run_id)
        document = category_report_data(metrics, pending)
        return Response(content=render_json(document), media_type="application/json")

    @app.get("/runs/{run_id}/report")
    def get_report(run_id: str, format: str = Query(default="table")):
        metrics, pending = store.run_metrics(run_id)
        document = category_report_data(metrics, pending)
        if format == "json":
            return Response(content=render_json(document), media_type="application/json")
        if format == "table":
            return Response(content=render_category_table(document), media_type="text/plain")
        return _error(400, "bad_format", f"unknown report format {format!r}")

    return app
