"""Command-line interface for the batch pipeline stages and the review service.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import dataset as dataset_mod
from . import evaluation, rag, report
from . import index as index_mod
from .config import WorkbenchConfig, load_config
from .corpus import read_corpus
from .errors import BackendError, DataError
from .gateway import HttpChatBackend, Transcript, TranscriptBackend
from .index import HashEmbedder, HttpEmbedder, IndexedChunk, VectorIndex, build_chunks
from .ingest import (
    RULE_SETS,
    ingest_document,
    load_tagged_spans,
    read_metadata_csv,
    structured_from_json,
    structured_to_json,
)
from .store import WorkbenchStore


def _iso_clock() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class Context:
    def __init__(self, config_path: str | None, transcript: str | None, mode: str, out: str):
        self.config = load_config(config_path) if config_path else WorkbenchConfig()
        self.transcript_path = transcript
        self.transcript_mode = mode
        self.out = Path(out)

    def ensure_out(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out

    def embedder(self):
        if self.config.embedder == "fallback":
            return HashEmbedder(dim=self.config.embedder_dim, model_id=self.config.embedder_model)
        return HttpEmbedder(
            url=self.config.embedder,
            model_id=self.config.embedder_model,
            dim=self.config.embedder_dim,
            token=self.config.gateway_token(),
        )

    def backend(self):
        if self.transcript_path:
            transcript = Transcript.load(self.transcript_path, mode=self.transcript_mode)
            inner = None
            if self.transcript_mode in ("record", "passthrough"):
                inner = self._http_backend()
            return TranscriptBackend(transcript, inner=inner)
        return self._http_backend()

    def _http_backend(self):
        if not self.config.gateway_url:
            raise DataError("config has no gateway_url; offline runs need --transcript ... --transcript-mode replay")
        return HttpChatBackend(
            url=self.config.gateway_url,
            token=self.config.gateway_token(),
            max_in_flight=self.config.max_in_flight,
        )

    def clock(self):
        # Replay runs must be byte-reproducible, so they use a fixed clock.
        if self.transcript_path and self.transcript_mode == "replay":
            return rag._fixed_clock
        return _iso_clock


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Workbench config file (key = value lines).")
@click.option("--transcript", type=click.Path(dir_okay=False), default=None, help="Completion transcript file.")
@click.option("--transcript-mode", type=click.Choice(["record", "replay", "passthrough"]), default="replay", show_default=True, help="How to use the transcript.")
@click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True, help="Output directory.")
@click.pass_context
def cli(ctx, config_path, transcript, transcript_mode, out):
    """Retrieval-augmented extraction and evaluation workbench."""
    ctx.obj = Context(config_path, transcript, transcript_mode, out)


@cli.command()
@click.option("--spans", "spans_dir", type=click.Path(exists=True), required=True, help="Tagged-span JSON file or directory of them.")
@click.option("--metadata", type=click.Path(exists=True, dir_okay=False), default=None, help="Document metadata CSV.")
@click.pass_obj
def ingest(app: Context, spans_dir, metadata):
    """Tagged spans -> cleaned structured documents."""
    rules = RULE_SETS[app.config.rule_set]
    metas = {}
    meta_rejects = []
    if metadata:
        meta_list, meta_rejects = read_metadata_csv(metadata)
        metas = {m.doc_id: m for m in meta_list}
    src = Path(spans_dir)
    files = sorted(src.glob("*.json")) if src.is_dir() else [src]
    out = app.ensure_out()
    doc_dir = out / "structured"
    doc_dir.mkdir(exist_ok=True)
    count = 0
    for path in files:
        raw = load_tagged_spans(path)
        doc = ingest_document(raw, rules, meta=metas.get(raw.doc_id))
        (doc_dir / f"{doc.doc_id}.json").write_text(structured_to_json(doc), encoding="utf-8")
        count += 1
    (out / "ingest_report.json").write_text(
        json.dumps(
            {
                "rule_set": rules.rule_set_id,
                "documents": count,
                "metadata_rejects": [
                    {"row": r.row, "reason": r.reason} for r in meta_rejects
                ],
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    click.echo(f"ingested {count} document(s) -> {doc_dir}")


def _load_docs(docs_dir: str) -> list:
    docs = []
    for path in sorted(Path(docs_dir).glob("*.json")):
        docs.append(structured_from_json(path.read_text(encoding="utf-8")))
    return docs


@cli.command("index")
@click.option("--docs", "docs_dir", type=click.Path(exists=True, file_okay=False), default=None, help="Directory of structured documents.")
@click.option("--chunks", "chunks_file", type=click.Path(exists=True, dir_okay=False), default=None, help="JSONL chunks (chunk_id, doc_id, text).")
@click.option("--process-records", type=click.Path(exists=True, dir_okay=False), default=None, help="Structured process descriptions JSONL.")
@click.pass_obj
def build_index(app: Context, docs_dir, chunks_file, process_records):
    """Embed document chunks and persist the vector index."""
    if (docs_dir is None) == (chunks_file is None):
        raise click.UsageError("provide exactly one of --docs or --chunks")
    embedder = app.embedder()
    idx = VectorIndex(dim=embedder.dim)
    if docs_dir:
        process_texts = None
        if process_records:
            process_texts = {
                r.doc_id: f"{r.material} {r.control_method}"
                for r in dataset_mod.read_process_records(process_records)
            }
        for chunk in build_chunks(_load_docs(docs_dir), embedder, process_texts):
            idx.upsert(chunk)
    else:
        for line in Path(chunks_file).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            idx.upsert(
                IndexedChunk(
                    chunk_id=data["chunk_id"],
                    doc_id=data["doc_id"],
                    text=data["text"],
                    vector=index_mod.embed(data["text"], embedder),
                )
            )
    out = app.ensure_out()
    dest = out / "index.cmi"
    index_mod.persist(idx, dest)
    click.echo(f"indexed {len(idx)} chunk(s) -> {dest}")


def _read_items(path: str) -> list[tuple[str, str]]:
    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            data = json.loads(line)
            items.append((str(data["item_id"]), data["abstract"]))
    return items


def _pipeline_ports(app: Context, index_file, corpus_file, need_retrieval: bool) -> rag.PipelinePorts:
    idx = None
    store = None
    embedder = None
    if need_retrieval:
        if not index_file or not corpus_file:
            raise click.UsageError("few-shot extraction needs --index and --corpus")
        idx = index_mod.load(index_file)
        records, _ = read_corpus(corpus_file)
        store = rag.exemplar_store_from_corpus(records)
        embedder = app.embedder()
    return rag.PipelinePorts(
        backend=app.backend(),
        index=idx,
        embedder=embedder,
        exemplar_store=store,
        clock=app.clock(),
    )


@cli.command()
@click.option("--items", "items_file", type=click.Path(exists=True, dir_okay=False), required=True, help="JSONL items: {item_id, abstract}.")
@click.option("--mode", default="zero", show_default=True, help="zero | few[:k]")
@click.option("--index", "index_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--corpus", "corpus_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_obj
def extract(app: Context, items_file, mode, index_file, corpus_file):
    """Batch NER extraction; writes run records."""
    shot_mode = rag.parse_shot_mode(mode)
    if not app.config.model:
        raise DataError("config has no model")
    ports = _pipeline_ports(app, index_file, corpus_file, shot_mode.is_few)
    settings = rag.ExtractionSettings(
        mode=shot_mode,
        model=app.config.model,
        temperature=app.config.temperature,
        max_tokens=app.config.max_tokens,
    )
    out = app.ensure_out()
    records = rag.extract_batch(_read_items(items_file), settings, ports, out / "run_records.jsonl")
    click.echo(f"extracted {len(records)} item(s) -> {out / 'run_records.jsonl'}")


@cli.command()
@click.option("--queries", "queries_file", type=click.Path(exists=True, dir_okay=False), required=True, help="JSONL queries: {item_id, product, material_category, control_method_type}.")
@click.pass_obj
def recommend(app: Context, queries_file):
    """Batch catalyst recommendation; writes run records."""
    if not app.config.model:
        raise DataError("config has no model")
    ports = rag.PipelinePorts(backend=app.backend(), clock=app.clock())
    settings = rag.ExtractionSettings(
        mode=rag.ShotMode.zero(),
        model=app.config.model,
        temperature=app.config.temperature,
        max_tokens=app.config.max_tokens,
    )
    records = []
    for line in Path(queries_file).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        query = rag.RecommendationQuery(
            product=data["product"],
            material_category=data["material_category"],
            control_method_type=data["control_method_type"],
        )
        _, record = rag.recommend(query, settings, ports, item_id=str(data.get("item_id", "")))
        records.append(record)
    out = app.ensure_out()
    dest = out / "recommend_records.jsonl"
    dest.write_text("".join(rag.run_record_line(r) + "\n" for r in records), encoding="utf-8")
    click.echo(f"answered {len(records)} query(ies) -> {dest}")


@cli.command("build-dataset")
@click.option("--corpus", "corpus_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--docs", "docs_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--process-records", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--base-model", default="", help="Base model name recorded in the manifest.")
@click.pass_obj
def build_dataset(app: Context, corpus_file, docs_dir, process_records, base_model):
    """Compile the instruction-tuning dataset and its training manifest."""
    samples = []
    if corpus_file and docs_dir:
        records, _ = read_corpus(corpus_file)
        samples.extend(dataset_mod.build_ner_samples(records, _load_docs(docs_dir)))
    if process_records:
        samples.extend(
            dataset_mod.build_recommendation_samples(
                dataset_mod.read_process_records(process_records)
            )
        )
    if not samples:
        raise DataError("nothing to build: provide --corpus/--docs and/or --process-records")
    kept, drops = dataset_mod.dedup_filter(samples)
    out = app.ensure_out()
    manifest = dataset_mod.TrainingManifest(base_model=base_model)
    dataset_path, manifest_path = dataset_mod.emit_dataset(kept, manifest, out)
    (out / "build_report.json").write_text(
        json.dumps(
            {
                "built": len(samples),
                "kept": len(kept),
                "dropped": [{"index": d.index, "reason": d.reason} for d in drops],
                "builder_version": dataset_mod.BUILDER_VERSION,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    click.echo(f"dataset: {len(kept)} sample(s) -> {dataset_path}; manifest -> {manifest_path}")


def _write_category_report(out: Path, metrics, pending, stem: str = "report") -> dict:
    document = report.category_report_data(metrics, pending)
    (out / f"{stem}.json").write_bytes(report.render_json(document))
    (out / f"{stem}.txt").write_text(report.render_category_table(document), encoding="utf-8")
    (out / f"{stem}.csv").write_text(report.render_category_csv(document), encoding="utf-8")
    report.save_category_figure(document, out / f"{stem}.png")
    return document


@cli.command()
@click.option("--judgments", "judgments_file", type=click.Path(exists=True, dir_okay=False), default=None, help="JudgedItem JSONL fixture.")
@click.option("--store", "store_dir", type=click.Path(exists=True, file_okay=False), default=None, help="Workbench store directory.")
@click.option("--run", "run_id", default=None, help="Run id inside --store.")
@click.pass_obj
def score(app: Context, judgments_file, store_dir, run_id):
    """Score judged items into the per-category metrics report."""
    if judgments_file:
        items = evaluation.read_judged_items(judgments_file)
        if not items:
            raise DataError(f"{judgments_file}: no judged items to score")
        metrics = evaluation.score_items(items)
        pending = {}
    elif store_dir and run_id:
        wb = WorkbenchStore(store_dir)
        metrics, pending = wb.run_metrics(run_id)
    else:
        raise click.UsageError("provide --judgments or (--store and --run)")
    out = app.ensure_out()
    document = _write_category_report(out, metrics, pending)
    click.echo(report.render_category_table(document), nl=False)
    click.echo(f"report files -> {out}")


@cli.command()
@click.option("--items", "items_file", type=click.Path(exists=True, dir_okay=False), required=True, help="JSONL eval items: {item_id, category, abstract}.")
@click.option("--judgments", "judgments_file", type=click.Path(exists=True, dir_okay=False), required=True, help="Per-config judgment JSONL.")
@click.option("--index", "index_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--corpus", "corpus_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--k", default=3, show_default=True, help="Few-shot exemplar count.")
@click.pass_obj
def ablate(app: Context, items_file, judgments_file, index_file, corpus_file, k):
    """Run the four-cell (model variant x shot mode) ablation."""
    if not app.config.model_baseline or not app.config.model_fine_tuned:
        raise DataError("config needs model_baseline and model_fine_tuned for ablation")
    items = evaluation.read_eval_items(items_file)
    judgments = evaluation.JudgmentSource.from_jsonl(judgments_file)
    ports = _pipeline_ports(app, index_file, corpus_file, need_retrieval=True)
    ablation = evaluation.run_ablation(
        evaluation.canonical_grid(k),
        items,
        {"baseline": app.config.model_baseline, "fine_tuned": app.config.model_fine_tuned},
        ports,
        judgments,
        temperature=app.config.temperature,
        max_tokens=app.config.max_tokens,
    )
    out = app.ensure_out()
    document = report.ablation_report_data(ablation)
    (out / "ablation.json").write_bytes(report.render_json(document))
    (out / "ablation.txt").write_text(report.render_ablation_table(document), encoding="utf-8")
    (out / "ablation.csv").write_text(report.render_ablation_csv(document), encoding="utf-8")
    report.save_ablation_figure(document, out / "ablation.png")
    click.echo(report.render_ablation_table(document), nl=False)
    click.echo(f"ablation files -> {out}")


@cli.command()
@click.option("--store", "store_dir", type=click.Path(file_okay=False), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8077, show_default=True, type=int)
@click.pass_obj
def serve(app: Context, store_dir, host, port):
    """Run the expert-review HTTP service."""
    import uvicorn

    from .service import create_app

    wb = WorkbenchStore(store_dir)
    uvicorn.run(create_app(wb), host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
