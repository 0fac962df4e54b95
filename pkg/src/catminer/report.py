"""Report rendering: fixed-width tables mirroring the evaluation table
layouts, delimited output, a canonical machine-readable JSON variant, and
matplotlib figures written alongside.

The JSON renderers are the single source of bytes for both the CLI and the
review service, so the two surfaces agree byte-for-byte.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .corpus import NER_LABELS, EntityLabel
from .evaluation import AblationReport, CategoryMetrics, aggregate, format_pct

CATEGORY_COLUMNS = ("Entity", "Count", "Correct", "Existence", "Modified Correct", "Modified Accuracy")
ABLATION_COLUMNS = ("Model", "Correct", "Modified Correct", "Modified Accuracy")


def _ordered_categories(
    metrics: Mapping[EntityLabel, CategoryMetrics],
    pending: Mapping[EntityLabel, int] | None,
) -> list[EntityLabel]:
    present = set(metrics) | set(pending or {})
    return [label for label in NER_LABELS if label in present]


def category_report_data(
    metrics: Mapping[EntityLabel, CategoryMetrics],
    pending: Mapping[EntityLabel, int] | None = None,
) -> dict:
    """The machine-readable report document. Categories with no judged items
    carry null metric fields and their pending count."""
    pending = pending or {}
    categories = []
    for label in _ordered_categories(metrics, pending):
        m = metrics.get(label)
        if m is None:
            categories.append(
                {
                    "category": label.value,
                    "count": 0,
                    "pending": pending.get(label, 0),
                    "correct": None,
                    "existence": None,
                    "modified_correct": None,
                    "modified_accuracy": None,
                    "modified_accuracy_pct": None,
                }
            )
        else:
            categories.append(
                {
                    "category": label.value,
                    "count": m.count,
                    "pending": pending.get(label, 0),
                    "correct": m.correct,
                    "existence": m.existence,
                    "modified_correct": m.modified_correct,
                    "modified_accuracy": {
                        "numerator": m.modified_accuracy.numerator,
                        "denominator": m.modified_accuracy.denominator,
                    },
                    "modified_accuracy_pct": format_pct(m.modified_accuracy),
                }
            )
    overall = None
    if metrics:
        o = aggregate(list(metrics.values()))
        overall = {
            "count": o.count,
            "pending": sum(pending.values()) if pending else 0,
            "correct": o.correct,
            "existence": o.existence,
            "modified_correct": o.modified_correct,
            "modified_accuracy": {
                "numerator": o.modified_accuracy.numerator,
                "denominator": o.modified_accuracy.denominator,
            },
            "modified_accuracy_pct": format_pct(o.modified_accuracy),
        }
    return {"kind": "category_metrics", "categories": categories, "overall": overall}


def render_json(document: Mapping) -> bytes:
    """Canonical JSON bytes shared by the CLI and the HTTP service."""
    return (json.dumps(document, sort_keys=True, ensure_ascii=False, indent=2) + "\n").encode(
        "utf-8"
    )


def _format_row(cells: list[str], widths: list[int]) -> str:
    first = cells[0].ljust(widths[0])
    rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
    return "  ".join([first] + rest).rstrip()


def _table(header: tuple[str, ...], rows: list[list[str]]) -> str:
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]
    lines = [_format_row(list(header), widths)]
    lines.append("-" * len(lines[0]))
    lines.extend(_format_row(r, widths) for r in rows)
    return "\n".join(lines) + "\n"


def _category_rows(document: Mapping) -> list[list[str]]:
    rows = []
    for entry in document["categories"]:
        if entry["count"] == 0:
            rows.append(
                [
                    EntityLabel(entry["category"]).display,
                    "0",
                    "-",
                    "-",
                    "-",
                    f"pending {entry['pending']}",
                ]
            )
        else:
            rows.append(
                [
                    EntityLabel(entry["category"]).display,
                    str(entry["count"]),
                    str(entry["correct"]),
                    str(entry["existence"]),
                    str(entry["modified_correct"]),
                    entry["modified_accuracy_pct"],
                ]
            )
    overall = document["overall"]
    if overall is not None:
        rows.append(
            [
                "OVERALL",
                str(overall["count"]),
                str(overall["correct"]),
                str(overall["existence"]),
                str(overall["modified_correct"]),
                overall["modified_accuracy_pct"],
            ]
        )
    return rows


def render_category_table(document: Mapping) -> str:
    return _table(CATEGORY_COLUMNS, _category_rows(document))


def render_category_csv(document: Mapping) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([c.lower().replace(" ", "_") for c in CATEGORY_COLUMNS])
    for entry in document["categories"]:
        writer.writerow(
            [
                entry["category"],
                entry["count"],
                entry["correct"] if entry["correct"] is not None else "",
                entry["existence"] if entry["existence"] is not None else "",
                entry["modified_correct"] if entry["modified_correct"] is not None else "",
                entry["modified_accuracy_pct"] or "",
            ]
        )
    overall = document["overall"]
    if overall is not None:
        writer.writerow(
            [
                "OVERALL",
                overall["count"],
                overall["correct"],
                overall["existence"],
                overall["modified_correct"],
                overall["modified_accuracy_pct"],
            ]
        )
    return buf.getvalue()


def save_category_figure(document: Mapping, path: str | Path) -> None:
    """Bar chart of per-category modified accuracy with the overall line."""
    entries = [e for e in document["categories"] if e["count"] > 0]
    labels = [EntityLabel(e["category"]).display for e in entries]
    values = [
        100.0 * e["modified_accuracy"]["numerator"] / e["modified_accuracy"]["denominator"]
        for e in entries
    ]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.bar(range(len(values)), values, color="#3b6ea5")
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("Modified accuracy (%)")
    ax.set_ylim(0, 100)
    overall = document["overall"]
    if overall is not None:
        pct = 100.0 * overall["modified_accuracy"]["numerator"] / overall["modified_accuracy"]["denominator"]
        ax.axhline(pct, color="#a53b3b", linestyle="--", linewidth=1, label=f"overall {overall['modified_accuracy_pct']}")
        ax.legend(fontsize=8)
    ax.set_title("Entity recognition, modified accuracy by category")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# --- ablation ----------------------------------------------------------------


def ablation_report_data(report: AblationReport) -> dict:
    rows = []
    for row in report.rows:
        rows.append(
            {
                "config": row.config.key,
                "model_variant": row.config.model_variant,
                "shot_mode": row.config.shot_mode.label(),
                "item_count": row.item_count,
                "correct": row.correct,
                "modified_correct": row.modified_correct,
                "modified_accuracy": {
                    "numerator": row.modified_accuracy.numerator,
                    "denominator": row.modified_accuracy.denominator,
                },
                "modified_accuracy_pct": format_pct(row.modified_accuracy),
            }
        )
    return {"kind": "ablation_report", "rows": rows}


def render_ablation_table(document: Mapping) -> str:
    rows = []
    for entry in document["rows"]:
        variant = "fine-tuned" if entry["model_variant"] == "fine_tuned" else "baseline"
        shots = "few-shot" if entry["shot_mode"].startswith("few") else "zero-shot"
        rows.append(
            [
                f"{variant} + {shots}",
                str(entry["correct"]),
                str(entry["modified_correct"]),
                entry["modified_accuracy_pct"],
            ]
        )
    return _table(ABLATION_COLUMNS, rows)


def render_ablation_csv(document: Mapping) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["config", "correct", "modified_correct", "modified_accuracy"])
    for entry in document["rows"]:
        writer.writerow(
            [
                entry["config"],
                entry["correct"],
                entry["modified_correct"],
                entry["modified_accuracy_pct"],
            ]
        )
    return buf.getvalue()


def save_ablation_figure(document: Mapping, path: str | Path) -> None:
    entries = document["rows"]
    labels = [e["config"].replace("/", "\n") for e in entries]
    values = [
        100.0 * e["modified_accuracy"]["numerator"] / e["modified_accuracy"]["denominator"]
        for e in entries
    ]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    bars = ax.bar(range(len(values)), values, color=["#9bb7d4", "#6e93bd", "#41699a", "#1d4272"])
    for bar, e in zip(bars, entries):
        ax.text(
            bar.get_x() + bar.get_width() / 2,
            bar.get_height() + 1,
            e["modified_accuracy_pct"],
            ha="center",
            fontsize=8,
        )
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("Modified accuracy (%)")
    ax.set_ylim(0, 100)
    ax.set_title("Ablation: model variant x shot mode")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
