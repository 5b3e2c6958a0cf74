"""Record serialization and table rendering.

``records.jsonl`` holds one evaluation record per line in canonical JSON
(sorted keys, fixed separators) so identical runs produce identical bytes.
``tables.md`` mirrors the two headline tables: a faithfulness table where
the lowest value per row is bold, and a plausibility table where, per row
and embedder, the highest value across explainers is bold.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ValidationError
from .model import EvaluationRecord, TextArtifact


def record_to_dict(record: EvaluationRecord) -> dict:
    return {
        "video_id": record.video_id,
        "dataset_id": record.dataset_id,
        "explainer_id": record.explainer_id,
        "k": record.k,
        "approach_id": record.approach_id,
        "disc_plus": record.disc_plus,
        "plausibility": {k: record.plausibility[k] for k in sorted(record.plausibility)},
        "seed": record.seed,
        "config_digest": record.config_digest,
        "flags": list(record.flags),
        "explanation_summary_overlap": record.explanation_summary_overlap,
    }


def record_from_dict(data: dict) -> EvaluationRecord:
    return EvaluationRecord(
        video_id=data["video_id"],
        dataset_id=data["dataset_id"],
        explainer_id=data["explainer_id"],
        k=int(data["k"]),
        approach_id=data["approach_id"],
        disc_plus=float(data["disc_plus"]),
        plausibility=dict(data["plausibility"]),
        seed=int(data["seed"]),
        config_digest=data["config_digest"],
        flags=tuple(data.get("flags", ())),
        explanation_summary_overlap=data.get("explanation_summary_overlap"),
    )


def records_to_jsonl(records: Iterable[EvaluationRecord]) -> str:
    lines = [
        json.dumps(record_to_dict(r), sort_keys=True, ensure_ascii=True, separators=(",", ":"))
        for r in records
    ]
    return "".join(line + "\n" for line in lines)


def records_from_jsonl(text: str) -> list[EvaluationRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(record_from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ValidationError(f"records line {lineno} malformed: {exc}") from exc
    return records


def faithfulness_means(records: Sequence[EvaluationRecord]) -> dict:
    """Mean Disc+ per (dataset, k, explainer); each (video, explainer, k)
    counts once even when several approaches repeat its value."""
    seen = {}
    for r in records:
        seen[(r.dataset_id, r.k, r.explainer_id, r.video_id)] = r.disc_plus
    sums: dict = defaultdict(list)
    for (dataset_id, k, explainer_id, _video), value in seen.items():
        sums[(dataset_id, k, explainer_id)].append(value)
    return {key: sum(vals) / len(vals) for key, vals in sums.items()}


def plausibility_means(records: Sequence[EvaluationRecord]) -> dict:
    """Mean reported plausibility per (dataset, k, approach, explainer, embedder)."""
    sums: dict = defaultdict(list)
    for r in records:
        if r.approach_id == "not_applicable":
            continue
        for embedder_id, value in r.plausibility.items():
            sums[(r.dataset_id, r.k, r.approach_id, r.explainer_id, embedder_id)].append(
                value
            )
    return {key: sum(vals) / len(vals) for key, vals in sums.items()}


def _fmt(value: float | None, bold: bool) -> str:
    if value is None:
        return "—"
    text = f"{value:.3f}"
    return f"**{text}**" if bold else text


def _faithfulness_table(records: Sequence[EvaluationRecord], explainers: list[str]) -> list[str]:
    means = faithfulness_means(records)
    rows = sorted({(d, k) for d, k, _e in means})
    lines = [
        "## Faithfulness (Disc+; lower is better, best per row in bold)",
        "",
        "| Videos | k | " + " | ".join(explainers) + " |",
        "|" + "---|" * (2 + len(explainers)),
    ]
    for dataset_id, k in rows:
        values = [means.get((dataset_id, k, e)) for e in explainers]
        present = [v for v in values if v is not None]
        best = min(present) if present else None
        cells = [_fmt(v, v is not None and v == best) for v in values]
        lines.append(f"| {dataset_id} | {k} | " + " | ".join(cells) + " |")
    lines.append("")
    return lines


def _plausibility_table(
    records: Sequence[EvaluationRecord], explainers: list[str], embedders: list[str]
) -> list[str]:
    means = plausibility_means(records)
    rows = sorted({(d, k, a) for d, k, a, _e, _m in means})
    headers = [f"{e} / {m}" for e in explainers for m in embedders]
    lines = [
        "## Plausibility (semantic overlap; higher is better, best per row and embedder in bold)",
        "",
        "| Videos | k | Approach | " + " | ".join(headers) + " |",
        "|" + "---|" * (3 + len(headers)),
    ]
    for dataset_id, k, approach in rows:
        best_per_embedder = {}
        for embedder in embedders:
            vals = [
                means.get((dataset_id, k, approach, e, embedder)) for e in explainers
            ]
            present = [v for v in vals if v is not None]
            best_per_embedder[embedder] = max(present) if present else None
        cells = []
        for explainer in explainers:
            for embedder in embedders:
                value = means.get((dataset_id, k, approach, explainer, embedder))
                bold = value is not None and value == best_per_embedder[embedder]
                cells.append(_fmt(value, bold))
        lines.append(
            f"| {dataset_id} | {k} | {approach} | " + " | ".join(cells) + " |"
        )
    lines.append("")
    return lines


def render_tables(report) -> str:
    """Markdown for a RunReport (or anything exposing .records/.metadata)."""
    records = list(report.records)
    meta = report.metadata
    explainers = sorted({r.explainer_id for r in records})
    embedders = sorted({m for r in records for m in r.plausibility})
    lines = [
        "# Evaluation report",
        "",
        f"- config digest: `{meta.get('config_digest', '')}`",
        f"- seed: {meta.get('seed', '')}",
        f"- video filter: at least {meta.get('min_topk_fragments', 1)} fragment(s)",
        f"- aggregation: {meta.get('aggregation', 'mean')} over videos",
        "",
    ]
    if not records:
        lines.append("— (no records)")
        lines.append("")
        return "\n".join(lines)
    lines += _faithfulness_table(records, explainers)
    if embedders:
        lines += _plausibility_table(records, explainers, embedders)
    excluded = getattr(report, "excluded", [])
    if excluded:
        lines.append("## Excluded videos")
        lines.append("")
        for entry in excluded:
            lines.append(
                f"- {entry['dataset_id']}/{entry['video_id']}: "
                f"{entry['n_fragments']} fragment(s), "
                f"filter requires {entry['min_required']}"
            )
        lines.append("")
    quarantined = getattr(report, "quarantined", [])
    if quarantined:
        lines.append("## Quarantined videos")
        lines.append("")
        for entry in quarantined:
            lines.append(
                f"- {entry['dataset_id']}/{entry['video_id']}: {entry['error']}"
            )
        lines.append("")
    return "\n".join(lines)


@dataclass
class ReportView:
    """Just enough report shape to re-render tables from saved records."""

    records: list
    metadata: dict
    excluded: list = field(default_factory=list)
    quarantined: list = field(default_factory=list)

    @classmethod
    def from_records(cls, records: Sequence[EvaluationRecord]) -> "ReportView":
        metadata = {}
        if records:
            metadata = {
                "config_digest": records[0].config_digest,
                "seed": records[0].seed,
            }
        return cls(records=list(records), metadata=metadata)


def artifact_to_dict(artifact: TextArtifact) -> dict:
    return {
        "kind": artifact.kind,
        "text": artifact.text,
        "prompt_id": artifact.prompt_id,
        "source_clip_digest": artifact.source_clip_digest,
    }


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def write_texts(report, texts_dir: Path) -> None:
    for result in report.results:
        if result.summary_text is None and not result.texts:
            continue
        vdir = Path(texts_dir) / result.video_id
        vdir.mkdir(parents=True, exist_ok=True)
        if result.summary_text is not None:
            _write_json(vdir / "summary.json", artifact_to_dict(result.summary_text))
        for (explainer, k, approach), artifact in sorted(result.texts.items()):
            _write_json(
                vdir / f"{explainer}_k{k}_{approach}.json", artifact_to_dict(artifact)
            )
        for (explainer, k, approach), parts in sorted(result.fragment_texts.items()):
            _write_json(
                vdir / f"{explainer}_k{k}_{approach}_fragments.json",
                [artifact_to_dict(p) for p in parts],
            )


def write_outputs(report, output_dir: Path) -> dict[str, Path]:
    """records.jsonl, tables.md, report.json and texts/ for one run."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records_path = out / "records.jsonl"
    records_path.write_text(records_to_jsonl(report.records), encoding="utf-8")
    tables_path = out / "tables.md"
    tables_path.write_text(render_tables(report), encoding="utf-8")
    report_path = out / "report.json"
    _write_json(
        report_path,
        {
            "metadata": report.metadata,
            "n_records": len(report.records),
            "combination_errors": [e.to_dict() for e in report.combination_errors],
            "quarantined": report.quarantined,
            "excluded": report.excluded,
        },
    )
    write_texts(report, out / "texts")
    return {"records": records_path, "tables": tables_path, "report": report_path}


def stage_payload(report, upto: str) -> dict:
    """JSON-serializable snapshot of a staged (partial) run."""
    videos = []
    for r in report.results:
        entry: dict = {
            "video_id": r.video_id,
            "dataset_id": r.dataset_id,
            "n_fragments": r.n_fragments,
        }
        if r.importance is not None:
            entry["importance"] = [float(x) for x in r.importance.scores]
        if r.summary is not None:
            entry["summary_fragments"] = list(r.summary.fragment_indices)
        if r.explanations:
            entry["explanations"] = {
                explainer: {
                    "per_fragment": [float(x) for x in scores.per_fragment],
                    "ranking": list(scores.top_k),
                    "flags": list(scores.flags),
                }
                for explainer, scores in sorted(r.explanations.items())
            }
        if r.disc:
            entry["disc_plus"] = {
                f"{explainer}|k={k}": {"delta_e": d.delta_e, "degenerate": d.degenerate}
                for (explainer, k), d in sorted(r.disc.items())
            }
        if r.summary_text is not None:
            entry["summary_text"] = artifact_to_dict(r.summary_text)
        if r.texts:
            entry["texts"] = {
                f"{explainer}|k={k}|{approach}": artifact_to_dict(a)
                for (explainer, k, approach), a in sorted(r.texts.items())
            }
        if r.plausibility:
            entry["plausibility"] = {
                f"{explainer}|k={k}|{approach}": {
                    "per_embedder": {
                        emb: {"raw_cosine": s.raw_cosine, "reported": s.reported}
                        for emb, s in sorted(p.per_embedder.items())
                    },
                    "errors": dict(p.errors),
                }
                for (explainer, k, approach), p in sorted(r.plausibility.items())
            }
        videos.append(entry)
    return {
        "stage": upto,
        "metadata": report.metadata,
        "videos": videos,
        "combination_errors": [e.to_dict() for e in report.combination_errors],
        "quarantined": report.quarantined,
        "excluded": report.excluded,
    }
