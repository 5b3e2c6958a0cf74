"""Command-line entry points.

Every verb takes a config file; ``--seed``, ``--k``, ``--approach``,
``--explainer`` and ``--video-set`` override config fields. Exit codes: 0
success, 2 partial (some videos quarantined), 1 fatal.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .containers import list_videos, load_bundle
from .errors import PipelineError
from .pipeline import RunConfig, VideoSetFilter, run_dataset
from .reporting import (
    ReportView,
    records_from_jsonl,
    render_tables,
    stage_payload,
    write_outputs,
)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def _config_options(fn):
    fn = click.option(
        "--config",
        "config_path",
        required=True,
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="Run config (YAML or JSON).",
    )(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the run seed.")(fn)
    fn = click.option(
        "--k", "ks", type=int, multiple=True, help="Override the top-k values."
    )(fn)
    fn = click.option(
        "--approach",
        "approaches",
        type=click.Choice(["approach1", "approach2"]),
        multiple=True,
        help="Override the textualization approaches.",
    )(fn)
    fn = click.option(
        "--explainer",
        "explainers",
        type=click.Choice(["lime", "attention"]),
        multiple=True,
        help="Override the explainer set.",
    )(fn)
    fn = click.option(
        "--video-set",
        type=click.Choice(["1", "2"]),
        default="1",
        show_default=True,
        help="1 = videos with >=1 fragment, 2 = videos with >=3 fragments.",
    )(fn)
    return fn


def _load_config(config_path, seed, ks, approaches, explainers) -> RunConfig:
    config = RunConfig.from_file(config_path)
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if ks:
        overrides["ks"] = tuple(ks)
    if approaches:
        overrides["approaches"] = tuple(approaches)
    if explainers:
        overrides["explainers"] = tuple(explainers)
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _exit_code(report) -> int:
    return EXIT_PARTIAL if report.quarantined else EXIT_OK


def _echo_summary(report) -> None:
    click.echo(
        f"videos evaluated: {len(report.results)}  records: {len(report.records)}  "
        f"excluded: {len(report.excluded)}  quarantined: {len(report.quarantined)}  "
        f"combination errors: {len(report.combination_errors)}"
    )


def _run_stage(config_path, seed, ks, approaches, explainers, video_set, upto) -> None:
    try:
        config = _load_config(config_path, seed, ks, approaches, explainers)
        video_filter = VideoSetFilter.for_video_set(int(video_set))
        report = run_dataset(config, video_filter, upto=upto)
        stage_dir = Path(config.output_dir) / "stages"
        stage_dir.mkdir(parents=True, exist_ok=True)
        path = stage_dir / f"{upto}.json"
        path.write_text(
            json.dumps(stage_payload(report, upto), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        click.echo(f"wrote {path}")
        _echo_summary(report)
    except PipelineError as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    sys.exit(_exit_code(report))


@click.group()
def main():
    """Fragment-level video-summary explanations with textual rendering."""


@main.command()
@_config_options
def ingest(config_path, seed, ks, approaches, explainers, video_set):
    """Validate the configured feature containers and list their videos."""
    try:
        config = _load_config(config_path, seed, ks, approaches, explainers)
    except PipelineError as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    manifest = []
    failures = 0
    for dataset in config.datasets:
        try:
            keys = list_videos(dataset.container)
        except Exception as exc:
            click.echo(f"{dataset.dataset_id}: container unreadable: {exc}", err=True)
            failures += 1
            continue
        for key in keys:
            try:
                bundle = load_bundle(
                    dataset.container,
                    key,
                    videos_dir=dataset.videos_dir,
                    default_fps=config.default_fps,
                )
            except PipelineError as exc:
                click.echo(f"{dataset.dataset_id}/{key}: INVALID: {exc}", err=True)
                failures += 1
                continue
            entry = {
                "dataset_id": dataset.dataset_id,
                "video_id": key,
                "n_sampled_frames": bundle.n_frames,
                "feature_dim": bundle.feature_dim,
                "n_fragments": bundle.n_fragments,
                "content_digest": bundle.content_digest,
                "source_video": str(bundle.source_path) if bundle.source_path else None,
            }
            manifest.append(entry)
            click.echo(
                f"{dataset.dataset_id}/{key}: {bundle.n_frames} frames x "
                f"{bundle.feature_dim} dims, {bundle.n_fragments} fragments"
            )
    stage_dir = Path(config.output_dir) / "stages"
    stage_dir.mkdir(parents=True, exist_ok=True)
    path = stage_dir / "ingest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    click.echo(f"wrote {path}")
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


def _stage_command(name: str, help_text: str):
    @main.command(name=name, help=help_text)
    @_config_options
    def _cmd(config_path, seed, ks, approaches, explainers, video_set):
        _run_stage(config_path, seed, ks, approaches, explainers, video_set, upto=name)

    return _cmd


_stage_command("summarize", "Score frames and select summary fragments.")
_stage_command("explain", "Compute per-fragment influence scores.")
_stage_command("faithfulness", "Evaluate Disc+ for every explainer and k.")
_stage_command("textualize", "Generate summary and explanation descriptions.")
_stage_command("plausibility", "Score semantic overlap of the descriptions.")


@main.command()
@_config_options
def run(config_path, seed, ks, approaches, explainers, video_set):
    """Run the full pipeline and write records.jsonl plus tables.md."""
    try:
        config = _load_config(config_path, seed, ks, approaches, explainers)
        video_filter = VideoSetFilter.for_video_set(int(video_set))
        report = run_dataset(config, video_filter, upto="run")
        paths = write_outputs(report, config.output_dir)
    except PipelineError as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    for label, path in paths.items():
        click.echo(f"{label}: {path}")
    _echo_summary(report)
    sys.exit(_exit_code(report))


@main.command()
@click.option(
    "--records",
    "records_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="records.jsonl from a previous run.",
)
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Where to write the tables (default: alongside the records).",
)
def report(records_path, out_path):
    """Re-render tables.md from saved records."""
    try:
        records = records_from_jsonl(records_path.read_text(encoding="utf-8"))
    except PipelineError as exc:
        click.echo(f"fatal: {exc}", err=True)
        sys.exit(EXIT_FATAL)
    view = ReportView.from_records(records)
    text = render_tables(view)
    out_path = out_path or records_path.parent / "tables.md"
    out_path.write_text(text, encoding="utf-8")
    click.echo(f"tables: {out_path}")


if __name__ == "__main__":
    main()
