from __future__ import annotations

import json

import pytest
import yaml
from click.testing import CliRunner

from vsxplain.cli import main
from vsxplain.fixtures import write_demo_tree
from vsxplain.reporting import records_from_jsonl


@pytest.fixture
def demo(tmp_path):
    write_demo_tree(tmp_path, seed=4)
    return tmp_path


@pytest.fixture
def runner():
    return CliRunner()


def _set_config(tmp_path, **updates):
    config_path = tmp_path / "config.yaml"
    config = yaml.safe_load(config_path.read_text())
    config.update(updates)
    config_path.write_text(yaml.safe_dump(config))
    return config_path


class TestRun:
    def test_full_run_exit_zero(self, demo, runner):
        result = runner.invoke(main, ["run", "--config", str(demo / "config.yaml")])
        assert result.exit_code == 0, result.output
        records_path = demo / "run" / "records.jsonl"
        tables_path = demo / "run" / "tables.md"
        assert records_path.exists() and tables_path.exists()
        records = records_from_jsonl(records_path.read_text())
        assert records
        assert "Faithfulness" in tables_path.read_text()

    def test_k_override_limits_records(self, demo, runner):
        result = runner.invoke(
            main, ["run", "--config", str(demo / "config.yaml"), "--k", "1"]
        )
        assert result.exit_code == 0, result.output
        records = records_from_jsonl((demo / "run" / "records.jsonl").read_text())
        assert {r.k for r in records} == {1}

    def test_video_set_2_excludes_two_fragment_video(self, demo, runner):
        result = runner.invoke(
            main, ["run", "--config", str(demo / "config.yaml"), "--video-set", "2"]
        )
        assert result.exit_code == 0, result.output
        records = records_from_jsonl((demo / "run" / "records.jsonl").read_text())
        assert {r.video_id for r in records} == {"fix-a", "fix-b"}

    def test_explainer_and_approach_overrides(self, demo, runner):
        result = runner.invoke(
            main,
            [
                "run",
                "--config",
                str(demo / "config.yaml"),
                "--explainer",
                "attention",
                "--approach",
                "approach1",
            ],
        )
        assert result.exit_code == 0, result.output
        records = records_from_jsonl((demo / "run" / "records.jsonl").read_text())
        assert {r.explainer_id for r in records} == {"attention"}
        assert {r.approach_id for r in records} == {"approach1"}

    def test_seed_override_changes_digest(self, demo, runner):
        runner.invoke(main, ["run", "--config", str(demo / "config.yaml")])
        first = records_from_jsonl((demo / "run" / "records.jsonl").read_text())
        runner.invoke(
            main, ["run", "--config", str(demo / "config.yaml"), "--seed", "99"]
        )
        second = records_from_jsonl((demo / "run" / "records.jsonl").read_text())
        assert first[0].config_digest != second[0].config_digest
        assert second[0].seed == 99

    def test_missing_dataset_is_fatal(self, demo, runner, tmp_path):
        config_path = _set_config(
            demo, datasets=[{"dataset_id": "x", "container": str(tmp_path / "no.h5")}]
        )
        result = runner.invoke(main, ["run", "--config", str(config_path)])
        # unreadable container quarantines the dataset -> partial, not fatal
        assert result.exit_code == 2

    def test_bad_config_is_fatal(self, demo, runner):
        config_path = _set_config(demo, replacement="sparkles")
        result = runner.invoke(main, ["run", "--config", str(config_path)])
        assert result.exit_code == 1
        assert "fatal" in result.output


class TestStages:
    @pytest.mark.parametrize(
        "verb", ["summarize", "explain", "faithfulness", "textualize", "plausibility"]
    )
    def test_stage_writes_artifact(self, demo, runner, verb):
        result = runner.invoke(main, [verb, "--config", str(demo / "config.yaml")])
        assert result.exit_code == 0, result.output
        payload = json.loads((demo / "run" / "stages" / f"{verb}.json").read_text())
        assert payload["stage"] == verb
        assert payload["videos"]

    def test_faithfulness_has_disc_but_no_texts(self, demo, runner):
        runner.invoke(main, ["faithfulness", "--config", str(demo / "config.yaml")])
        payload = json.loads(
            (demo / "run" / "stages" / "faithfulness.json").read_text()
        )
        video = payload["videos"][0]
        assert "disc_plus" in video and "texts" not in video


class TestIngest:
    def test_manifest_written(self, demo, runner):
        result = runner.invoke(main, ["ingest", "--config", str(demo / "config.yaml")])
        assert result.exit_code == 0, result.output
        manifest = json.loads((demo / "run" / "stages" / "ingest.json").read_text())
        assert {m["video_id"] for m in manifest} == {"fix-a", "fix-b", "fix-c"}
        assert all("content_digest" in m for m in manifest)
        assert "fix-a: 50 frames x 16 dims, 10 fragments" in result.output


class TestReport:
    def test_rerender_from_records(self, demo, runner, tmp_path):
        runner.invoke(main, ["run", "--config", str(demo / "config.yaml")])
        records_path = demo / "run" / "records.jsonl"
        out_path = tmp_path / "tables-again.md"
        result = runner.invoke(
            main, ["report", "--records", str(records_path), "--out", str(out_path)]
        )
        assert result.exit_code == 0, result.output
        text = out_path.read_text()
        assert "Faithfulness" in text and "Plausibility" in text

    def test_malformed_records_fatal(self, runner, tmp_path):
        bad = tmp_path / "records.jsonl"
        bad.write_text("not json\n")
        result = runner.invoke(main, ["report", "--records", str(bad)])
        assert result.exit_code == 1
