"""Tests for the discourse-mining command line."""
from __future__ import annotations

from pathlib import Path
from typing import Callable

import pytest
from click.testing import CliRunner

from discourse_mining.cli import cli


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


class TestCli:
    def test_help_lists_commands(self, runner: CliRunner) -> None:
        result = runner.invoke(cli, ["--help"])
        assert result.exit_code == 0
        for command in ("ingest", "topics", "sentiment", "report", "run"):
            assert command in result.output

    def test_missing_config_file(self, runner: CliRunner, tmp_path: Path) -> None:
        result = runner.invoke(cli, ["ingest", "--config", str(tmp_path / "nope.cfg")])
        assert result.exit_code == 2
        assert "Configuration error" in result.output

    def test_config_option_required(self, runner: CliRunner) -> None:
        result = runner.invoke(cli, ["ingest"])
        assert result.exit_code == 2
        assert "--config" in result.output

    def test_bad_value_names_key(self, runner: CliRunner, write_config: Callable[..., Path]) -> None:
        result = runner.invoke(cli, ["ingest", "--config", str(write_config(topics__k=0))])
        assert result.exit_code == 2
        assert "topics.k" in result.output
        assert "line 3" in result.output

    def test_data_error_exit_code(
        self, runner: CliRunner, write_config: Callable[..., Path], transcripts_dir: Path
    ) -> None:
        path = write_config(input=transcripts_dir / "moderators_only.txt")
        result = runner.invoke(cli, ["ingest", "--config", str(path)])
        assert result.exit_code == 3
        assert "Pipeline stage failed" in result.output
        assert "ingest" in result.output

    def test_ingest_with_overrides(
        self, runner: CliRunner, write_config: Callable[..., Path], tmp_path: Path
    ) -> None:
        out = tmp_path / "elsewhere"
        result = runner.invoke(
            cli, ["ingest", "--config", str(write_config()), "--output", str(out), "--log-level", "warning"]
        )
        assert result.exit_code == 0, result.output
        assert (out / "ingest" / "communities.json").exists()
        assert not (tmp_path / "out").exists()

    def test_missing_upstream(self, runner: CliRunner, write_config: Callable[..., Path]) -> None:
        result = runner.invoke(cli, ["report", "--config", str(write_config())])
        assert result.exit_code == 3
        assert "run the sentiment stage first" in result.output

    def test_output_is_a_file(
        self, runner: CliRunner, write_config: Callable[..., Path], tmp_path: Path
    ) -> None:
        out = tmp_path / "taken"
        out.write_text("", encoding="utf-8")
        result = runner.invoke(cli, ["ingest", "--config", str(write_config()), "--output", str(out)])
        assert result.exit_code == 3
        assert "not writable" in result.output
