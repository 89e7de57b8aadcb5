"""Tests for discourse_mining.config."""
from __future__ import annotations

from pathlib import Path
from typing import Callable

import pytest

from discourse_mining._types import GroupingPolicy
from discourse_mining.config import PipelineConfig, derive_seed, validate_config
from discourse_mining.exception import ConfigError


class TestValidateConfig:
    """Tests for validate_config."""

    def test_defaults(
        self, write_config: Callable[..., Path], sample_dir: Path, tmp_path: Path
    ) -> None:
        config = validate_config(write_config())
        assert config.input == (sample_dir,)
        assert config.output == tmp_path.resolve() / "out"
        assert config.seed == 0
        assert config.format == "csv"
        assert config.topics.k == 5
        assert config.topics.alpha == 0.1 and config.topics.beta == 0.01
        assert config.corpus.grouping is GroupingPolicy.PER_UTTERANCE
        assert config.sentiment.reference_corpus == "bundled"
        assert set(config.sentiment.positive_seeds) == {"good", "wonderful", "spectacular"}
        assert config.sentiment.neutral_low == 0.35 and config.sentiment.neutral_high == 0.65

    def test_values(self, write_config: Callable[..., Path]) -> None:
        config = validate_config(
            write_config(
                seed=42,
                topics__k=3,
                corpus__grouping="per_speaker",
                sentiment__negative_seeds="bad, terrible",
                sentiment__lambda_grid="0.1, 0.01",
                analysis__include_t4="true",
            )
        )
        assert config.seed == 42
        assert config.topics.k == 3
        assert config.corpus.grouping is GroupingPolicy.PER_SPEAKER
        assert config.sentiment.negative_seeds == ("bad", "terrible")
        assert config.sentiment.lambda_grid == (0.1, 0.01)
        assert config.analysis.include_t4 is True

    def test_zero_topics_names_key_and_line(self, write_config: Callable[..., Path]) -> None:
        with pytest.raises(ConfigError) as exc_info:
            validate_config(write_config(seed=1, topics__k=0))
        assert exc_info.value.key == "topics.k"
        assert exc_info.value.line == 4
        assert "topics.k" in str(exc_info.value) and "line 4" in str(exc_info.value)

    def test_unknown_key(self, write_config: Callable[..., Path]) -> None:
        with pytest.raises(ConfigError, match="unknown key") as exc_info:
            validate_config(write_config(topics__kk=3))
        assert exc_info.value.key == "topics.kk"
        assert exc_info.value.line == 3

    def test_missing_input(self, tmp_path: Path) -> None:
        path = tmp_path / "run.cfg"
        path.write_text("output = out\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="required key is missing") as exc_info:
            validate_config(path)
        assert exc_info.value.key == "input"

    def test_input_does_not_exist(self, write_config: Callable[..., Path]) -> None:
        with pytest.raises(ConfigError, match="no such file") as exc_info:
            validate_config(write_config(input="nowhere"))
        assert exc_info.value.line == 1

    def test_burn_in_after_iterations(self, write_config: Callable[..., Path]) -> None:
        with pytest.raises(ConfigError):
            validate_config(write_config(topics__iterations=100, topics__burn_in=100))

    def test_thresholds_ordered(self, write_config: Callable[..., Path]) -> None:
        with pytest.raises(ConfigError):
            validate_config(write_config(sentiment__neutral_low=0.7, sentiment__neutral_high=0.6))

    def test_malformed_line(self, tmp_path: Path) -> None:
        path = tmp_path / "run.cfg"
        path.write_text("input = .\njust words\n", encoding="utf-8")
        with pytest.raises(ConfigError) as exc_info:
            validate_config(path)
        assert exc_info.value.line == 2

    def test_duplicate_key(self, tmp_path: Path) -> None:
        path = tmp_path / "run.cfg"
        path.write_text("input = .\noutput = a\noutput = b\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="given twice"):
            validate_config(path)

    def test_overrides(self, write_config: Callable[..., Path], tmp_path: Path, monkeypatch) -> None:
        monkeypatch.chdir(tmp_path)
        config = validate_config(write_config(seed=1), {"seed": "9", "output": "elsewhere", "format": "json"})
        assert config.seed == 9
        assert config.output == Path.cwd() / "elsewhere"
        assert config.format == "json"

    def test_relative_paths_follow_config(self, tmp_path: Path, sample_dir: Path) -> None:
        sub = tmp_path / "conf"
        sub.mkdir()
        (sub / "modes.txt").write_text("walking = walk\n", encoding="utf-8")
        path = sub / "run.cfg"
        path.write_text(
            "input = %s\noutput = out\nanalysis.modes = modes.txt\nsentiment.reference_corpus = none\n"
            % sample_dir,
            encoding="utf-8",
        )
        config = validate_config(path)
        assert config.analysis.modes == sub.resolve() / "modes.txt"
        assert config.sentiment.reference_corpus is None

    def test_sample_config(self, sample_dir: Path) -> None:
        config = validate_config(sample_dir / "run.cfg")
        assert len(config.input) == 2
        assert config.seed == 20240501


class TestDigestAndSeeds:
    def test_digest_ignores_output(self, write_config: Callable[..., Path]) -> None:
        config = validate_config(write_config())
        moved = config.model_copy(update={"output": Path("/elsewhere")})
        assert moved.digest() == config.digest()
        assert config.model_copy(update={"seed": 5}).digest() != config.digest()

    def test_derive_seed(self) -> None:
        assert derive_seed(1, "topics", "HP") == derive_seed(1, "topics", "HP")
        assert derive_seed(1, "topics", "HP") != derive_seed(1, "topics", "EV")
        assert derive_seed(1, "topics") != derive_seed(2, "topics")
        assert 0 <= derive_seed(2**64 - 1, "sentiment") < 2**64

    def test_frozen(self, write_config: Callable[..., Path]) -> None:
        config = validate_config(write_config())
        with pytest.raises(Exception):
            config.seed = 3  # type: ignore[misc]
        assert isinstance(config, PipelineConfig)
