"""Pipeline configuration: a ``key = value`` file validated by pydantic models.

Example::

    # comments start with '#'
    input = transcripts/
    output = out/
    seed = 42
    topics.k = 5
    sentiment.positive_seeds = good, wonderful, spectacular

List values are comma separated.  Relative paths resolve against the
directory of the config file.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, Literal, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from discourse_mining._types import GroupingPolicy
from discourse_mining.corpus import DEFAULT_ABBREVIATIONS, TranscriptFormat
from discourse_mining.exception import ConfigError
from discourse_mining.sentiment import NEUTRAL_HIGH, NEUTRAL_LOW, SeedWordSets
from discourse_mining.topics import LdaConfig

_LIST_KEYS = frozenset(
    {
        "input",
        "corpus.abbreviations",
        "sentiment.positive_seeds",
        "sentiment.negative_seeds",
        "sentiment.lambda_grid",
    }
)
_PATH_KEYS = frozenset(
    {
        "input",
        "output",
        "preprocess.rules",
        "sentiment.reference_corpus",
        "sentiment.labels",
        "analysis.modes",
    }
)
# Path keys that may be set to "none" to switch the resource off.
_OPTIONAL_PATH_KEYS = frozenset({"sentiment.reference_corpus", "sentiment.labels"})


class _Settings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CorpusSettings(_Settings):
    moderator_prefix: str = Field("MOD", min_length=1)
    grouping: GroupingPolicy = GroupingPolicy.PER_UTTERANCE
    abbreviations: tuple[str, ...] = tuple(sorted(DEFAULT_ABBREVIATIONS))

    def transcript_format(self) -> TranscriptFormat:
        return TranscriptFormat(
            moderator_prefix=self.moderator_prefix, abbreviations=frozenset(self.abbreviations)
        )


class PreprocessSettings(_Settings):
    rules: Path | None = None          # None: bundled defaults
    min_df: int = Field(1, ge=1)


class TopicSettings(_Settings):
    k: int = Field(5, ge=1)
    alpha: float = Field(0.1, gt=0)
    beta: float = Field(0.01, gt=0)
    iterations: int = Field(2000, ge=1)
    burn_in: int = Field(500, ge=0)
    top_n: int = Field(10, ge=1)
    passage_window: int = Field(1, ge=0)

    @model_validator(mode="after")
    def _burn_in_before_end(self) -> "TopicSettings":
        if self.iterations <= self.burn_in:
            raise ValueError("iterations must exceed burn_in")
        return self

    def lda_config(self, seed: int) -> LdaConfig:
        return LdaConfig(
            k=self.k, alpha=self.alpha, beta=self.beta,
            iterations=self.iterations, burn_in=self.burn_in, seed=seed,
        )


class SentimentSettings(_Settings):
    positive_seeds: tuple[str, ...] = tuple(sorted(SeedWordSets().positive))
    negative_seeds: tuple[str, ...] = tuple(sorted(SeedWordSets().negative))
    window: int = Field(10, ge=1)
    tau: float = Field(0.2, ge=0)
    lambda_count: int = Field(50, ge=1)
    lambda_ratio: float = Field(1e-4, gt=0, lt=1)
    lambda_grid: tuple[float, ...] | None = None
    mix: float = Field(0.5, ge=0, le=1)
    folds: int = Field(10, ge=2)
    neutral_low: float = Field(NEUTRAL_LOW, ge=0, le=1)
    neutral_high: float = Field(NEUTRAL_HIGH, ge=0, le=1)
    reference_corpus: Literal["bundled"] | Path | None = "bundled"
    labels: Path | None = None
    max_sweeps: int = Field(10000, ge=1)

    @model_validator(mode="after")
    def _ordered_thresholds(self) -> "SentimentSettings":
        if self.neutral_low > self.neutral_high:
            raise ValueError("neutral_low must not exceed neutral_high")
        if self.lambda_grid is not None and any(v <= 0 for v in self.lambda_grid):
            raise ValueError("lambda_grid values must be > 0")
        return self

    def seed_words(self) -> SeedWordSets:
        return SeedWordSets(frozenset(self.positive_seeds), frozenset(self.negative_seeds))


class AnalysisSettings(_Settings):
    modes: Path | None = None          # None: built-in dictionary
    include_t4: bool = False
    mu_unit: Literal["sentence", "utterance"] = "sentence"


class PipelineConfig(_Settings):
    input: tuple[Path, ...] = Field(min_length=1)
    output: Path
    seed: int = Field(0, ge=0, lt=2**64)
    format: Literal["csv", "json"] = "csv"
    corpus: CorpusSettings = CorpusSettings()
    preprocess: PreprocessSettings = PreprocessSettings()
    topics: TopicSettings = TopicSettings()
    sentiment: SentimentSettings = SentimentSettings()
    analysis: AnalysisSettings = AnalysisSettings()

    def digest(self) -> str:
        """sha256 of every setting except the output location."""
        payload = self.model_dump_json(exclude={"output"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def derive_seed(seed: int, *labels: str) -> int:
    """Independent 64-bit seed for one stochastic stage (and community)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(seed.to_bytes(8, "little"))
    for label in labels:
        h.update(b"\x00" + label.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _read_pairs(path: Path) -> tuple[dict[str, str], dict[str, int]]:
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError("cannot read config file %s: %s" % (path, exc)) from None
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("expected key = value", line=lineno)
        if key in values:
            raise ConfigError("key given twice (first on line %d)" % lines[key], key=key, line=lineno)
        values[key] = value.strip()
        lines[key] = lineno
    return values, lines


def _convert(key: str, value: str, base_dir: Path) -> Any:
    if key in _OPTIONAL_PATH_KEYS and value.lower() == "none":
        return None
    if key == "sentiment.reference_corpus" and value == "bundled":
        return value
    if key in _LIST_KEYS:
        items = [v.strip() for v in value.split(",") if v.strip()]
        if key in _PATH_KEYS:
            return [str(base_dir / v) for v in items]
        return items
    if key in _PATH_KEYS:
        return str(base_dir / value)
    return value


def _nest(flat: Mapping[str, Any]) -> dict[str, Any]:
    tree: dict[str, Any] = {}
    for key, value in flat.items():
        section, dot, name = key.partition(".")
        if dot:
            sub = tree.setdefault(section, {})
            if not isinstance(sub, dict):
                raise ConfigError("%r is a section, not a value" % section, key=section)
            sub[name] = value
        elif isinstance(tree.get(key), dict):
            raise ConfigError("%r is a section, not a value" % key, key=key)
        else:
            tree[key] = value
    return tree


def _locate(loc: tuple[Any, ...], lines: Mapping[str, int]) -> tuple[str, int | None]:
    parts = [str(p) for p in loc if not isinstance(p, int)]
    for n in range(len(parts), 0, -1):
        key = ".".join(parts[:n])
        if key in lines:
            return key, lines[key]
        for known, lineno in lines.items():
            if known.startswith(key + "."):
                return known, lineno
    return ".".join(parts), None


def validate_config(
    path: str | Path, overrides: Mapping[str, str] | None = None
) -> PipelineConfig:
    """Parse and validate a pipeline config file.

    *overrides* replace file values (e.g. ``{"seed": "7"}`` from the command
    line); relative override paths resolve against the working directory.

    Raises:
        ConfigError: unreadable file, unknown key, bad value or missing
            referenced file; the message names the key and line.
    """
    path = Path(path)
    values, lines = _read_pairs(path)
    base_dir = path.parent.resolve()
    flat = {k: _convert(k, v, base_dir) for k, v in values.items()}
    for key, value in (overrides or {}).items():
        flat[key] = _convert(key, value, Path.cwd())
        lines.pop(key, None)

    try:
        config = PipelineConfig.model_validate(_nest(flat))
    except ValidationError as exc:
        err = exc.errors()[0]
        key, lineno = _locate(tuple(err["loc"]), lines)
        if err["type"] == "extra_forbidden":
            raise ConfigError("unknown key", key=key, line=lineno) from None
        if err["type"] == "missing":
            raise ConfigError("required key is missing", key=key, line=lineno) from None
        raise ConfigError(err["msg"], key=key, line=lineno) from None

    _check_files(config, lines)
    return config


def _check_files(config: PipelineConfig, lines: Mapping[str, int]) -> None:
    def need(key: str, p: Path | None) -> None:
        if p is not None and not p.exists():
            raise ConfigError("no such file or directory: %s" % p, key=key, line=lines.get(key))

    for p in config.input:
        need("input", p)
    need("preprocess.rules", config.preprocess.rules)
    if isinstance(config.sentiment.reference_corpus, Path):
        need("sentiment.reference_corpus", config.sentiment.reference_corpus)
    need("sentiment.labels", config.sentiment.labels)
    need("analysis.modes", config.analysis.modes)
