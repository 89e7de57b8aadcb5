"""Topic and sentiment mining for focus-group transcripts."""

__version__ = "0.1.0"

from discourse_mining.config import PipelineConfig, validate_config
from discourse_mining.corpus import build_corpus, parse_transcript, segment_sentences, strip_moderator
from discourse_mining.exception import (
    ConfigError,
    DataError,
    DiscourseMiningException,
    StageError,
)
from discourse_mining.pipeline import ReportBundle, emit_report, run_pipeline
from discourse_mining.sentiment import build_lexicon, log_odds, train_classifier
from discourse_mining.topics import LdaConfig, fit_lda, top_words

__all__ = [
    "ConfigError",
    "DataError",
    "DiscourseMiningException",
    "LdaConfig",
    "PipelineConfig",
    "ReportBundle",
    "StageError",
    "build_corpus",
    "build_lexicon",
    "emit_report",
    "fit_lda",
    "log_odds",
    "parse_transcript",
    "run_pipeline",
    "segment_sentences",
    "strip_moderator",
    "top_words",
    "train_classifier",
    "validate_config",
]
