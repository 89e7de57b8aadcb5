"""Exceptions raised by the discourse-mining toolkit."""

from __future__ import annotations


class DiscourseMiningException(Exception):
    """Base error for the toolkit.

    ``exit_code`` is what the CLI returns when this error escapes a command.
    """

    headline = "Discourse mining error"
    exit_code = 4


class ConfigError(DiscourseMiningException):
    """Raised for unknown keys, missing files and out-of-range configuration values."""

    headline = "Configuration error"
    exit_code = 2

    def __init__(self, msg: str, key: str | None = None, line: int | None = None) -> None:
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append("key *%s*" % key)
        if line is not None:
            where.append("line %d" % line)
        if where:
            msg = "%s (%s)" % (msg, ", ".join(where))
        super().__init__(msg)


class DataError(DiscourseMiningException):
    """Base error for problems with input data."""

    headline = "Data error"
    exit_code = 3


class TranscriptFormatError(DataError):
    """Raised when a transcript file does not follow the line format."""

    headline = "Transcript format error"

    def __init__(self, msg: str, line_number: int | None = None) -> None:
        self.line_number = line_number
        if line_number is not None:
            msg = "line %d: %s" % (line_number, msg)
        super().__init__(msg)


class EmptyCorpusError(DataError):
    headline = "Empty corpus"


class VocabularyError(DataError):
    """Empty vocabularies and matrix/vocabulary mismatches."""

    headline = "Vocabulary error"


class UnknownDocumentError(DataError):
    headline = "Unknown document"


class TopicRangeError(DataError):
    headline = "Topic out of range"


class TrainingDataError(DataError):
    """Raised when a labeled set cannot train or cross-validate a classifier."""

    headline = "Training data error"


class DimensionError(DataError):
    headline = "Dimension mismatch"


class StageError(DiscourseMiningException):
    """Raised by the pipeline when a stage fails; wraps the underlying cause."""

    headline = "Pipeline stage failed"

    def __init__(self, stage: str, cause: BaseException) -> None:
        self.stage = stage
        self.cause = cause
        if isinstance(cause, DiscourseMiningException):
            self.exit_code = cause.exit_code
        super().__init__("%s stage failed: %s" % (stage, cause))
