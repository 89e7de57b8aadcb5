"""Shared dataclasses and enums for the discourse-mining toolkit.

These are the value objects that flow between the corpus, preprocess,
sentiment and analysis stages.  They are immutable and carry no business
logic; the stage modules build and consume them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Role(str, Enum):
    PARTICIPANT = "participant"
    MODERATOR = "moderator"


class DiscussionTopic(str, Enum):
    """Focus-group guide themes an utterance was spoken under."""

    T1 = "T1"  # built environment
    T2 = "T2"  # well-being
    T3 = "T3"  # cultural and community identities
    T4 = "T4"  # improvements
    UNTAGGED = "untagged"


class LanguageTag(str, Enum):
    PRIMARY = "primary"
    TRANSLATED = "translated"


class GroupingPolicy(str, Enum):
    """How participant utterances are grouped into analysis documents."""

    PER_UTTERANCE = "per_utterance"
    PER_SPEAKER = "per_speaker"
    PER_SESSION_TOPIC = "per_session_topic"


class SentimentClass(str, Enum):
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    POSITIVE = "positive"


# ---------------------------------------------------------------------------
# Transcripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Utterance:
    """One uninterrupted speaker turn."""

    speaker_id: str
    role: Role
    session_id: str
    text: str
    discussion_topic: DiscussionTopic = DiscussionTopic.UNTAGGED
    language_tag: LanguageTag = LanguageTag.PRIMARY
    index: int = 0                     # position in the source transcript


@dataclass(frozen=True)
class Transcript:
    session_id: str
    community_label: str
    utterances: tuple[Utterance, ...] = ()


# ---------------------------------------------------------------------------
# Corpora
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Document:
    """An analysis document assembled from one or more participant utterances."""

    doc_id: str
    source_refs: tuple[tuple[str, int], ...]   # (session_id, utterance index)
    sentences: tuple[str, ...]
    tokens: tuple[str, ...] = ()               # filled in by preprocess
    sentence_sources: tuple[int, ...] = ()     # per sentence, index into source_refs


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    grouping_policy: GroupingPolicy = GroupingPolicy.PER_UTTERANCE

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d.doc_id for d in self.documents)


@dataclass(frozen=True, order=True)
class SentenceRef:
    """Locates one sentence: session, utterance index in the source file, sentence index."""

    session_id: str
    utterance_index: int
    sentence_index: int


@dataclass(frozen=True)
class SentenceUnit:
    """A participant sentence together with the metadata reports group on."""

    ref: SentenceRef
    text: str
    speaker_id: str
    community_label: str
    discussion_topic: DiscussionTopic = DiscussionTopic.UNTAGGED


@dataclass(frozen=True)
class CandidatePhrase:
    """An adjective-noun (optionally adverb-led) sentiment-bearing phrase."""

    tokens: tuple[str, ...]
    head_noun: str
    modifier: str
    ref: SentenceRef | None = None

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class ThemePassage:
    """A run of sentences around topic-term mentions."""

    sentences: tuple[str, ...]
    source_refs: tuple[tuple[str, int], ...]
    doc_id: str = ""
    matched_terms: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Scores and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SentenceScore:
    ref: SentenceRef
    probability: float                 # probability of positiveness
    sentiment_class: SentimentClass
    speaker_id: str = ""
    community_label: str = ""
    discussion_topic: DiscussionTopic = DiscussionTopic.UNTAGGED


@dataclass(frozen=True)
class ModePhraseScore:
    """One (mode, phrase, score) contribution to the transport-mode table."""

    mode: str
    phrase: str                        # empty when the classifier fallback was used
    score: float
    ref: SentenceRef | None = None
    community_label: str = ""


@dataclass(frozen=True)
class SpeakerReport:
    speaker_id: str
    utterance_means: tuple[float, ...]
    mean: float
    count: int
    session_id: str = ""
    community_label: str = ""
    discussion_topic: str = "all"


@dataclass(frozen=True)
class TopicSentimentReport:
    discussion_topic: DiscussionTopic
    community_label: str
    mu: float


@dataclass(frozen=True)
class ModeSentimentRow:
    mode: str
    mean: float | None
    std_dev: float | None
    count: int
    community_label: str = field(default="", compare=False)
