"""Transcript parsing, moderator stripping, sentence segmentation and corpus assembly.

Transcript files are line oriented::

    # comment
    @session: HP-1
    @community: HP
    @topic: T1
    MOD1<TAB>Welcome everyone.
    P03<TAB>I walk daily.
    P04<TAB>[es] Me gusta caminar.

``@topic`` applies to every following turn until the next ``@topic``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from prefect.logging import get_logger

from discourse_mining._types import (
    Corpus,
    DiscussionTopic,
    Document,
    GroupingPolicy,
    LanguageTag,
    Role,
    SentenceRef,
    SentenceUnit,
    Transcript,
    Utterance,
)
from discourse_mining.exception import EmptyCorpusError, TranscriptFormatError

logger = get_logger(__name__)

DEFAULT_ABBREVIATIONS: frozenset[str] = frozenset(
    {"Dr.", "Mr.", "Mrs.", "Ms.", "St.", "e.g.", "i.e."}
)


@dataclass(frozen=True)
class TranscriptFormat:
    """Knobs of the transcript line format."""

    moderator_prefix: str = "MOD"
    translated_marker: str = "[es]"
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
    default_session: str = "S0"


DEFAULT_FORMAT = TranscriptFormat()

_DIRECTIVE_RE = re.compile(r"^@(?P<key>[a-z]+)\s*:\s*(?P<value>.*?)\s*$")
_BOUNDARY_RE = re.compile(r"[.!?]+(?=\s)")
_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def parse_transcript(
    raw: str, fmt: TranscriptFormat = DEFAULT_FORMAT, session_id: str | None = None
) -> Transcript:
    """Parse one transcript file's text.

    An ``@session`` directive names the session; without one the session is
    *session_id*, else ``fmt.default_session``.

    Raises:
        TranscriptFormatError: malformed turn line, unknown or duplicate
            directive, bad topic tag, or an invalid session id.
    """
    fallback = session_id if session_id is not None else fmt.default_session
    session_id = None
    community = ""
    seen: set[str] = set()
    topic = DiscussionTopic.UNTAGGED
    # (speaker, text, topic, language); session id is only known at the end
    turns: list[tuple[str, str, DiscussionTopic, LanguageTag]] = []

    for lineno, line in enumerate(raw.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue

        if line.startswith("@"):
            m = _DIRECTIVE_RE.match(line)
            if m is None:
                raise TranscriptFormatError("malformed directive %r" % line, lineno)
            key, value = m.group("key"), m.group("value")
            if key in ("session", "community"):
                if key in seen:
                    raise TranscriptFormatError("duplicate @%s directive" % key, lineno)
                seen.add(key)
                if not value:
                    raise TranscriptFormatError("empty @%s directive" % key, lineno)
                if key == "session":
                    if not _SESSION_ID_RE.match(value):
                        raise TranscriptFormatError(
                            "session id %r may only contain letters, digits, '.', '_' and '-'" % value,
                            lineno,
                        )
                    session_id = value
                else:
                    community = value
            elif key == "topic":
                try:
                    topic = DiscussionTopic(value)
                except ValueError:
                    raise TranscriptFormatError(
                        "unknown discussion topic %r (expected T1-T4)" % value, lineno
                    ) from None
            else:
                raise TranscriptFormatError("unknown directive @%s" % key, lineno)
            continue

        speaker, sep, text = line.partition("\t")
        if not sep:
            raise TranscriptFormatError("turn line has no TAB separator", lineno)
        speaker = speaker.strip()
        if not speaker:
            raise TranscriptFormatError("turn line has an empty speaker id", lineno)
        text = text.strip()
        language = LanguageTag.PRIMARY
        if text.startswith(fmt.translated_marker + " ") or text == fmt.translated_marker:
            language = LanguageTag.TRANSLATED
            text = text[len(fmt.translated_marker):].strip()
        if not text:
            raise TranscriptFormatError("turn by %s has no text" % speaker, lineno)
        turns.append((speaker, text, topic, language))

    if session_id is None:
        if not _SESSION_ID_RE.match(fallback):
            raise TranscriptFormatError(
                "no @session directive and %r is not a valid session id" % fallback
            )
        session_id = fallback

    utterances = tuple(
        Utterance(
            speaker_id=speaker,
            role=_role_of(speaker, fmt),
            session_id=session_id,
            text=text,
            discussion_topic=topic_,
            language_tag=language,
            index=i,
        )
        for i, (speaker, text, topic_, language) in enumerate(turns)
    )
    return Transcript(session_id=session_id, community_label=community, utterances=utterances)


def serialize_transcript(t: Transcript, fmt: TranscriptFormat = DEFAULT_FORMAT) -> str:
    """Write *t* back in the transcript format; ``parse_transcript`` inverts it."""
    lines = ["@session: %s" % t.session_id]
    if t.community_label:
        lines.append("@community: %s" % t.community_label)
    topic = DiscussionTopic.UNTAGGED
    for u in t.utterances:
        if u.discussion_topic != topic:
            topic = u.discussion_topic
            lines.append("@topic: %s" % topic.value)
        text = u.text
        if u.language_tag == LanguageTag.TRANSLATED:
            text = "%s %s" % (fmt.translated_marker, text)
        lines.append("%s\t%s" % (u.speaker_id, text))
    return "\n".join(lines) + "\n"


def load_transcripts(
    paths: Iterable[str | Path], fmt: TranscriptFormat = DEFAULT_FORMAT
) -> list[Transcript]:
    """Parse every transcript file named by *paths*; directories contribute their ``*.txt``.

    A file without an ``@session`` directive takes its stem as the session id.
    """
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("*.txt")))
        else:
            files.append(p)

    transcripts: list[Transcript] = []
    sessions: dict[str, Path] = {}
    for f in files:
        try:
            raw = f.read_bytes().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TranscriptFormatError("%s is not valid UTF-8: %s" % (f, exc)) from None
        try:
            t = parse_transcript(raw, fmt, session_id=f.stem)
        except TranscriptFormatError as exc:
            raise TranscriptFormatError("%s: %s" % (f, exc)) from None
        if t.session_id in sessions:
            raise TranscriptFormatError(
                "session %s appears in both %s and %s" % (t.session_id, sessions[t.session_id], f)
            )
        sessions[t.session_id] = f
        transcripts.append(t)
    logger.debug("Loaded %d transcripts from %d files", len(transcripts), len(files))
    return transcripts


def _role_of(speaker_id: str, fmt: TranscriptFormat) -> Role:
    if speaker_id.startswith(fmt.moderator_prefix):
        return Role.MODERATOR
    return Role.PARTICIPANT


# ---------------------------------------------------------------------------
# Moderator removal and sentences
# ---------------------------------------------------------------------------


def strip_moderator(t: Transcript) -> Transcript:
    """Keep only participant turns, in order."""
    kept = tuple(u for u in t.utterances if u.role == Role.PARTICIPANT)
    return replace(t, utterances=kept)


def segment_sentences(
    text: str, abbreviations: frozenset[str] | set[str] = DEFAULT_ABBREVIATIONS
) -> list[str]:
    """Split on '.', '!' or '?' followed by whitespace, except after an abbreviation."""
    sentences: list[str] = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end()
        if text[start:end].split()[-1] in abbreviations:
            continue
        piece = text[start:end].strip()
        if piece:
            sentences.append(piece)
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def sentence_units(
    transcripts: Sequence[Transcript],
    abbreviations: frozenset[str] | set[str] = DEFAULT_ABBREVIATIONS,
) -> list[SentenceUnit]:
    """Flatten the participant turns of *transcripts* into scored-sentence units."""
    units: list[SentenceUnit] = []
    for t in transcripts:
        for u in t.utterances:
            if u.role != Role.PARTICIPANT:
                continue
            for j, sentence in enumerate(segment_sentences(u.text, abbreviations)):
                units.append(
                    SentenceUnit(
                        ref=SentenceRef(t.session_id, u.index, j),
                        text=sentence,
                        speaker_id=u.speaker_id,
                        community_label=t.community_label,
                        discussion_topic=u.discussion_topic,
                    )
                )
    return units


# ---------------------------------------------------------------------------
# Corpus assembly
# ---------------------------------------------------------------------------


def build_corpus(
    transcripts: Sequence[Transcript],
    policy: GroupingPolicy = GroupingPolicy.PER_UTTERANCE,
    abbreviations: frozenset[str] | set[str] = DEFAULT_ABBREVIATIONS,
) -> Corpus:
    """Group participant utterances into documents according to *policy*.

    Raises:
        EmptyCorpusError: no transcripts, or no participant utterances in them.
    """
    if not transcripts:
        raise EmptyCorpusError("cannot build a corpus from an empty transcript list")

    groups: dict[str, list[Utterance]] = {}
    for t in transcripts:
        for u in t.utterances:
            if u.role != Role.PARTICIPANT:
                continue
            groups.setdefault(_group_key(t.session_id, u, policy), []).append(u)

    if not groups:
        raise EmptyCorpusError("transcripts contain no participant utterances")

    documents = tuple(_document(doc_id, members, abbreviations) for doc_id, members in groups.items())
    return Corpus(documents=documents, grouping_policy=policy)


def _document(doc_id: str, members: list[Utterance], abbreviations: frozenset[str] | set[str]) -> Document:
    sentences: list[str] = []
    sources: list[int] = []
    for i, u in enumerate(members):
        for s in segment_sentences(u.text, abbreviations):
            sentences.append(s)
            sources.append(i)
    return Document(
        doc_id=doc_id,
        source_refs=tuple((u.session_id, u.index) for u in members),
        sentences=tuple(sentences),
        sentence_sources=tuple(sources),
    )


def _group_key(session_id: str, u: Utterance, policy: GroupingPolicy) -> str:
    if policy == GroupingPolicy.PER_UTTERANCE:
        return "%s:%d" % (session_id, u.index)
    if policy == GroupingPolicy.PER_SPEAKER:
        return "%s:%s" % (session_id, u.speaker_id)
    return "%s:%s" % (session_id, u.discussion_topic.value)


def export_corpus_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Write one JSON object per document: doc_id, source_refs, sentences, sentence_sources."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for d in corpus.documents:
            record = {
                "doc_id": d.doc_id,
                "source_refs": [list(r) for r in d.source_refs],
                "sentences": list(d.sentences),
                "sentence_sources": list(d.sentence_sources),
            }
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_corpus_jsonl(
    path: str | Path, policy: GroupingPolicy = GroupingPolicy.PER_UTTERANCE
) -> Corpus:
    documents = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            record = json.loads(line)
            documents.append(
                Document(
                    doc_id=record["doc_id"],
                    source_refs=tuple((s, int(i)) for s, i in record["source_refs"]),
                    sentences=tuple(record["sentences"]),
                    sentence_sources=tuple(int(i) for i in record.get("sentence_sources", ())),
                )
            )
    return Corpus(documents=tuple(documents), grouping_policy=policy)
