"""Aggregate sentence scores into speaker, discussion-topic and transport-mode reports."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import pandas as pd
from prefect.logging import get_logger

from discourse_mining._types import (
    DiscussionTopic,
    ModePhraseScore,
    ModeSentimentRow,
    SentenceScore,
    SpeakerReport,
    TopicSentimentReport,
)
from discourse_mining.exception import ConfigError

logger = get_logger(__name__)

MuUnit = Literal["sentence", "utterance"]

DEFAULT_MODES: dict[str, tuple[str, ...]] = {
    "walking": ("walk", "pedestrian", "sidewalk", "crosswalk"),
    "bicycling": ("bike", "bicycle", "cycling", "cyclist", "bike lane"),
    "public_transportation": ("bus", "train", "transit", "rail", "station"),
    "private_car": ("car", "driving", "parking", "traffic", "vehicle"),
    "shared_multimodal": (
        "uber", "lyft", "divvy", "bikeshare", "rideshare", "ridesourcing", "carshare", "multimodal",
    ),
}

FLOAT_FORMAT = "%.6f"
ALL_TOPICS = "all"


def load_mode_dictionary(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Read ``mode = keyword, keyword two, ...`` lines."""
    modes: dict[str, tuple[str, ...]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        mode, sep, words = line.partition("=")
        mode = mode.strip()
        keywords = tuple(w.strip() for w in words.split(",") if w.strip())
        if not sep or not mode:
            raise ConfigError("expected 'mode = keyword, ...'", key="analysis.modes", line=lineno)
        if not keywords:
            raise ConfigError("mode %r has no keywords" % mode, key="analysis.modes", line=lineno)
        if mode in modes:
            raise ConfigError("mode %r listed twice" % mode, key="analysis.modes", line=lineno)
        modes[mode] = keywords
    if not modes:
        raise ConfigError("mode dictionary %s is empty" % path, key="analysis.modes")
    return modes


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _sample_std(values: Sequence[float]) -> float | None:
    if len(values) < 2:
        return None
    m = _mean(values)
    return math.sqrt(math.fsum((v - m) ** 2 for v in values) / (len(values) - 1))


# ---------------------------------------------------------------------------
# Speakers
# ---------------------------------------------------------------------------


def speaker_positiveness(
    scores: Iterable[SentenceScore],
    speakers: Iterable[tuple[str, str]] = (),
    discussion_topic: str = ALL_TOPICS,
) -> list[SpeakerReport]:
    """One report per (session, speaker): per-utterance means and the overall sentence mean.

    *speakers* lists (session, speaker) pairs expected in the output; those
    without scored sentences are omitted with a warning.
    """
    grouped: dict[tuple[str, str], list[SentenceScore]] = defaultdict(list)
    for s in scores:
        if not s.speaker_id:
            continue
        grouped[(s.ref.session_id, s.speaker_id)].append(s)

    missing = sorted(set(speakers) - set(grouped))
    for session, speaker in missing:
        logger.warning("Speaker %s in %s has no scored sentences; omitted", speaker, session)

    reports: list[SpeakerReport] = []
    for (session, speaker), items in sorted(grouped.items()):
        items.sort(key=lambda s: s.ref)
        per_utt: dict[int, list[float]] = defaultdict(list)
        for s in items:
            per_utt[s.ref.utterance_index].append(s.probability)
        probs = [s.probability for s in items]
        reports.append(
            SpeakerReport(
                speaker_id=speaker,
                utterance_means=tuple(_mean(per_utt[i]) for i in sorted(per_utt)),
                mean=_mean(probs),
                count=len(probs),
                session_id=session,
                community_label=items[0].community_label,
                discussion_topic=discussion_topic,
            )
        )
    return reports


def speaker_reports_by_topic(scores: Sequence[SentenceScore]) -> list[SpeakerReport]:
    """Speaker reports for every discussion topic present, then across all topics."""
    by_topic: dict[DiscussionTopic, list[SentenceScore]] = defaultdict(list)
    for s in scores:
        by_topic[s.discussion_topic].append(s)
    reports: list[SpeakerReport] = []
    for topic in sorted(by_topic, key=lambda t: t.value):
        reports.extend(speaker_positiveness(by_topic[topic], discussion_topic=topic.value))
    reports.extend(speaker_positiveness(scores))
    return reports


def plot_data(reports: Iterable[SpeakerReport]) -> dict[str, dict[str, list[float]]]:
    """Figure name -> speaker -> per-utterance means, one figure per (community, topic)."""
    figures: dict[str, dict[str, list[float]]] = defaultdict(dict)
    for r in reports:
        name = "%s_%s" % (r.community_label or "unlabeled", r.discussion_topic)
        figures[name]["%s:%s" % (r.session_id, r.speaker_id)] = list(r.utterance_means)
    return {k: figures[k] for k in sorted(figures)}


# ---------------------------------------------------------------------------
# Discussion topics
# ---------------------------------------------------------------------------


def topic_mean_positiveness(
    scores: Iterable[SentenceScore],
    include_t4: bool = False,
    unit: MuUnit = "sentence",
) -> list[TopicSentimentReport]:
    """Mean probability of positiveness per (discussion topic, community).

    With ``unit="utterance"`` each utterance's sentence mean counts once.
    Untagged sentences never contribute.
    """
    topics = [DiscussionTopic.T1, DiscussionTopic.T2, DiscussionTopic.T3]
    if include_t4:
        topics.append(DiscussionTopic.T4)

    cells: dict[tuple[DiscussionTopic, str], list[SentenceScore]] = defaultdict(list)
    communities: set[str] = set()
    for s in scores:
        communities.add(s.community_label)
        if s.discussion_topic in topics:
            cells[(s.discussion_topic, s.community_label)].append(s)

    reports: list[TopicSentimentReport] = []
    for community in sorted(communities):
        for topic in topics:
            items = sorted(cells.get((topic, community), ()), key=lambda s: s.ref)
            if not items:
                logger.warning("No scored sentences for %s in community %r; omitted", topic.value, community)
                continue
            if unit == "utterance":
                per_utt: dict[tuple[str, int], list[float]] = defaultdict(list)
                for s in items:
                    per_utt[(s.ref.session_id, s.ref.utterance_index)].append(s.probability)
                values = [_mean(per_utt[k]) for k in sorted(per_utt)]
            else:
                values = [s.probability for s in items]
            reports.append(TopicSentimentReport(topic, community, _mean(values)))
    return reports


# ---------------------------------------------------------------------------
# Transport modes
# ---------------------------------------------------------------------------


def mode_sentiment_table(
    phrase_scores: Iterable[ModePhraseScore],
    modes: Iterable[str] = DEFAULT_MODES,
    community_label: str = "",
) -> list[ModeSentimentRow]:
    """Mean, sample standard deviation and count of the scores attached to each mode.

    Modes listed in *modes* but never mentioned get count 0 and no statistics.
    """
    grouped: dict[str, list[float]] = defaultdict(list)
    for p in phrase_scores:
        grouped[p.mode].append(p.score)
    order = list(dict.fromkeys(modes))
    order.extend(sorted(set(grouped) - set(order)))
    rows: list[ModeSentimentRow] = []
    for mode in order:
        values = grouped.get(mode, [])
        rows.append(
            ModeSentimentRow(
                mode=mode,
                mean=_mean(values) if values else None,
                std_dev=_sample_std(values),
                count=len(values),
                community_label=community_label,
            )
        )
    return rows


def mode_tables_by_community(
    phrase_scores: Sequence[ModePhraseScore], modes: Iterable[str] = DEFAULT_MODES
) -> dict[str, list[ModeSentimentRow]]:
    modes = list(modes)
    communities = sorted({p.community_label for p in phrase_scores})
    return {
        c: mode_sentiment_table([p for p in phrase_scores if p.community_label == c], modes, c)
        for c in communities
    }


# ---------------------------------------------------------------------------
# Tables and files
# ---------------------------------------------------------------------------


def _fmt(value: float | None) -> float | None:
    return None if value is None else round(value, 6)


def speakers_frame(reports: Iterable[SpeakerReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "speaker_id": r.speaker_id,
                "utterance_means": ";".join(FLOAT_FORMAT % m for m in r.utterance_means),
                "mean": r.mean,
                "count": r.count,
                "session_id": r.session_id,
                "community_label": r.community_label,
                "discussion_topic": r.discussion_topic,
            }
            for r in reports
        ],
        columns=[
            "speaker_id", "utterance_means", "mean", "count",
            "session_id", "community_label", "discussion_topic",
        ],
    )


def topic_mu_frame(reports: Iterable[TopicSentimentReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"discussion_topic": r.discussion_topic.value, "community_label": r.community_label, "mu": r.mu}
            for r in reports
        ],
        columns=["discussion_topic", "community_label", "mu"],
    )


def mode_table_frame(rows: Iterable[ModeSentimentRow]) -> pd.DataFrame:
    frame = pd.DataFrame(
        [{"mode": r.mode, "mean": r.mean, "std_dev": r.std_dev, "count": r.count} for r in rows],
        columns=["mode", "mean", "std_dev", "count"],
    )
    return frame.astype({"mean": "float64", "std_dev": "float64", "count": "int64"})


def write_csv(frame: pd.DataFrame, path: str | Path) -> None:
    """UTF-8, LF line endings, six decimals, empty cells for missing statistics."""
    frame.to_csv(
        path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="", encoding="utf-8"
    )


def frame_records(frame: pd.DataFrame) -> list[dict]:
    """Rows as JSON-ready dicts, floats rounded exactly as the CSV writer prints them."""
    records = []
    for row in frame.to_dict(orient="records"):
        out = {}
        for key, value in row.items():
            if isinstance(value, float):
                out[key] = None if math.isnan(value) else _fmt(value)
            elif hasattr(value, "item"):
                out[key] = value.item()
            else:
                out[key] = value
        records.append(out)
    return records


def write_plot_data(figures: Mapping[str, Mapping[str, list[float]]], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, speakers in figures.items():
        path = directory / ("%s.json" % name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(speakers, f, ensure_ascii=False, sort_keys=True, indent=1)
            f.write("\n")
        written.append(path)
    return written
