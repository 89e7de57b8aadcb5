"""Stage functions, the Prefect flow that chains them, and report emission.

Every stage reads its upstream artifacts from disk (``source``) and writes
its own artifacts under ``target``, so ``run_pipeline`` and the one-stage
CLI commands produce the same bytes::

    <output>/ingest/<session>.txt, corpus_<community>.jsonl, communities.json
    <output>/topics/model_<community>.json, topics.json
    <output>/sentiment/lexicon.tsv, classifier.json, scores.jsonl, mode_scores.jsonl
    <output>/report/...            (csv files + plots/ + manifest, or bundle.json)

Writes go to a staging directory that replaces the previous artifacts only
when every stage succeeded.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import os
import platform
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from importlib import metadata, resources
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping, Sequence, TypeVar

from prefect import flow, get_run_logger, task
from prefect.artifacts import create_markdown_artifact
from prefect.cache_policies import NONE
from prefect.logging import get_logger

from discourse_mining import analysis
from discourse_mining._types import (
    DiscussionTopic,
    ModePhraseScore,
    ModeSentimentRow,
    SentenceRef,
    SentenceScore,
    SentimentClass,
    SpeakerReport,
    TopicSentimentReport,
)
from discourse_mining.config import PipelineConfig, derive_seed
from discourse_mining.corpus import (
    build_corpus,
    export_corpus_jsonl,
    load_corpus_jsonl,
    load_transcripts,
    sentence_units,
    serialize_transcript,
    strip_moderator,
)
from discourse_mining.exception import DataError, StageError
from discourse_mining.preprocess import (
    NormalizationRules,
    build_dtm,
    build_vocabulary,
    default_rules,
    load_rules,
    normalize_corpus,
    sentence_phrases,
)
from discourse_mining.sentiment import (
    SentimentLexicon,
    build_lexicon,
    load_labels,
    mode_phrase_scores,
    override_labels,
    read_lexicon,
    reference_token_streams,
    save_classifier,
    load_classifier,
    score_units,
    sentence_features,
    train_classifier,
    weak_label,
    write_lexicon,
)
from discourse_mining.topics import (
    fit_lda,
    load_model,
    locate_theme_passages,
    save_model,
    summarize_topics,
)

logger = get_logger(__name__)

F = TypeVar("F", bound=Callable[..., Any])

INGEST, TOPICS, SENTIMENT, REPORT = "ingest", "topics", "sentiment", "report"
STAGES = (INGEST, TOPICS, SENTIMENT, REPORT)


def _stage(name: str) -> Callable[[F], F]:
    """Re-raise any failure of the wrapped stage as a StageError naming it."""

    def decorator(fn: F) -> F:
        @functools.wraps(fn)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc

        return wrapper  # type: ignore[return-value]

    return decorator


# ---------------------------------------------------------------------------
# Output directory handling
# ---------------------------------------------------------------------------


@contextmanager
def staging_area(output: Path) -> Iterator[Path]:
    """Lock *output*, yield a scratch directory inside it, and commit on success.

    Each top-level entry of the scratch directory replaces the entry of the
    same name in *output*.  On error nothing in *output* changes.
    """
    lock = output / ".lock"
    try:
        output.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError("output directory %s is not writable: %s" % (output, exc)) from None
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataError("output directory %s is locked by another run (%s)" % (output, lock)) from None
    except OSError as exc:
        raise DataError("output directory %s is not writable: %s" % (output, exc)) from None
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=output))
    try:
        yield staging
        for entry in sorted(staging.iterdir()):
            dest = output / entry.name
            if dest.is_dir():
                shutil.rmtree(dest)
            elif dest.exists():
                dest.unlink()
            os.replace(entry, dest)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
        os.close(fd)
        lock.unlink(missing_ok=True)


def _write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, ensure_ascii=False, sort_keys=True, indent=1)
        f.write("\n")


def _read_json(path: Path) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DataError("missing upstream artifact %s; run the earlier stage first" % path) from None


def _slug(community: str) -> str:
    return community or "unlabeled"


def _rules(config: PipelineConfig) -> NormalizationRules:
    if config.preprocess.rules is None:
        return default_rules()
    return load_rules(config.preprocess.rules)


def _modes(config: PipelineConfig) -> dict[str, tuple[str, ...]]:
    if config.analysis.modes is None:
        return dict(analysis.DEFAULT_MODES)
    return analysis.load_mode_dictionary(config.analysis.modes)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


@_stage(INGEST)
def ingest_stage(config: PipelineConfig, source: Path, target: Path) -> list[str]:
    """Parse the configured transcripts and write per-session copies and per-community corpora.

    *source* is unused; transcripts come from ``config.input``.
    """
    fmt = config.corpus.transcript_format()
    transcripts = load_transcripts(config.input, fmt)
    if not transcripts:
        raise DataError("no transcripts found under %s" % ", ".join(map(str, config.input)))
    out = target / INGEST
    out.mkdir(parents=True, exist_ok=True)
    for t in transcripts:
        with open(out / ("%s.txt" % t.session_id), "w", encoding="utf-8", newline="\n") as f:
            f.write(serialize_transcript(t, fmt))

    communities = sorted({t.community_label for t in transcripts})
    for community in communities:
        stripped = [strip_moderator(t) for t in transcripts if t.community_label == community]
        corpus = build_corpus(stripped, config.corpus.grouping, fmt.abbreviations)
        export_corpus_jsonl(corpus, out / ("corpus_%s.jsonl" % _slug(community)))
        logger.info("Community %r: %d documents", community, len(corpus))
    _write_json(out / "communities.json", communities)
    return communities


def read_communities(source: Path) -> list[str]:
    return list(_read_json(source / INGEST / "communities.json"))


@_stage(TOPICS)
def fit_community_topics(config: PipelineConfig, source: Path, target: Path, community: str) -> Path:
    """Fit one community's topic model and save it."""
    path = source / INGEST / ("corpus_%s.jsonl" % _slug(community))
    if not path.exists():
        raise DataError("missing upstream artifact %s; run the ingest stage first" % path)
    corpus = normalize_corpus(load_corpus_jsonl(path, config.corpus.grouping), _rules(config))
    vocab = build_vocabulary(corpus, config.preprocess.min_df)
    model = fit_lda(
        build_dtm(corpus, vocab), config.topics.lda_config(derive_seed(config.seed, TOPICS, community))
    )
    out = target / TOPICS
    out.mkdir(parents=True, exist_ok=True)
    dest = out / ("model_%s.json" % _slug(community))
    save_model(model, dest)
    return dest


@_stage(TOPICS)
def summarize_community_topics(config: PipelineConfig, source: Path, target: Path) -> dict[str, Any]:
    """Top words and theme passages of every saved community model, as ``topics/topics.json``."""
    rules = _rules(config)
    summary: dict[str, Any] = {}
    for community in read_communities(source):
        model_path = target / TOPICS / ("model_%s.json" % _slug(community))
        if not model_path.exists():
            model_path = source / TOPICS / ("model_%s.json" % _slug(community))
        model = load_model(model_path)
        corpus = load_corpus_jsonl(
            source / INGEST / ("corpus_%s.jsonl" % _slug(community)), config.corpus.grouping
        )
        topics = []
        for s in summarize_topics(model, config.topics.top_n):
            passages = locate_theme_passages(
                corpus, [term for term, _ in s.top_terms], config.topics.passage_window, rules
            )
            topics.append(
                {
                    "topic_id": s.topic_id,
                    "label": s.label,
                    "top_terms": [[term, p] for term, p in s.top_terms],
                    "passages": [
                        {
                            "doc_id": p.doc_id,
                            "sentences": list(p.sentences),
                            "source_refs": [list(r) for r in p.source_refs],
                            "matched_terms": list(p.matched_terms),
                        }
                        for p in passages
                    ],
                }
            )
        summary[community] = {
            "documents": len(model.doc_ids),
            "vocabulary_size": len(model.vocabulary),
            "log_likelihood": list(model.log_likelihood),
            "topics": topics,
        }
    _write_json(target / TOPICS / "topics.json", summary)
    return summary


@_stage(TOPICS)
def topics_stage(config: PipelineConfig, source: Path, target: Path) -> dict[str, Any]:
    for community in read_communities(source):
        fit_community_topics(config, source, target, community)
    return summarize_community_topics(config, source, target)


def _load_ingested(config: PipelineConfig, source: Path):
    fmt = config.corpus.transcript_format()
    directory = source / INGEST
    if not directory.is_dir():
        raise DataError("missing upstream artifact %s; run the ingest stage first" % directory)
    return load_transcripts([directory], fmt), fmt


def _reference_streams(config: PipelineConfig, sentences: Sequence[str]) -> list[list[str]]:
    ref = config.sentiment.reference_corpus
    if ref == "bundled":
        with resources.as_file(
            resources.files("discourse_mining").joinpath("data", "reference_reviews.txt")
        ) as bundled:
            return reference_token_streams(sentences, bundled)
    return reference_token_streams(sentences, ref)


@_stage(SENTIMENT)
def sentiment_stage(config: PipelineConfig, source: Path, target: Path) -> list[SentenceScore]:
    """Lexicon, weak labels, classifier training and sentence/mode scoring."""
    transcripts, fmt = _load_ingested(config, source)
    rules = _rules(config)
    settings = config.sentiment
    units = sentence_units(transcripts, fmt.abbreviations)
    if not units:
        raise DataError("no participant sentences to score")

    phrases = [p for u in units for p in sentence_phrases(u.text, u.ref)]
    lexicon = build_lexicon(
        phrases, _reference_streams(config, [u.text for u in units]), settings.seed_words(), settings.window
    )
    labeled = weak_label(units, lexicon, settings.tau)
    if settings.labels is not None:
        labeled = override_labels(labeled, load_labels(settings.labels), (u.ref for u in units))

    features = sentence_features(units, rules, config.preprocess.min_df)
    classifier = train_classifier(
        labeled,
        features,
        lambda_grid=settings.lambda_grid,
        mix=settings.mix,
        folds=settings.folds,
        seed=derive_seed(config.seed, SENTIMENT),
        lambda_count=settings.lambda_count,
        lambda_ratio=settings.lambda_ratio,
        max_sweeps=settings.max_sweeps,
    )
    classifier = dataclasses.replace(
        classifier, neutral_low=settings.neutral_low, neutral_high=settings.neutral_high
    )
    scores = score_units(classifier, units, rules)
    mode_scores = mode_phrase_scores(
        units, lexicon, _modes(config), rules, {s.ref: s.probability for s in scores}
    )

    out = target / SENTIMENT
    out.mkdir(parents=True, exist_ok=True)
    write_lexicon(lexicon, out / "lexicon.tsv")
    save_classifier(classifier, out / "classifier.json")
    _write_jsonl(out / "scores.jsonl", (_score_record(s) for s in scores))
    _write_jsonl(out / "mode_scores.jsonl", (_mode_record(m) for m in mode_scores))
    logger.info(
        "Scored %d sentences (%d labeled for training, %d mode mentions)",
        len(scores), len(labeled), len(mode_scores),
    )
    return scores


def _write_jsonl(path: Path, records: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        raise DataError("missing upstream artifact %s; run the sentiment stage first" % path)
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def _score_record(s: SentenceScore) -> dict:
    return {
        "session_id": s.ref.session_id,
        "utterance_index": s.ref.utterance_index,
        "sentence_index": s.ref.sentence_index,
        "probability": s.probability,
        "class": s.sentiment_class.value,
        "speaker_id": s.speaker_id,
        "community_label": s.community_label,
        "discussion_topic": s.discussion_topic.value,
    }


def _score_from_record(r: Mapping[str, Any]) -> SentenceScore:
    return SentenceScore(
        ref=SentenceRef(r["session_id"], r["utterance_index"], r["sentence_index"]),
        probability=r["probability"],
        sentiment_class=SentimentClass(r["class"]),
        speaker_id=r["speaker_id"],
        community_label=r["community_label"],
        discussion_topic=DiscussionTopic(r["discussion_topic"]),
    )


def _mode_record(m: ModePhraseScore) -> dict:
    ref = m.ref or SentenceRef("", 0, 0)
    return {
        "mode": m.mode,
        "phrase": m.phrase,
        "score": m.score,
        "session_id": ref.session_id,
        "utterance_index": ref.utterance_index,
        "sentence_index": ref.sentence_index,
        "community_label": m.community_label,
    }


def _mode_from_record(r: Mapping[str, Any]) -> ModePhraseScore:
    return ModePhraseScore(
        mode=r["mode"],
        phrase=r["phrase"],
        score=r["score"],
        ref=SentenceRef(r["session_id"], r["utterance_index"], r["sentence_index"]),
        community_label=r["community_label"],
    )


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReportBundle:
    topics: Mapping[str, Any]
    speakers: tuple[SpeakerReport, ...]
    topic_mu: tuple[TopicSentimentReport, ...]
    mode_table: tuple[ModeSentimentRow, ...]
    community_mode_tables: Mapping[str, tuple[ModeSentimentRow, ...]]
    plots: Mapping[str, Mapping[str, list[float]]]
    lexicon: SentimentLexicon
    classifier: Mapping[str, Any]
    manifest: Mapping[str, Any] = field(default_factory=dict)


def build_manifest(config: PipelineConfig) -> dict[str, Any]:
    from discourse_mining import __version__

    versions = {"discourse-mining": __version__, "python": platform.python_version()}
    for dist in ("numba", "numpy", "pandas", "prefect", "pydantic", "scipy"):
        try:
            versions[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            versions[dist] = "unknown"
    return {
        "config_digest": config.digest(),
        "seed": config.seed,
        "format": config.format,
        "versions": versions,
    }


@_stage(REPORT)
def report_stage(config: PipelineConfig, source: Path, target: Path) -> ReportBundle:
    """Aggregate the sentiment artifacts and emit the report in the configured format."""
    scores = [_score_from_record(r) for r in _read_jsonl(source / SENTIMENT / "scores.jsonl")]
    mode_scores = [_mode_from_record(r) for r in _read_jsonl(source / SENTIMENT / "mode_scores.jsonl")]
    topics = _read_json(source / TOPICS / "topics.json")
    lexicon = read_lexicon(source / SENTIMENT / "lexicon.tsv")
    classifier = load_classifier(source / SENTIMENT / "classifier.json")

    modes = list(_modes(config))
    speakers = analysis.speaker_reports_by_topic(scores)
    bundle = ReportBundle(
        topics=topics,
        speakers=tuple(speakers),
        topic_mu=tuple(
            analysis.topic_mean_positiveness(scores, config.analysis.include_t4, config.analysis.mu_unit)
        ),
        mode_table=tuple(analysis.mode_sentiment_table(mode_scores, modes)),
        community_mode_tables={
            c: tuple(rows) for c, rows in analysis.mode_tables_by_community(mode_scores, modes).items()
        },
        plots=analysis.plot_data(speakers),
        lexicon=lexicon,
        classifier={
            "lambda": classifier.lam,
            "mix": classifier.mix,
            "intercept": classifier.intercept,
            "nonzero_weights": int((classifier.weights != 0).sum()),
            "neutral_low": classifier.neutral_low,
            "neutral_high": classifier.neutral_high,
            "cv_report": classifier.cv_report,
        },
        manifest=build_manifest(config),
    )
    emit_report(bundle, config.format, target / REPORT)
    return bundle


def emit_report(bundle: ReportBundle, fmt: str, directory: Path) -> list[Path]:
    """Write *bundle* as CSV tables plus JSON side files, or as one ``bundle.json``."""
    if fmt not in ("csv", "json"):
        raise DataError("unknown report format %r" % fmt)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError("cannot write report to %s: %s" % (directory, exc)) from None

    speakers = analysis.speakers_frame(bundle.speakers)
    topic_mu = analysis.topic_mu_frame(bundle.topic_mu)
    mode_table = analysis.mode_table_frame(bundle.mode_table)
    per_community = {
        c: analysis.mode_table_frame(rows) for c, rows in bundle.community_mode_tables.items()
    }

    if fmt == "json":
        path = directory / "bundle.json"
        _write_json(
            path,
            {
                "manifest": bundle.manifest,
                "topics": bundle.topics,
                "speakers": analysis.frame_records(speakers),
                "topic_mu": analysis.frame_records(topic_mu),
                "mode_table": analysis.frame_records(mode_table),
                "community_mode_tables": {
                    c: analysis.frame_records(f) for c, f in per_community.items()
                },
                "plots": bundle.plots,
                "lexicon": [
                    {
                        "phrase": phrase,
                        "hit_pos": e.hit_positive,
                        "hit_neg": e.hit_negative,
                        "ratio": e.ratio,
                        "score": e.score,
                    }
                    for phrase, e in sorted(bundle.lexicon.entries.items())
                ],
                "classifier": bundle.classifier,
            },
        )
        return [path]

    written = []
    for name, frame in (("speakers.csv", speakers), ("topic_mu.csv", topic_mu), ("mode_table.csv", mode_table)):
        analysis.write_csv(frame, directory / name)
        written.append(directory / name)
    for community, frame in per_community.items():
        path = directory / ("mode_table_%s.csv" % _slug(community))
        analysis.write_csv(frame, path)
        written.append(path)
    written.extend(analysis.write_plot_data(bundle.plots, directory / "plots"))
    for name, payload in (("topics.json", bundle.topics), ("manifest.json", bundle.manifest)):
        _write_json(directory / name, payload)
        written.append(directory / name)
    return written


def _topics_markdown(summary: Mapping[str, Any]) -> str:
    lines = ["# Topics"]
    for community, block in summary.items():
        lines.append("\n## %s" % _slug(community))
        for t in block["topics"]:
            lines.append("- **%d**: %s" % (t["topic_id"], ", ".join(term for term, _ in t["top_terms"])))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Prefect tasks and flow
# ---------------------------------------------------------------------------


@task(name="ingest", cache_policy=NONE)
def ingest_task(config: PipelineConfig, source: Path, target: Path) -> list[str]:
    get_run_logger().info("Ingesting %d input paths", len(config.input))
    return ingest_stage(config, source, target)


@task(name="fit-topics", cache_policy=NONE)
def fit_topics_task(config: PipelineConfig, source: Path, target: Path, community: str) -> Path:
    get_run_logger().info("Fitting %d topics for community %r", config.topics.k, community)
    return fit_community_topics(config, source, target, community)


@task(name="summarize-topics", cache_policy=NONE)
def summarize_topics_task(config: PipelineConfig, source: Path, target: Path) -> dict[str, Any]:
    summary = summarize_community_topics(config, source, target)
    create_markdown_artifact(key="topic-summaries", markdown=_topics_markdown(summary))
    return summary


@task(name="sentiment", cache_policy=NONE)
def sentiment_task(config: PipelineConfig, source: Path, target: Path) -> int:
    return len(sentiment_stage(config, source, target))


@task(name="report", cache_policy=NONE)
def report_task(config: PipelineConfig, source: Path, target: Path) -> ReportBundle:
    get_run_logger().info("Writing %s report", config.format)
    return report_stage(config, source, target)


@flow(name="discourse-mining", validate_parameters=False)
def run_pipeline(config: PipelineConfig) -> ReportBundle:
    """Run every stage in order; artifacts land in ``config.output`` only if all succeed."""
    flow_logger = get_run_logger()
    with staging_area(Path(config.output)) as staging:
        communities = ingest_task(config, staging, staging)
        futures = [fit_topics_task.submit(config, staging, staging, c) for c in communities]
        for f in futures:
            f.result()
        summarize_topics_task(config, staging, staging)
        sentiment_task(config, staging, staging)
        bundle = report_task(config, staging, staging)
    flow_logger.info("Report bundle written to %s", config.output)
    return bundle


def run_stage(name: str, config: PipelineConfig) -> Any:
    """Run one stage outside Prefect, reading upstream artifacts from ``config.output``."""
    output = Path(config.output)
    with staging_area(output) as staging:
        if name == INGEST:
            return ingest_stage(config, output, staging)
        if name == TOPICS:
            return topics_stage(config, output, staging)
        if name == SENTIMENT:
            return sentiment_stage(config, output, staging)
        if name == REPORT:
            return report_stage(config, output, staging)
        raise ValueError("unknown stage %r" % name)
