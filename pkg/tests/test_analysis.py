"""Tests for discourse_mining.analysis."""
from __future__ import annotations

import random
from pathlib import Path

import numpy as np
import pytest

from discourse_mining._types import (
    DiscussionTopic,
    ModePhraseScore,
    SentenceRef,
    SentenceScore,
    SentimentClass,
)
from discourse_mining.analysis import (
    DEFAULT_MODES,
    frame_records,
    load_mode_dictionary,
    mode_sentiment_table,
    mode_table_frame,
    mode_tables_by_community,
    plot_data,
    speaker_positiveness,
    speaker_reports_by_topic,
    speakers_frame,
    topic_mean_positiveness,
    topic_mu_frame,
    write_csv,
)
from discourse_mining.exception import ConfigError

T1, T2, T4 = DiscussionTopic.T1, DiscussionTopic.T2, DiscussionTopic.T4


def _score(
    p: float,
    utterance: int,
    sentence: int = 0,
    speaker: str = "P01",
    topic: DiscussionTopic = T1,
    community: str = "HP",
    session: str = "HP-1",
) -> SentenceScore:
    return SentenceScore(
        ref=SentenceRef(session, utterance, sentence),
        probability=p,
        sentiment_class=SentimentClass.NEUTRAL,
        speaker_id=speaker,
        community_label=community,
        discussion_topic=topic,
    )


def _mode(mode: str, score: float, community: str = "HP") -> ModePhraseScore:
    return ModePhraseScore(mode, "some phrase", score, community_label=community)


@pytest.fixture
def scores() -> list[SentenceScore]:
    return [
        _score(0.2, 1, 0),
        _score(0.4, 1, 1),
        _score(0.9, 3, 0, topic=T2),
        _score(0.6, 2, 0, speaker="P02"),
        _score(0.1, 5, 0, speaker="P02", topic=T4),
        _score(0.7, 2, 0, speaker="P11", community="EV", session="EV-1"),
        _score(0.5, 9, 0, speaker="P02", topic=DiscussionTopic.UNTAGGED),
    ]


class TestSpeakerPositiveness:
    def test_utterance_means_and_overall(self, scores: list[SentenceScore]) -> None:
        reports = {(r.session_id, r.speaker_id): r for r in speaker_positiveness(scores)}
        p01 = reports[("HP-1", "P01")]
        assert p01.utterance_means == pytest.approx((0.3, 0.9))
        assert p01.mean == pytest.approx(0.5)
        assert p01.count == 3
        assert p01.discussion_topic == "all"
        assert reports[("EV-1", "P11")].community_label == "EV"

    def test_missing_speaker_omitted(self, scores: list[SentenceScore]) -> None:
        reports = speaker_positiveness(scores, speakers=[("HP-1", "P09")])
        assert ("HP-1", "P09") not in {(r.session_id, r.speaker_id) for r in reports}

    def test_order_independent(self, scores: list[SentenceScore]) -> None:
        shuffled = list(scores)
        random.Random(3).shuffle(shuffled)
        assert speaker_positiveness(shuffled) == speaker_positiveness(scores)

    def test_by_topic(self, scores: list[SentenceScore]) -> None:
        reports = speaker_reports_by_topic(scores)
        assert {r.discussion_topic for r in reports} == {"T1", "T2", "T4", "untagged", "all"}
        t2 = [r for r in reports if r.discussion_topic == "T2"]
        assert [(r.speaker_id, r.mean) for r in t2] == [("P01", 0.9)]

    def test_plot_data(self, scores: list[SentenceScore]) -> None:
        figures = plot_data(speaker_positiveness(scores))
        assert sorted(figures) == ["EV_all", "HP_all"]
        assert figures["HP_all"]["HP-1:P01"] == pytest.approx([0.3, 0.9])


class TestTopicMeans:
    def test_sentence_unit(self, scores: list[SentenceScore]) -> None:
        reports = topic_mean_positiveness(scores)
        table = {(r.discussion_topic, r.community_label): r.mu for r in reports}
        assert table == pytest.approx({(T1, "EV"): 0.7, (T1, "HP"): 0.4, (T2, "HP"): 0.9})

    def test_include_t4(self, scores: list[SentenceScore]) -> None:
        reports = topic_mean_positiveness(scores, include_t4=True)
        assert [r.mu for r in reports if r.discussion_topic is T4] == [pytest.approx(0.1)]

    def test_utterance_unit(self, scores: list[SentenceScore]) -> None:
        reports = topic_mean_positiveness(scores, unit="utterance")
        hp_t1 = [r.mu for r in reports if (r.discussion_topic, r.community_label) == (T1, "HP")]
        assert hp_t1 == [pytest.approx(0.45)]   # utterance means 0.3 and 0.6

    def test_frame(self, scores: list[SentenceScore]) -> None:
        frame = topic_mu_frame(topic_mean_positiveness(scores))
        assert list(frame.columns) == ["discussion_topic", "community_label", "mu"]
        assert list(frame["discussion_topic"]) == ["T1", "T1", "T2"]


class TestModeTable:
    """Tests for mode_sentiment_table and the CSV writer."""

    def test_symmetric_pair(self) -> None:
        rows = mode_sentiment_table([_mode("walking", 1.0), _mode("walking", -1.0)])
        walking = rows[0]
        assert walking.mode == "walking"
        assert walking.mean == 0.0
        assert walking.std_dev == pytest.approx(1.4142, abs=1e-4)
        assert walking.count == 2

    def test_single_score_has_no_std(self) -> None:
        row = mode_sentiment_table([_mode("bicycling", 0.3)], ["bicycling"])[0]
        assert (row.mean, row.std_dev, row.count) == (0.3, None, 1)

    def test_unmentioned_modes(self) -> None:
        rows = mode_sentiment_table([_mode("walking", 0.5)])
        assert [r.mode for r in rows] == list(DEFAULT_MODES)
        assert [r.count for r in rows] == [1, 0, 0, 0, 0]
        assert rows[1].mean is None and rows[1].std_dev is None

    def test_unknown_mode_appended(self) -> None:
        rows = mode_sentiment_table([_mode("scooter", 0.2)], ["walking"])
        assert [r.mode for r in rows] == ["walking", "scooter"]

    def test_order_independent(self) -> None:
        values = [_mode("walking", v) for v in (0.1, -0.4, 0.7, 0.3, -0.9)]
        shuffled = list(values)
        random.Random(1).shuffle(shuffled)
        assert mode_sentiment_table(shuffled) == mode_sentiment_table(values)

    def test_by_community(self) -> None:
        tables = mode_tables_by_community(
            [_mode("walking", 0.5, "HP"), _mode("walking", -0.5, "EV")], ["walking"]
        )
        assert sorted(tables) == ["EV", "HP"]
        assert tables["EV"][0].mean == -0.5
        assert tables["EV"][0].community_label == "EV"

    def test_csv(self, tmp_path: Path) -> None:
        rows = mode_sentiment_table([_mode("walking", 1.0), _mode("walking", -1.0)], ["walking", "bicycling"])
        path = tmp_path / "mode_table.csv"
        write_csv(mode_table_frame(rows), path)
        assert path.read_bytes().decode("utf-8").splitlines() == [
            "mode,mean,std_dev,count",
            "walking,0.000000,1.414214,2",
            "bicycling,,,0",
        ]
        assert b"\r" not in path.read_bytes()

    def test_records_match_csv(self) -> None:
        rows = mode_sentiment_table([_mode("walking", 1 / 3), _mode("walking", 0.0)], ["walking", "bicycling"])
        records = frame_records(mode_table_frame(rows))
        assert records == [
            {"mode": "walking", "mean": 0.166667, "std_dev": 0.235702, "count": 2},
            {"mode": "bicycling", "mean": None, "std_dev": None, "count": 0},
        ]


class TestRandomizedAggregates:
    """Aggregates against direct recomputation over random score sets."""

    TOPICS = [T1, T2, DiscussionTopic.T3, T4, DiscussionTopic.UNTAGGED]

    def _random_scores(self, seed: int) -> list[SentenceScore]:
        rng = random.Random(seed)
        refs = {
            (rng.choice(["HP-1", "HP-2", "EV-1"]), rng.randrange(12), rng.randrange(4))
            for _ in range(rng.randint(1, 80))
        }
        return [
            _score(
                rng.random(),
                utterance,
                sentence,
                speaker=rng.choice(["P01", "P02", "P03", "P04"]),
                topic=rng.choice(self.TOPICS),
                community=session[:2],
                session=session,
            )
            for session, utterance, sentence in sorted(refs)
        ]

    @pytest.mark.parametrize("seed", range(8))
    def test_speaker_means(self, seed: int) -> None:
        scores = self._random_scores(seed)
        rng = random.Random(seed)
        reports = speaker_positiveness(rng.sample(scores, len(scores)))
        keys = sorted({(s.ref.session_id, s.speaker_id) for s in scores})
        assert [(r.session_id, r.speaker_id) for r in reports] == keys
        for r in reports:
            mine = [s for s in scores if (s.ref.session_id, s.speaker_id) == (r.session_id, r.speaker_id)]
            utterances = sorted({s.ref.utterance_index for s in mine})
            expected = [
                np.mean([s.probability for s in mine if s.ref.utterance_index == u]) for u in utterances
            ]
            np.testing.assert_allclose(r.utterance_means, expected, rtol=0, atol=1e-12)
            assert r.mean == pytest.approx(np.mean([s.probability for s in mine]), rel=0, abs=1e-12)
            assert r.count == len(mine)

    @pytest.mark.parametrize("seed", range(8))
    @pytest.mark.parametrize("unit", ["sentence", "utterance"])
    def test_topic_mu(self, seed: int, unit: str) -> None:
        scores = self._random_scores(seed)
        reports = {
            (r.discussion_topic, r.community_label): r.mu
            for r in topic_mean_positiveness(scores, unit=unit)
        }
        expected: dict[tuple[DiscussionTopic, str], float] = {}
        for topic in (T1, T2, DiscussionTopic.T3):
            for community in {s.community_label for s in scores}:
                cell = [s for s in scores if s.discussion_topic is topic and s.community_label == community]
                if not cell:
                    continue
                if unit == "sentence":
                    expected[(topic, community)] = np.mean([s.probability for s in cell])
                else:
                    groups = {(s.ref.session_id, s.ref.utterance_index) for s in cell}
                    per_utterance = [
                        [s.probability for s in cell if (s.ref.session_id, s.ref.utterance_index) == g]
                        for g in groups
                    ]
                    expected[(topic, community)] = np.mean([np.mean(v) for v in per_utterance])
        assert set(reports) == set(expected)
        for key, mu in expected.items():
            assert reports[key] == pytest.approx(mu, rel=0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_mode_table(self, seed: int) -> None:
        rng = random.Random(seed)
        modes = list(DEFAULT_MODES)
        phrases = [_mode(rng.choice(modes), rng.uniform(-1.0, 1.0)) for _ in range(rng.randint(0, 60))]
        for row in mode_sentiment_table(phrases):
            values = [p.score for p in phrases if p.mode == row.mode]
            assert row.count == len(values)
            if values:
                assert row.mean == pytest.approx(np.mean(values), rel=0, abs=1e-12)
            else:
                assert row.mean is None
            if len(values) > 1:
                assert row.std_dev == pytest.approx(np.std(values, ddof=1), rel=0, abs=1e-12)
            else:
                assert row.std_dev is None


class TestSpeakersFrame:
    def test_columns(self, scores: list[SentenceScore]) -> None:
        frame = speakers_frame(speaker_positiveness(scores))
        assert list(frame.columns) == [
            "speaker_id", "utterance_means", "mean", "count",
            "session_id", "community_label", "discussion_topic",
        ]
        p01 = frame[frame["speaker_id"] == "P01"].iloc[0]
        assert p01["utterance_means"] == "0.300000;0.900000"


class TestModeDictionary:
    def test_load(self, tmp_path: Path) -> None:
        path = tmp_path / "modes.txt"
        path.write_text("# modes\nwalking = walk, sidewalk\nscooter = scooter, e scooter\n", encoding="utf-8")
        assert load_mode_dictionary(path) == {
            "walking": ("walk", "sidewalk"),
            "scooter": ("scooter", "e scooter"),
        }

    @pytest.mark.parametrize(
        "content",
        ["walking walk\n", "walking =\n", "walking = walk\nwalking = sidewalk\n", "# nothing\n"],
    )
    def test_rejects(self, tmp_path: Path, content: str) -> None:
        path = tmp_path / "modes.txt"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(ConfigError):
            load_mode_dictionary(path)
