"""Tests for discourse_mining.preprocess."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from discourse_mining.exception import ConfigError, EmptyCorpusError, VocabularyError
from discourse_mining.preprocess import (
    ADJ,
    ADV,
    NOUN,
    NormalizationRules,
    Vocabulary,
    apply_tfidf,
    build_dtm,
    build_vocabulary,
    default_rules,
    extract_phrases,
    inverse_document_frequency,
    load_rules,
    normalize,
    normalize_text,
    sentence_phrases,
    tag_tokens,
    tfidf,
    tokenize,
)

SENTENCES = [
    "The buses are slow and the cities are crowded.",
    "I love biking with my children to the parks!",
    "Walking downtown is running late, things and stuff.",
    "Parking costs more than riding the train every day.",
    "We drove past the women's shelter; the sidewalks were icy.",
]


@pytest.fixture
def plain_rules() -> NormalizationRules:
    return NormalizationRules(
        stopwords=frozenset({"the", "are", "and", "i", "my", "with", "to"}),
        merge_table={"children": "child"},
    )


class TestTokenize:
    def test_words_and_apostrophes(self) -> None:
        assert tokenize("I don't like it, e.g. the bus_stop") == [
            "I", "don't", "like", "it", "e", "g", "the", "bus", "stop",
        ]

    def test_curly_apostrophe(self) -> None:
        assert tokenize("it’s fine") == ["it's", "fine"]

    def test_quote_marks_are_not_part_of_words(self) -> None:
        tokens = tokenize("the 'bus' and the students' park")
        assert tokens == ["the", "bus", "and", "the", "students", "park"]

    def test_empty(self) -> None:
        assert tokenize("  ... !") == []


class TestNormalize:
    """Tests for normalize and the rule table."""

    def test_suffixes_and_merges(self, plain_rules: NormalizationRules) -> None:
        tokens = tokenize("The buses are slow, I love biking with my children")
        assert normalize(tokens, plain_rules) == ["bus", "slow", "love", "bike", "child"]

    @pytest.mark.parametrize(
        ("word", "base"),
        [
            ("walking", "walk"),
            ("running", "run"),
            ("bikes", "bike"),
            ("cities", "city"),
            ("boxes", "box"),
            ("bus", "bus"),
            ("class", "class"),
        ],
    )
    def test_base_forms(self, plain_rules: NormalizationRules, word: str, base: str) -> None:
        assert normalize([word], plain_rules) == [base]

    def test_things_and_stuff_removed(self, plain_rules: NormalizationRules) -> None:
        assert normalize(["Things", "stuff", "bus"], plain_rules) == ["bus"]

    def test_short_tokens_dropped(self, plain_rules: NormalizationRules) -> None:
        assert normalize(["a", "x", "ok"], plain_rules) == ["ok"]

    def test_case_kept_when_not_lowercasing(self) -> None:
        rules = NormalizationRules(lowercase=False, suffix_rules=False)
        assert normalize(["Bus", "bus"], rules) == ["Bus", "bus"]

    @pytest.mark.parametrize("sentence", SENTENCES)
    def test_idempotent(self, sentence: str) -> None:
        rules = default_rules()
        once = normalize_text(sentence, rules)
        assert normalize(once, rules) == once

    def test_merge_base_must_map_to_itself(self) -> None:
        with pytest.raises(ConfigError, match="does not map to itself"):
            NormalizationRules(merge_table={"autos": "cars"})

    def test_negative_min_length(self) -> None:
        with pytest.raises(ConfigError):
            NormalizationRules(min_token_length=-1)


class TestLoadRules:
    def test_file(self, tmp_path: Path) -> None:
        (tmp_path / "merges.txt").write_text("# irregular plurals\nkids kid\n", encoding="utf-8")
        path = tmp_path / "rules.cfg"
        path.write_text(
            "merges = merges.txt\nexclusions = things, stuff, kind\nmin_token_length = 3\n",
            encoding="utf-8",
        )
        rules = load_rules(path)
        assert rules.merge_table == {"kids": "kid"}
        assert rules.exclusions == frozenset({"things", "stuff", "kind"})
        assert normalize(["kids", "kind", "go"], rules) == ["kid"]

    def test_unknown_key(self, tmp_path: Path) -> None:
        path = tmp_path / "rules.cfg"
        path.write_text("lowercase = yes\nstemmer = porter\n", encoding="utf-8")
        with pytest.raises(ConfigError) as exc_info:
            load_rules(path)
        assert exc_info.value.key == "stemmer"
        assert exc_info.value.line == 2

    def test_bad_merge_line(self, tmp_path: Path) -> None:
        (tmp_path / "m.txt").write_text("kids\n", encoding="utf-8")
        path = tmp_path / "rules.cfg"
        path.write_text("merges = m.txt\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_rules(path)


class TestVocabulary:
    def test_sorted_unique(self) -> None:
        vocab = build_vocabulary([["bus", "walk", "bus"], ["car", "bus"]])
        assert vocab.terms == ("bus", "car", "walk")
        assert vocab.index["walk"] == 2
        assert "car" in vocab

    def test_min_df(self) -> None:
        assert build_vocabulary([["bus", "walk"], ["bus"]], min_df=2).terms == ("bus",)

    def test_nothing_survives(self) -> None:
        with pytest.raises(VocabularyError):
            build_vocabulary([["bus"], ["walk"]], min_df=3)

    def test_empty(self) -> None:
        with pytest.raises(EmptyCorpusError):
            build_vocabulary([])

    def test_duplicate_terms(self) -> None:
        with pytest.raises(VocabularyError):
            Vocabulary(("bus", "bus"))

    def test_digest_depends_on_order(self) -> None:
        assert Vocabulary(("a", "b")).digest == Vocabulary(("a", "b")).digest
        assert Vocabulary(("a", "b")).digest != Vocabulary(("b", "a")).digest


class TestDocTermMatrix:
    def test_counts_skip_unknown_terms(self) -> None:
        vocab = Vocabulary(("bus", "walk"))
        dtm = build_dtm([["bus", "bus", "car"], ["walk"], []], vocab, doc_ids=["a", "b", "c"])
        np.testing.assert_array_equal(dtm.toarray(), [[2, 0], [0, 1], [0, 0]])
        assert dtm.doc_ids == ("a", "b", "c")
        np.testing.assert_array_equal(dtm.row_sums(), [2, 1, 0])

    def test_doc_id_count_mismatch(self) -> None:
        with pytest.raises(VocabularyError):
            build_dtm([["bus"]], Vocabulary(("bus",)), doc_ids=["a", "b"])


class TestTfidf:
    """TF-IDF against a dense reference computation."""

    def test_random_matrices(self) -> None:
        rng = np.random.default_rng(11)
        for _ in range(20):
            n_docs, n_terms = rng.integers(2, 12), rng.integers(2, 15)
            counts = rng.integers(0, 4, size=(n_docs, n_terms))
            counts[:, 0] = np.maximum(counts[:, 0], 1)          # term 0 in every document
            counts[0, :] = np.maximum(counts[0, :], 1)          # every term seen somewhere
            terms = tuple("t%02d" % j for j in range(n_terms))
            docs = [[terms[j] for j in range(n_terms) for _ in range(c[j])] for c in counts]
            dtm = build_dtm(docs, build_vocabulary(docs))

            df = (counts > 0).sum(axis=0)
            expected = counts / counts.sum(axis=1, keepdims=True) * np.log(n_docs / df)
            weighted = tfidf(dtm)
            np.testing.assert_allclose(weighted.toarray(), expected, rtol=0, atol=1e-12)
            np.testing.assert_array_equal(weighted.toarray()[:, 0], 0.0)

    def test_apply_fitted_idf(self) -> None:
        vocab = Vocabulary(("bus", "walk"))
        train = build_dtm([["bus"], ["bus", "walk"]], vocab)
        idf = inverse_document_frequency(train)
        np.testing.assert_allclose(idf, [0.0, np.log(2)])
        test = apply_tfidf(build_dtm([["walk", "walk", "bus"]], vocab), idf)
        np.testing.assert_allclose(test.toarray(), [[0.0, 2 / 3 * np.log(2)]])

    def test_idf_length_mismatch(self) -> None:
        dtm = build_dtm([["bus"]], Vocabulary(("bus",)))
        with pytest.raises(VocabularyError):
            apply_tfidf(dtm, np.zeros(3))


class TestPhrases:
    def test_tags(self) -> None:
        assert [t for _, t in tag_tokens(["Very", "horrible", "service"])] == [ADV, ADJ, NOUN]

    def test_bigram_and_trigram(self) -> None:
        phrases = sentence_phrases("The very horrible service ruined a wonderful bus ride.")
        assert [p.text for p in phrases] == [
            "very horrible service", "horrible service", "wonderful bus",
        ]
        assert phrases[0].head_noun == "service"
        assert phrases[0].modifier == "horrible"

    def test_no_candidates(self) -> None:
        assert extract_phrases(tag_tokens(tokenize("We walk to the bus."))) == []
