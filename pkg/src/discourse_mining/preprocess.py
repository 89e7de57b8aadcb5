"""Tokenization, normalization, vectorization and phrase extraction.

The document-term matrix is kept sparse (coordinate format) from construction
through TF-IDF weighting; ``toarray`` exists for tests and small exports.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np
from prefect.logging import get_logger
from scipy import sparse

from discourse_mining._types import CandidatePhrase, Corpus, SentenceRef
from discourse_mining.exception import ConfigError, EmptyCorpusError, VocabularyError

logger = get_logger(__name__)

TokenDocs = Union[Corpus, Sequence[Sequence[str]]]

_TOKEN_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*")

# Stems that need a trailing "e" back after "-ing" is stripped (biking -> bike).
DEFAULT_RESTORE_E: frozenset[str] = frozenset(
    {
        "achiev", "arriv", "bik", "car", "chang", "clos", "com", "commut", "cycl",
        "danc", "driv", "giv", "hav", "hik", "leav", "liv", "los", "mak", "mov",
        "nam", "pric", "produc", "provid", "rid", "scar", "serv", "shar", "skat",
        "tak", "trad", "us", "vot", "wak",
    }
)


# ---------------------------------------------------------------------------
# Bundled word lists
# ---------------------------------------------------------------------------


def _read_lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=None)
def bundled_words(name: str) -> frozenset[str]:
    """Read a bundled one-word-per-line list from ``discourse_mining/data``."""
    text = resources.files("discourse_mining").joinpath("data", name).read_text(encoding="utf-8")
    return frozenset(w.lower() for w in _read_lines(text))


def load_word_list(path: str | Path) -> frozenset[str]:
    return frozenset(_read_lines(Path(path).read_text(encoding="utf-8")))


def load_merge_table(path: str | Path) -> dict[str, str]:
    """Read ``word base`` pairs, one per line."""
    return _parse_merges(Path(path).read_text(encoding="utf-8"), str(path))


def _parse_merges(text: str, source: str) -> dict[str, str]:
    table: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError("merge entries must be 'word base'", key=source, line=lineno)
        table[parts[0]] = parts[1]
    return table


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizationRules:
    """How raw tokens become analysis terms.

    An explicit ``merge_table`` entry wins over the suffix rules.  Base forms
    must normalize to themselves, otherwise ``normalize`` would not be
    idempotent; this is checked at construction.
    """

    stopwords: frozenset[str] = frozenset()
    exclusions: frozenset[str] = frozenset({"things", "stuff"})
    merge_table: Mapping[str, str] = field(default_factory=dict, hash=False)
    lowercase: bool = True
    min_token_length: int = 2
    suffix_rules: bool = True
    restore_e: frozenset[str] = DEFAULT_RESTORE_E

    def __post_init__(self) -> None:
        if self.min_token_length < 0:
            raise ConfigError("min_token_length must be >= 0", key="min_token_length")
        for word, base in self.merge_table.items():
            if base_form(base, self) != base:
                raise ConfigError(
                    "merge base %r (for %r) does not map to itself" % (base, word),
                    key="merges",
                )


def bundled_merge_table() -> dict[str, str]:
    text = resources.files("discourse_mining").joinpath("data", "merges.txt").read_text(encoding="utf-8")
    return _parse_merges(text, "merges.txt")


def default_rules() -> NormalizationRules:
    """Bundled stopwords and merge table, suffix rules on."""
    return NormalizationRules(
        stopwords=bundled_words("stopwords.txt"), merge_table=bundled_merge_table()
    )


def load_rules(path: str | Path) -> NormalizationRules:
    """Load rules from a ``key = value`` file; list/table values are paths relative to it."""
    path = Path(path)
    base_dir = path.parent
    kwargs: dict[str, object] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError("expected key = value", key=str(path), line=lineno)
        try:
            if key == "stopwords":
                kwargs["stopwords"] = (
                    bundled_words("stopwords.txt") if value == "bundled"
                    else load_word_list(base_dir / value)
                )
            elif key == "exclusions":
                kwargs["exclusions"] = frozenset(w.strip() for w in value.split(",") if w.strip())
            elif key == "merges":
                kwargs["merge_table"] = (
                    bundled_merge_table() if value == "bundled"
                    else load_merge_table(base_dir / value)
                )
            elif key in ("lowercase", "suffix_rules"):
                kwargs[key] = _parse_bool(value)
            elif key == "min_token_length":
                kwargs[key] = int(value)
            else:
                raise ConfigError("unknown normalization key", key=key, line=lineno)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc), key=key, line=lineno) from None
    kwargs.setdefault("stopwords", bundled_words("stopwords.txt"))
    kwargs.setdefault("merge_table", bundled_merge_table())
    return NormalizationRules(**kwargs)  # type: ignore[arg-type]


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean: %r" % value)


def tokenize(sentence: str) -> list[str]:
    """Maximal runs of letters, digits and inner apostrophes, in order.

    An apostrophe at either edge of a run is a quote mark and is dropped.
    """
    return [m.group(0).replace("’", "'") for m in _TOKEN_RE.finditer(sentence)]


def _strip_suffix(word: str, rules: NormalizationRules) -> str:
    if len(word) > 4 and word.endswith("ies"):
        return word[:-3] + "y"
    if word.endswith("es") and len(word) > 4 and (
        word[-3] in "sxz" or word[-4:-2] in ("ch", "sh")
    ):
        return word[:-2]
    if word.endswith("s") and len(word) > 3 and word[-2] not in "sui'":
        return word[:-1]
    if word.endswith("ing") and len(word) > 5:
        stem = word[:-3]
        if not any(c in "aeiouy" for c in stem):
            return word
        if stem in rules.restore_e:
            return stem + "e"
        if len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in "lsz":
            return stem[:-1]
        return stem
    return word


def base_form(token: str, rules: NormalizationRules) -> str:
    """Merge-table lookup, else suffix stripping run to a fixed point."""
    if token in rules.merge_table:
        return rules.merge_table[token]
    if not rules.suffix_rules:
        return token
    word = token
    while True:
        stripped = _strip_suffix(word, rules)
        if stripped == word or stripped in rules.merge_table:
            return rules.merge_table.get(stripped, stripped)
        word = stripped


def normalize(tokens: Sequence[str], rules: NormalizationRules) -> list[str]:
    """Lowercase, merge to base forms, then drop stopwords, exclusions and short tokens."""
    out: list[str] = []
    for tok in tokens:
        surface = tok.lower() if rules.lowercase else tok
        base = base_form(surface, rules)
        if len(base) < rules.min_token_length:
            continue
        if surface in rules.stopwords or base in rules.stopwords:
            continue
        if surface in rules.exclusions or base in rules.exclusions:
            continue
        out.append(base)
    return out


def normalize_text(text: str, rules: NormalizationRules) -> list[str]:
    return normalize(tokenize(text), rules)


def normalize_corpus(corpus: Corpus, rules: NormalizationRules) -> Corpus:
    """Fill every document's token stream from its sentences."""
    documents = tuple(
        replace(d, tokens=tuple(t for s in d.sentences for t in normalize_text(s, rules)))
        for d in corpus.documents
    )
    return replace(corpus, documents=documents)


# ---------------------------------------------------------------------------
# Vocabulary and matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    index: Mapping[str, int] = field(default_factory=dict, hash=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if len(set(self.terms)) != len(self.terms):
            raise VocabularyError("vocabulary terms must be unique")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: object) -> bool:
        return term in self.index

    @property
    def digest(self) -> str:
        """sha256 of the newline-joined terms; identifies the vocabulary in exports."""
        return hashlib.sha256("\n".join(self.terms).encode("utf-8")).hexdigest()


def _token_lists(docs: TokenDocs) -> list[Sequence[str]]:
    if isinstance(docs, Corpus):
        return [d.tokens for d in docs.documents]
    return list(docs)


def build_vocabulary(docs: TokenDocs, min_df: int = 1) -> Vocabulary:
    """Sorted terms occurring in at least *min_df* documents.

    Raises:
        EmptyCorpusError: no documents.
        VocabularyError: no term survives (all documents empty, or min_df too high).
    """
    token_lists = _token_lists(docs)
    if not token_lists:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")
    df: dict[str, int] = {}
    for tokens in token_lists:
        for t in set(tokens):
            df[t] = df.get(t, 0) + 1
    terms = tuple(sorted(t for t, n in df.items() if n >= min_df))
    if not terms:
        raise VocabularyError(
            "no terms with document frequency >= %d in %d documents" % (min_df, len(token_lists))
        )
    return Vocabulary(terms)


@dataclass(frozen=True, eq=False)
class DocTermMatrix:
    counts: sparse.coo_matrix          # D' x V, nonnegative integer counts
    doc_ids: tuple[str, ...]
    vocabulary: Vocabulary

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape  # type: ignore[return-value]

    def toarray(self) -> np.ndarray:
        return self.counts.toarray()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.counts.sum(axis=1)).ravel()


@dataclass(frozen=True, eq=False)
class WeightedMatrix:
    weights: sparse.coo_matrix         # same shape as the source counts
    idf: np.ndarray                    # per-term ln(D'/df); 0 for unseen terms
    doc_ids: tuple[str, ...]
    vocabulary: Vocabulary

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape  # type: ignore[return-value]

    def toarray(self) -> np.ndarray:
        return self.weights.toarray()


def build_dtm(
    docs: TokenDocs, vocab: Vocabulary, doc_ids: Sequence[str] | None = None
) -> DocTermMatrix:
    """Count in-vocabulary tokens per document; out-of-vocabulary tokens are ignored."""
    token_lists = _token_lists(docs)
    if isinstance(docs, Corpus):
        doc_ids = docs.doc_ids
    elif doc_ids is None:
        doc_ids = tuple(str(i) for i in range(len(token_lists)))
    if len(doc_ids) != len(token_lists):
        raise VocabularyError(
            "got %d doc ids for %d documents" % (len(doc_ids), len(token_lists))
        )
    if not token_lists or not len(vocab):
        raise VocabularyError(
            "cannot build a %d x %d document-term matrix" % (len(token_lists), len(vocab))
        )

    rows: list[int] = []
    cols: list[int] = []
    for i, tokens in enumerate(token_lists):
        for t in tokens:
            j = vocab.index.get(t)
            if j is not None:
                rows.append(i)
                cols.append(j)
    data = np.ones(len(rows), dtype=np.int64)
    counts = sparse.coo_matrix(
        (data, (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(len(token_lists), len(vocab)),
    )
    counts.sum_duplicates()
    return DocTermMatrix(counts=counts, doc_ids=tuple(doc_ids), vocabulary=vocab)


def inverse_document_frequency(dtm: DocTermMatrix) -> np.ndarray:
    n_docs = dtm.shape[0]
    df = np.bincount(dtm.counts.col[dtm.counts.data > 0], minlength=dtm.shape[1])
    idf = np.zeros(dtm.shape[1], dtype=np.float64)
    seen = df > 0
    idf[seen] = np.log(n_docs / df[seen])
    return idf


def apply_tfidf(dtm: DocTermMatrix, idf: np.ndarray) -> WeightedMatrix:
    """Weight *dtm* with a fitted idf vector: tf = count / row sum, weight = tf * idf."""
    if idf.shape != (dtm.shape[1],):
        raise VocabularyError(
            "idf has %d entries for %d vocabulary terms" % (idf.shape[0], dtm.shape[1])
        )
    coo = dtm.counts
    row_sums = dtm.row_sums().astype(np.float64)
    tf = coo.data / row_sums[coo.row]
    weights = sparse.coo_matrix((tf * idf[coo.col], (coo.row, coo.col)), shape=coo.shape)
    weights.eliminate_zeros()
    return WeightedMatrix(weights=weights, idf=idf, doc_ids=dtm.doc_ids, vocabulary=dtm.vocabulary)


def tfidf(dtm: DocTermMatrix) -> WeightedMatrix:
    """TF-IDF with tf = relative frequency and idf = ln(D'/df)."""
    if dtm.shape[0] < 1:
        raise EmptyCorpusError("tf-idf needs at least one document")
    return apply_tfidf(dtm, inverse_document_frequency(dtm))


# ---------------------------------------------------------------------------
# Rule tagger and phrase extraction
# ---------------------------------------------------------------------------

ADJ, ADV, NOUN, VERB = "ADJ", "ADV", "NOUN", "VERB"

_CLOSED_CLASS: dict[str, str] = {}
for _tag, _words in (
    ("DET", "a an the this that these those every each some any no all both either neither "
            "another such what which whose my your his her its our their"),
    ("PRON", "i me you he him she it we us they them myself yourself itself ourselves "
             "themselves someone something anyone anything everyone everything nobody "
             "nothing who whom one"),
    ("ADP", "in on at by for with about against between into through during before after "
            "above below to from up down of off over under near around across along "
            "behind beyond like than via toward towards within without"),
    ("CONJ", "and or but nor so yet because although though while if unless whereas "
             "since until whether"),
    ("PART", "not n't don't doesn't didn't isn't aren't wasn't weren't can't won't "
             "wouldn't shouldn't couldn't there"),
    (VERB, "is are was were be been being am have has had having do does did doing "
           "will would shall should can could may might must get gets got go goes went "
           "gone take takes took make makes made say says said see sees saw know knows "
           "knew think thinks thought want wants need needs feel feels felt come comes "
           "came give gives gave keep keeps kept let lets seem seems put puts tell told "
           "become became ride rides rode drive drives drove walk walks use uses live "
           "lives love loves hate hates wish try tries"),
    (ADV, "very really too also just still always never often sometimes already even "
          "quite rather almost here now then again maybe perhaps so well much more most "
          "less least soon ever far pretty"),
):
    for _w in _words.split():
        _CLOSED_CLASS[_w] = _tag

_ADJ_SUFFIXES = ("ous", "ful", "ible", "able", "ive", "less")
_NOT_ADJ = frozenset(
    {"table", "cable", "vegetable", "timetable", "bible", "arrive", "archive", "motive",
     "olive", "unless"}
)
_LY_NOUNS = frozenset({"family", "supply", "ally", "belly", "bully", "jelly", "rally", "july",
                       "italy", "assembly", "anomaly"})


def _tag_one(token: str) -> str:
    if token in _CLOSED_CLASS:
        return _CLOSED_CLASS[token]
    if token in bundled_words("adjectives.txt"):
        return ADJ
    if token.isdigit():
        return "NUM"
    if token not in _NOT_ADJ and any(
        token.endswith(s) and len(token) >= len(s) + 3 for s in _ADJ_SUFFIXES
    ):
        return ADJ
    if token.endswith("ly") and len(token) > 4 and token not in _LY_NOUNS:
        return ADV
    if token.endswith("ed") and len(token) > 4:
        return VERB
    return NOUN


def tag_tokens(tokens: Sequence[str]) -> list[tuple[str, str]]:
    """Lightweight part-of-speech tags from closed-class lists, an adjective lexicon and suffixes."""
    lowered = [t.lower() for t in tokens]
    return [(t, _tag_one(t)) for t in lowered]


def extract_phrases(
    tagged: Sequence[tuple[str, str]], ref: SentenceRef | None = None
) -> list[CandidatePhrase]:
    """Every (ADJ, NOUN) bigram and (ADV, ADJ, NOUN) trigram, in sentence order."""
    phrases: list[CandidatePhrase] = []
    n = len(tagged)
    for i in range(n):
        if i + 2 < n and (tagged[i][1], tagged[i + 1][1], tagged[i + 2][1]) == (ADV, ADJ, NOUN):
            phrases.append(
                CandidatePhrase(
                    tokens=(tagged[i][0], tagged[i + 1][0], tagged[i + 2][0]),
                    head_noun=tagged[i + 2][0],
                    modifier=tagged[i + 1][0],
                    ref=ref,
                )
            )
        if i + 1 < n and (tagged[i][1], tagged[i + 1][1]) == (ADJ, NOUN):
            phrases.append(
                CandidatePhrase(
                    tokens=(tagged[i][0], tagged[i + 1][0]),
                    head_noun=tagged[i + 1][0],
                    modifier=tagged[i][0],
                    ref=ref,
                )
            )
    return phrases


def sentence_phrases(text: str, ref: SentenceRef | None = None) -> list[CandidatePhrase]:
    return extract_phrases(tag_tokens(tokenize(text)), ref)
