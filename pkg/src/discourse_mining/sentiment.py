"""Sentiment lexicon, weak labeling, elastic-net classification and sentence scoring.

The lexicon scores each candidate phrase by how often it occurs near known
positive versus negative seed words in a reference corpus.  Sentences whose
phrases lean clearly one way become training data for an elastic-net
logistic regression over sentence TF-IDF features, which then scores every
sentence with a probability of positiveness.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from prefect.logging import get_logger
from scipy import sparse

from discourse_mining._kernels import coordinate_update, elastic_net_cd
from discourse_mining._types import (
    CandidatePhrase,
    Corpus,
    ModePhraseScore,
    SentenceRef,
    SentenceScore,
    SentenceUnit,
    SentimentClass,
)
from discourse_mining.exception import (
    ConfigError,
    DataError,
    DimensionError,
    EmptyCorpusError,
    TrainingDataError,
    VocabularyError,
)
from discourse_mining.preprocess import (
    NormalizationRules,
    Vocabulary,
    WeightedMatrix,
    apply_tfidf,
    build_dtm,
    build_vocabulary,
    normalize_text,
    sentence_phrases,
    tfidf,
    tokenize,
)

logger = get_logger(__name__)

RATIO_LIMIT = 10.0
NEUTRAL_LOW = 0.35
NEUTRAL_HIGH = 0.65
MIX_FLOOR = 1e-3
PROBABILITY_FLOOR = 1e-6


@dataclass(frozen=True)
class SeedWordSets:
    positive: frozenset[str] = frozenset({"good", "wonderful", "spectacular"})
    negative: frozenset[str] = frozenset({"bad", "horrible", "awful"})

    def __post_init__(self) -> None:
        object.__setattr__(self, "positive", frozenset(w.lower() for w in self.positive))
        object.__setattr__(self, "negative", frozenset(w.lower() for w in self.negative))
        if not self.positive:
            raise ConfigError("positive seed set is empty", key="sentiment.positive_seeds")
        if not self.negative:
            raise ConfigError("negative seed set is empty", key="sentiment.negative_seeds")
        both = self.positive & self.negative
        if both:
            raise ConfigError(
                "seed words %s are both positive and negative" % ", ".join(sorted(both)),
                key="sentiment.negative_seeds",
            )


# ---------------------------------------------------------------------------
# Lexicon
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LexiconEntry:
    hit_positive: int
    hit_negative: int
    ratio: float
    score: float


@dataclass(frozen=True)
class SentimentLexicon:
    entries: Mapping[str, LexiconEntry] = field(default_factory=dict, hash=False)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, phrase: object) -> bool:
        return phrase in self.entries

    def score(self, phrase: str) -> float | None:
        entry = self.entries.get(phrase)
        return None if entry is None else entry.score


def log_odds(hit_positive: float, hit_negative: float, smoothing: float = 1.0) -> float:
    """Signed count ratio of positive to negative context hits, clamped to [-10, 10].

    Despite the name this is not a logarithm: the larger smoothed count is
    divided by the smaller one and the result is negated when negative hits
    dominate.
    """
    pos = hit_positive + smoothing
    neg = hit_negative + smoothing
    if pos < neg:
        ratio = -(neg / pos)
    elif pos > neg:
        ratio = pos / neg
    else:
        ratio = 0.0
    return min(RATIO_LIMIT, max(-RATIO_LIMIT, ratio))


def reference_token_streams(
    sentences: Iterable[str] = (), extra_path: str | Path | None = None
) -> list[list[str]]:
    """Lowercased token streams for co-occurrence counting, one per sentence or line."""
    streams = [[t.lower() for t in tokenize(s)] for s in sentences]
    if extra_path is not None:
        with open(extra_path, encoding="utf-8") as f:
            for line in f:
                if line.strip() and not line.startswith("#"):
                    streams.append([t.lower() for t in tokenize(line)])
    return [s for s in streams if s]


def build_lexicon(
    phrases: Iterable[CandidatePhrase],
    reference_corpus: Corpus | Sequence[Sequence[str]],
    seeds: SeedWordSets = SeedWordSets(),
    window: int = 10,
) -> SentimentLexicon:
    """Score every distinct phrase from its seed-word neighbourhoods in *reference_corpus*.

    An occurrence is a positive hit when a positive seed lies within *window*
    tokens of it (the phrase's own tokens included); negative hits likewise.

    Raises:
        EmptyCorpusError: the reference corpus has no tokens.
    """
    if window < 1:
        raise ConfigError("window must be >= 1", key="sentiment.window")
    if isinstance(reference_corpus, Corpus):
        streams: list[Sequence[str]] = [
            [t.lower() for s in d.sentences for t in tokenize(s)] for d in reference_corpus.documents
        ]
    else:
        streams = [list(s) for s in reference_corpus]
    if not any(streams):
        raise EmptyCorpusError("the sentiment reference corpus is empty")

    wanted = {p.tokens for p in phrases}
    lengths = sorted({len(t) for t in wanted})
    hits = {p: [0, 0] for p in wanted}
    for tokens in streams:
        n = len(tokens)
        pos_prefix = np.concatenate(([0], np.cumsum([t in seeds.positive for t in tokens])))
        neg_prefix = np.concatenate(([0], np.cumsum([t in seeds.negative for t in tokens])))
        for length in lengths:
            for i in range(n - length + 1):
                key = tuple(tokens[i:i + length])
                if key not in wanted:
                    continue
                lo, hi = max(0, i - window), min(n, i + length + window)
                if pos_prefix[hi] > pos_prefix[lo]:
                    hits[key][0] += 1
                if neg_prefix[hi] > neg_prefix[lo]:
                    hits[key][1] += 1

    entries: dict[str, LexiconEntry] = {}
    for key in sorted(hits):
        pos, neg = hits[key]
        ratio = log_odds(pos, neg)
        entries[" ".join(key)] = LexiconEntry(pos, neg, ratio, ratio / RATIO_LIMIT)
    logger.info("Built a lexicon of %d phrases from %d reference streams", len(entries), len(streams))
    return SentimentLexicon(entries)


def write_lexicon(lexicon: SentimentLexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for phrase in sorted(lexicon.entries):
            e = lexicon.entries[phrase]
            f.write("%s\t%d\t%d\t%r\t%r\n" % (phrase, e.hit_positive, e.hit_negative, e.ratio, e.score))


def read_lexicon(path: str | Path) -> SentimentLexicon:
    entries: dict[str, LexiconEntry] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 5:
                raise DataError("%s line %d: expected 5 tab-separated fields" % (path, lineno))
            phrase, pos, neg, ratio, score = fields
            entries[phrase] = LexiconEntry(int(pos), int(neg), float(ratio), float(score))
    return SentimentLexicon(entries)


# ---------------------------------------------------------------------------
# Labels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledItem:
    ref: SentenceRef
    label: SentimentClass
    weight: float = 1.0


@dataclass(frozen=True)
class LabeledSet:
    items: tuple[LabeledItem, ...] = ()

    def __len__(self) -> int:
        return len(self.items)


def aggregate_phrase_score(text: str, lexicon: SentimentLexicon) -> float | None:
    scores = [s for s in (lexicon.score(p.text) for p in sentence_phrases(text)) if s is not None]
    if not scores:
        return None
    return math.fsum(scores) / len(scores)


def weak_label(
    sentences: Iterable[SentenceUnit], lexicon: SentimentLexicon, tau: float = 0.2
) -> LabeledSet:
    """Label sentences whose mean phrase score clears +/-tau; the rest are left out."""
    if not len(lexicon):
        raise DataError("cannot weak-label with an empty lexicon")
    items: list[LabeledItem] = []
    for unit in sentences:
        agg = aggregate_phrase_score(unit.text, lexicon)
        if agg is None:
            continue
        if agg > tau:
            items.append(LabeledItem(unit.ref, SentimentClass.POSITIVE))
        elif agg < -tau:
            items.append(LabeledItem(unit.ref, SentimentClass.NEGATIVE))
    if not items:
        logger.warning("Weak labeling produced no training sentences (tau=%g)", tau)
    return LabeledSet(tuple(items))


def load_labels(path: str | Path) -> dict[SentenceRef, SentimentClass]:
    """Read ``session<TAB>utterance_index<TAB>sentence_index<TAB>label`` lines."""
    labels: dict[SentenceRef, SentimentClass] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.rstrip("\n").split("\t")
            try:
                session, utt, sent, label = fields
                cls = SentimentClass(label.strip())
                ref = SentenceRef(session, int(utt), int(sent))
            except ValueError:
                raise DataError("%s line %d: malformed label line" % (path, lineno)) from None
            if cls == SentimentClass.NEUTRAL:
                raise DataError("%s line %d: labels must be positive or negative" % (path, lineno))
            labels[ref] = cls
    return labels


def override_labels(
    labeled: LabeledSet, labels: Mapping[SentenceRef, SentimentClass], known: Iterable[SentenceRef]
) -> LabeledSet:
    """Replace weak labels with hand labels; hand labels for unknown sentences are dropped."""
    known = set(known)
    unknown = [r for r in labels if r not in known]
    if unknown:
        logger.warning("Ignoring %d hand labels for sentences not in the corpus", len(unknown))
    kept = [i for i in labeled.items if i.ref not in labels]
    kept.extend(LabeledItem(r, c) for r, c in labels.items() if r in known)
    return LabeledSet(tuple(sorted(kept, key=lambda i: i.ref)))


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------


def ref_key(ref: SentenceRef) -> str:
    return "%s:%d:%d" % (ref.session_id, ref.utterance_index, ref.sentence_index)


def sentence_features(
    units: Sequence[SentenceUnit], rules: NormalizationRules, min_df: int = 1
) -> WeightedMatrix:
    """TF-IDF rows for every sentence, over a vocabulary drawn from all of them."""
    tokens = [normalize_text(u.text, rules) for u in units]
    vocab = build_vocabulary(tokens, min_df=min_df)
    return tfidf(build_dtm(tokens, vocab, doc_ids=[ref_key(u.ref) for u in units]))


# ---------------------------------------------------------------------------
# Elastic-net logistic regression
# ---------------------------------------------------------------------------


def objective(
    X: np.ndarray, y: np.ndarray, s: np.ndarray, w: np.ndarray, b: float, lam: float, mix: float
) -> float:
    """Weighted mean binomial deviance / 2 plus lam * [mix*|w|_1 + (1-mix)/2*|w|_2^2]."""
    eta = X @ w + b
    loss = float(np.sum(s * (np.logaddexp(0.0, eta) - y * eta)) / np.sum(s))
    return loss + lam * (mix * float(np.abs(w).sum()) + 0.5 * (1.0 - mix) * float(w @ w))


def smooth_gradient(
    X: np.ndarray, y: np.ndarray, s: np.ndarray, w: np.ndarray, b: float, lam: float, mix: float
) -> tuple[np.ndarray, float]:
    """Gradient of the differentiable part (loss plus ridge term) in (w, b)."""
    eta = X @ w + b
    r = s * (_expit(eta) - y) / np.sum(s)
    return X.T @ r + lam * (1.0 - mix) * w, float(r.sum())


def _expit(eta: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -eta))


def binomial_deviance(X: np.ndarray, y: np.ndarray, s: np.ndarray, w: np.ndarray, b: float) -> float:
    eta = X @ w + b
    return float(2.0 * np.sum(s * (np.logaddexp(0.0, eta) - y * eta)) / np.sum(s))


def _null_intercept(y: np.ndarray, s: np.ndarray) -> float:
    ybar = min(max(float(np.sum(s * y) / np.sum(s)), PROBABILITY_FLOOR), 1.0 - PROBABILITY_FLOOR)
    return math.log(ybar / (1.0 - ybar))


def lambda_max(X: np.ndarray, y: np.ndarray, s: np.ndarray, mix: float) -> float:
    """Smallest penalty at which every non-intercept weight is zero."""
    ybar = np.sum(s * y) / np.sum(s)
    grad = X.T @ (s * (y - ybar)) / np.sum(s)
    return float(np.max(np.abs(grad)) / max(mix, MIX_FLOOR))


def lambda_path(
    X: np.ndarray, y: np.ndarray, s: np.ndarray, mix: float, count: int = 50, ratio: float = 1e-4
) -> np.ndarray:
    """*count* log-spaced penalties from lambda_max down to lambda_max * *ratio*."""
    top = lambda_max(X, y, s, mix)
    if top <= 0.0:
        return np.zeros(1)
    return np.geomspace(top, top * ratio, count)


@dataclass(frozen=True, eq=False)
class ElasticNetFit:
    weights: np.ndarray
    intercept: float
    lam: float
    sweeps: int
    converged: bool
    trace: np.ndarray                  # objective after each sweep; trace[0] is the start


def fit_elastic_net(
    X: np.ndarray,
    y: np.ndarray,
    s: np.ndarray,
    lam: float,
    mix: float,
    w0: np.ndarray | None = None,
    b0: float | None = None,
    max_sweeps: int = 10000,
    tol: float = 1e-7,
) -> ElasticNetFit:
    """Minimize the penalized objective by cyclic coordinate descent."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    w = np.zeros(X.shape[1]) if w0 is None else np.array(w0, dtype=np.float64)
    b = _null_intercept(y, s) if b0 is None else float(b0)
    trace = np.empty(max_sweeps + 1)
    b, sweeps, converged = elastic_net_cd(
        X, np.asarray(y, dtype=np.float64), np.asarray(s, dtype=np.float64),
        w, b, float(lam), float(mix), max_sweeps, tol, trace,
    )
    if not converged:
        logger.warning("Coordinate descent did not converge in %d sweeps at lambda=%g", sweeps, lam)
    return ElasticNetFit(w, float(b), float(lam), int(sweeps), bool(converged), trace[:sweeps + 1].copy())


def univariate_update(z: float, norm: float, lam: float, mix: float) -> float:
    """Closed-form coordinate minimizer: soft_threshold(z, lam*mix) / (norm + lam*(1-mix))."""
    return float(coordinate_update(z, norm, lam, mix))


def fit_path(
    X: np.ndarray,
    y: np.ndarray,
    s: np.ndarray,
    lambdas: Sequence[float],
    mix: float,
    max_sweeps: int = 10000,
    tol: float = 1e-7,
) -> list[ElasticNetFit]:
    """Warm-started fits down the penalty path."""
    fits: list[ElasticNetFit] = []
    w0, b0 = None, None
    for lam in lambdas:
        fit = fit_elastic_net(X, y, s, lam, mix, w0, b0, max_sweeps, tol)
        fits.append(fit)
        w0, b0 = fit.weights, fit.intercept
    return fits


def _truncate_path(
    X: np.ndarray, y: np.ndarray, s: np.ndarray, fits: list[ElasticNetFit], limit: float = 0.999
) -> list[ElasticNetFit]:
    null_dev = binomial_deviance(X, y, s, np.zeros(X.shape[1]), _null_intercept(y, s))
    for i, fit in enumerate(fits):
        dev = binomial_deviance(X, y, s, fit.weights, fit.intercept)
        if null_dev > 0 and 1.0 - dev / null_dev > limit:
            return fits[:i + 1]
    return fits


def cv_partition(n: int, folds: int, seed: int, labels: np.ndarray | None = None) -> list[np.ndarray]:
    """Shuffle 0..n-1 with a seeded PCG64 stream and cut into *folds* near-equal parts.

    With *labels*, each class is shuffled on its own and dealt round-robin
    across the folds, so every class is spread over as many folds as it has
    members and fold sizes still differ by at most one.
    """
    if folds < 2:
        raise ConfigError("folds must be >= 2", key="sentiment.folds")
    if n < folds:
        raise TrainingDataError("%d labeled items cannot fill %d folds" % (n, folds))
    rng = np.random.Generator(np.random.PCG64(seed))
    if labels is None:
        return [np.sort(part) for part in np.array_split(rng.permutation(n), folds)]
    labels = np.asarray(labels)
    if labels.shape[0] != n:
        raise DimensionError("%d labels for %d items" % (labels.shape[0], n))
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    return [np.sort(order[k::folds]) for k in range(folds)]


@dataclass(frozen=True, eq=False)
class FoldResult:
    fold: int
    test_indices: np.ndarray
    deviance: np.ndarray               # per penalty on the path; NaN when the fold was skipped
    accuracy: np.ndarray

    @property
    def used(self) -> bool:
        return bool(np.all(np.isfinite(self.deviance)))


@dataclass(frozen=True, eq=False)
class CrossValidationReport:
    lambdas: np.ndarray
    folds: tuple[FoldResult, ...]

    @property
    def mean_deviance(self) -> np.ndarray:
        return np.mean([f.deviance for f in self.folds if f.used], axis=0)

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.mean_deviance))

    def to_dict(self) -> dict:
        best = self.best_index
        return {
            "lambdas": self.lambdas.tolist(),
            "mean_deviance": self.mean_deviance.tolist(),
            "best_index": best,
            "folds": [
                {
                    "fold": f.fold,
                    "size": int(f.test_indices.shape[0]),
                    "deviance": float(f.deviance[best]) if f.used else None,
                    "accuracy": float(f.accuracy[best]) if f.used else None,
                }
                for f in self.folds
            ],
        }


def _design(labeled: LabeledSet, features: WeightedMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = {d: i for i, d in enumerate(features.doc_ids)}
    try:
        idx = [rows[ref_key(item.ref)] for item in labeled.items]
    except KeyError as exc:
        raise TrainingDataError("labeled sentence %s has no feature row" % exc) from None
    X = np.ascontiguousarray(sparse.csr_matrix(features.weights)[idx].toarray(), dtype=np.float64)
    y = np.array([1.0 if i.label == SentimentClass.POSITIVE else 0.0 for i in labeled.items])
    s = np.array([i.weight for i in labeled.items], dtype=np.float64)
    return X, y, s


def _check_training_set(y: np.ndarray, folds: int) -> None:
    if y.shape[0] < folds:
        raise TrainingDataError("%d labeled items cannot fill %d folds" % (y.shape[0], folds))
    if y.min() == y.max():
        raise TrainingDataError("training labels contain a single class")


def _cross_validate(
    X: np.ndarray, y: np.ndarray, s: np.ndarray, lambdas: np.ndarray, mix: float,
    folds: int, seed: int, max_sweeps: int, tol: float,
) -> CrossValidationReport:
    results: list[FoldResult] = []
    for k, test in enumerate(cv_partition(y.shape[0], folds, seed, labels=y)):
        train = np.setdiff1d(np.arange(y.shape[0]), test)
        if y[train].min() == y[train].max():
            logger.warning("Fold %d leaves a single class for training; skipping it", k)
            blank = np.full(len(lambdas), np.nan)
            results.append(FoldResult(k, test, blank, blank.copy()))
            continue
        fits = fit_path(X[train], y[train], s[train], lambdas, mix, max_sweeps, tol)
        dev = np.array([binomial_deviance(X[test], y[test], s[test], f.weights, f.intercept) for f in fits])
        acc = np.array(
            [np.mean(((X[test] @ f.weights + f.intercept) > 0.0) == (y[test] > 0.5)) for f in fits]
        )
        results.append(FoldResult(k, test, dev, acc))
    if not any(r.used for r in results):
        raise TrainingDataError("no cross-validation fold keeps both classes for training")
    return CrossValidationReport(lambdas=np.asarray(lambdas), folds=tuple(results))


def cross_validate(
    labeled: LabeledSet,
    features: WeightedMatrix,
    folds: int = 10,
    seed: int = 0,
    lambda_grid: Sequence[float] | None = None,
    mix: float = 0.5,
    max_sweeps: int = 10000,
    tol: float = 1e-7,
) -> CrossValidationReport:
    """Held-out deviance and accuracy per fold along the penalty path."""
    X, y, s = _design(labeled, features)
    _check_training_set(y, folds)
    lambdas = np.asarray(lambda_grid if lambda_grid is not None else lambda_path(X, y, s, mix))
    return _cross_validate(X, y, s, lambdas, mix, folds, seed, max_sweeps, tol)


@dataclass(frozen=True, eq=False)
class SentimentClassifier:
    vocabulary: Vocabulary
    idf: np.ndarray
    weights: np.ndarray
    intercept: float
    lam: float
    mix: float
    cv_report: dict = field(default_factory=dict)
    neutral_low: float = NEUTRAL_LOW
    neutral_high: float = NEUTRAL_HIGH
    converged: bool = True

    def probability(self, x: np.ndarray | sparse.spmatrix) -> float:
        if x.shape[-1] != self.weights.shape[0]:
            raise DimensionError(
                "feature vector has %d entries, classifier expects %d" % (x.shape[-1], self.weights.shape[0])
            )
        eta = float(np.asarray(x @ self.weights).ravel()[0]) + self.intercept
        return float(_expit(np.array([eta]))[0])


def train_classifier(
    labeled: LabeledSet,
    features: WeightedMatrix,
    lambda_grid: Sequence[float] | None = None,
    mix: float = 0.5,
    folds: int = 10,
    seed: int = 0,
    lambda_count: int = 50,
    lambda_ratio: float = 1e-4,
    max_sweeps: int = 10000,
    tol: float = 1e-7,
) -> SentimentClassifier:
    """Pick the penalty by k-fold CV deviance, then refit on every labeled sentence.

    Raises:
        TrainingDataError: one class only, or fewer items than folds.
    """
    if not 0.0 <= mix <= 1.0:
        raise ConfigError("mix must lie in [0, 1]", key="sentiment.mix")
    X, y, s = _design(labeled, features)
    _check_training_set(y, folds)

    if lambda_grid is None:
        lambdas = lambda_path(X, y, s, mix, lambda_count, lambda_ratio)
        full = _truncate_path(X, y, s, fit_path(X, y, s, lambdas, mix, max_sweeps, tol))
        lambdas = lambdas[:len(full)]
    else:
        lambdas = np.sort(np.asarray(lambda_grid, dtype=np.float64))[::-1]
        full = fit_path(X, y, s, lambdas, mix, max_sweeps, tol)

    report = _cross_validate(X, y, s, lambdas, mix, folds, seed, max_sweeps, tol)
    best = full[report.best_index]
    logger.info(
        "Trained on %d sentences (%d positive); lambda=%g, mean CV deviance %.4f",
        y.shape[0], int(y.sum()), best.lam, float(report.mean_deviance[report.best_index]),
    )
    return SentimentClassifier(
        vocabulary=features.vocabulary,
        idf=features.idf,
        weights=best.weights,
        intercept=best.intercept,
        lam=best.lam,
        mix=mix,
        cv_report=report.to_dict(),
        converged=best.converged,
    )


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def classify(p: float, low: float = NEUTRAL_LOW, high: float = NEUTRAL_HIGH) -> SentimentClass:
    """negative below *low*, positive above *high*, neutral in between (both ends included)."""
    if p < low:
        return SentimentClass.NEGATIVE
    if p > high:
        return SentimentClass.POSITIVE
    return SentimentClass.NEUTRAL


def score_sentence(
    classifier: SentimentClassifier,
    features: np.ndarray | sparse.spmatrix,
    unit: SentenceUnit | SentenceRef | None = None,
) -> SentenceScore:
    """Probability of positiveness for one feature row, with its threshold class."""
    p = classifier.probability(features)
    cls = classify(p, classifier.neutral_low, classifier.neutral_high)
    if isinstance(unit, SentenceUnit):
        return SentenceScore(
            ref=unit.ref,
            probability=p,
            sentiment_class=cls,
            speaker_id=unit.speaker_id,
            community_label=unit.community_label,
            discussion_topic=unit.discussion_topic,
        )
    return SentenceScore(ref=unit or SentenceRef("", 0, 0), probability=p, sentiment_class=cls)


def _featurize(
    classifier: SentimentClassifier, texts: Sequence[str], rules: NormalizationRules
) -> sparse.csr_matrix:
    tokens = [normalize_text(t, rules) for t in texts]
    dtm = build_dtm(tokens, classifier.vocabulary)
    return sparse.csr_matrix(apply_tfidf(dtm, classifier.idf).weights)


def score_units(
    classifier: SentimentClassifier, units: Sequence[SentenceUnit], rules: NormalizationRules
) -> list[SentenceScore]:
    if not units:
        return []
    X = _featurize(classifier, [u.text for u in units], rules)
    return [score_sentence(classifier, X[i], u) for i, u in enumerate(units)]


def score_text(classifier: SentimentClassifier, text: str, rules: NormalizationRules) -> SentenceScore:
    """Score a free-standing sentence."""
    return score_sentence(classifier, _featurize(classifier, [text], rules)[0])


def save_classifier(classifier: SentimentClassifier, path: str | Path) -> None:
    record = {
        "vocabulary_digest": classifier.vocabulary.digest,
        "terms": list(classifier.vocabulary.terms),
        "idf": classifier.idf.tolist(),
        "weights": classifier.weights.tolist(),
        "intercept": classifier.intercept,
        "lambda": classifier.lam,
        "mix": classifier.mix,
        "neutral_low": classifier.neutral_low,
        "neutral_high": classifier.neutral_high,
        "converged": classifier.converged,
        "cv_report": classifier.cv_report,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(record, f, ensure_ascii=False)
        f.write("\n")


def load_classifier(path: str | Path) -> SentimentClassifier:
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    vocab = Vocabulary(tuple(raw["terms"]))
    if vocab.digest != raw["vocabulary_digest"]:
        raise VocabularyError("classifier file %s has a corrupt vocabulary" % path)
    return SentimentClassifier(
        vocabulary=vocab,
        idf=np.asarray(raw["idf"], dtype=np.float64),
        weights=np.asarray(raw["weights"], dtype=np.float64),
        intercept=float(raw["intercept"]),
        lam=float(raw["lambda"]),
        mix=float(raw["mix"]),
        cv_report=raw["cv_report"],
        neutral_low=float(raw["neutral_low"]),
        neutral_high=float(raw["neutral_high"]),
        converged=bool(raw["converged"]),
    )


# ---------------------------------------------------------------------------
# Transport-mode scores
# ---------------------------------------------------------------------------


def _contains(tokens: Sequence[str], keyword: tuple[str, ...]) -> bool:
    n = len(keyword)
    return any(tuple(tokens[i:i + n]) == keyword for i in range(len(tokens) - n + 1))


def mode_phrase_scores(
    sentences: Iterable[SentenceUnit],
    lexicon: SentimentLexicon,
    mode_dict: Mapping[str, Iterable[str]],
    rules: NormalizationRules,
    probabilities: Mapping[SentenceRef, float] | None = None,
) -> list[ModePhraseScore]:
    """(mode, phrase, score) for every lexicon phrase in a sentence that mentions a mode.

    A sentence without lexicon phrases falls back to 2p - 1 of its classifier
    probability, when one is given.  Sentences mentioning several modes
    contribute to each.
    """
    if not mode_dict:
        raise ConfigError("mode dictionary is empty", key="analysis.modes")
    keywords = {
        mode: [k for k in (tuple(normalize_text(w, rules)) for w in words) if k]
        for mode, words in mode_dict.items()
    }
    out: list[ModePhraseScore] = []
    for unit in sentences:
        tokens = normalize_text(unit.text, rules)
        modes = [m for m, kws in keywords.items() if any(_contains(tokens, k) for k in kws)]
        if not modes:
            continue
        scored = [
            (p.text, s) for p in sentence_phrases(unit.text) if (s := lexicon.score(p.text)) is not None
        ]
        if not scored and probabilities is not None and unit.ref in probabilities:
            scored = [("", 2.0 * probabilities[unit.ref] - 1.0)]
        for mode in modes:
            out.extend(
                ModePhraseScore(mode, phrase, score, unit.ref, unit.community_label)
                for phrase, score in scored
            )
    return out
