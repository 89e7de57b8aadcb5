"""LDA topic extraction by collapsed Gibbs sampling.

``fit_lda`` is the entry point.  The sampler state (per-token assignments and
the doc-topic / topic-word count matrices) lives in numpy arrays that the
compiled sweep in ``_kernels`` updates in place; one chain is strictly
sequential.  Point estimates of theta and phi come from the smoothed counts
of the final sweep.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from prefect.logging import get_logger
from scipy.special import gammaln

from discourse_mining._kernels import fold_in_sweep, gibbs_sweep
from discourse_mining._types import Corpus, Document, ThemePassage
from discourse_mining.exception import (
    ConfigError,
    DataError,
    EmptyCorpusError,
    TopicRangeError,
    UnknownDocumentError,
    VocabularyError,
)
from discourse_mining.preprocess import (
    DocTermMatrix,
    NormalizationRules,
    Vocabulary,
    default_rules,
    normalize,
    normalize_text,
)

logger = get_logger(__name__)

SweepCallback = Callable[[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray], None]


@dataclass(frozen=True)
class LdaConfig:
    k: int = 5
    alpha: float = 0.1
    beta: float = 0.01
    iterations: int = 2000
    burn_in: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("number of topics must be >= 1", key="topics.k")
        if not self.alpha > 0:
            raise ConfigError("alpha must be > 0", key="topics.alpha")
        if not self.beta > 0:
            raise ConfigError("beta must be > 0", key="topics.beta")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0", key="topics.burn_in")
        if self.iterations <= self.burn_in:
            raise ConfigError("iterations must exceed burn_in", key="topics.iterations")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", key="seed")


@dataclass(frozen=True, eq=False)
class TopicModel:
    config: LdaConfig
    vocabulary: Vocabulary
    doc_ids: tuple[str, ...]
    theta: np.ndarray                  # D' x K
    phi: np.ndarray                    # K x V
    z: np.ndarray                      # topic of every token
    token_docs: np.ndarray             # document row of every token
    token_words: np.ndarray            # vocabulary column of every token
    n_wk: np.ndarray                   # D' x K assignment counts
    n_kv: np.ndarray                   # K x V assignment counts
    log_likelihood: tuple[float, ...] = ()   # at end of burn-in, at final sweep
    _doc_index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_doc_index", {d: i for i, d in enumerate(self.doc_ids)})

    @property
    def k(self) -> int:
        return self.config.k

    def doc_row(self, doc_id: str) -> int:
        try:
            return self._doc_index[doc_id]
        except KeyError:
            raise UnknownDocumentError("document %r is not in the model" % doc_id) from None


@dataclass(frozen=True)
class TopicSummary:
    topic_id: int
    top_terms: tuple[tuple[str, float], ...]
    label: str | None = None


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _expand_tokens(dtm: DocTermMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Token-level (doc row, word column) arrays, row-major, columns ascending."""
    csr = dtm.counts.tocsr()
    csr.sum_duplicates()
    csr.sort_indices()
    counts = csr.data.astype(np.int64)
    rows = np.repeat(np.arange(csr.shape[0], dtype=np.int64), np.diff(csr.indptr))
    docs = np.repeat(rows, counts)
    words = np.repeat(csr.indices.astype(np.int64), counts)
    return docs, words


def _count_matrices(
    docs: np.ndarray, words: np.ndarray, z: np.ndarray, n_docs: int, k: int, v: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_wk = np.zeros((n_docs, k), dtype=np.int64)
    n_kv = np.zeros((k, v), dtype=np.int64)
    np.add.at(n_wk, (docs, z), 1)
    np.add.at(n_kv, (z, words), 1)
    return n_wk, n_kv, n_kv.sum(axis=1)


def joint_log_likelihood(n_wk: np.ndarray, n_kv: np.ndarray, alpha: float, beta: float) -> float:
    """log p(w, z) with theta and phi integrated out."""
    k, v = n_kv.shape
    n_k = n_kv.sum(axis=1)
    n_w = n_wk.sum(axis=1)
    lw = k * (gammaln(v * beta) - v * gammaln(beta))
    lw += float(np.sum(gammaln(n_kv + beta)) - np.sum(gammaln(n_k + v * beta)))
    lz = n_wk.shape[0] * (gammaln(k * alpha) - k * gammaln(alpha))
    lz += float(np.sum(gammaln(n_wk + alpha)) - np.sum(gammaln(n_w + k * alpha)))
    return float(lw + lz)


def fit_lda(
    dtm: DocTermMatrix, config: LdaConfig, on_sweep: SweepCallback | None = None
) -> TopicModel:
    """Fit LDA to *dtm* by collapsed Gibbs sampling.

    Args:
        dtm: Document-term counts.
        config: Topic count, Dirichlet parameters, sweep counts and seed.
        on_sweep: Called after every sweep with (sweep, z, n_wk, n_kv, n_k).
            The arrays are the live sampler state and must not be modified.

    Raises:
        EmptyCorpusError: the matrix has no documents or no tokens.
    """
    n_docs, v = dtm.shape
    if n_docs == 0 or v == 0:
        raise EmptyCorpusError("cannot fit topics to an empty document-term matrix")
    k = config.k
    if v < k:
        logger.warning("Vocabulary size %d is smaller than the number of topics %d", v, k)

    row_sums = dtm.row_sums()
    empty = int(np.sum(row_sums == 0))
    if empty == n_docs:
        raise EmptyCorpusError("every document in the matrix is empty")
    if empty:
        logger.warning("Skipping %d documents with no in-vocabulary tokens", empty)

    docs, words = _expand_tokens(dtm)
    n_tokens = words.shape[0]
    rng = np.random.Generator(np.random.PCG64(config.seed))
    z = rng.integers(0, k, size=n_tokens, dtype=np.int64)
    n_wk, n_kv, n_k = _count_matrices(docs, words, z, n_docs, k, v)

    log_likelihood: list[float] = []
    for sweep in range(config.iterations):
        u = rng.random(n_tokens)
        gibbs_sweep(words, docs, z, n_wk, n_kv, n_k, config.alpha, config.beta, u)
        if on_sweep is not None:
            on_sweep(sweep, z, n_wk, n_kv, n_k)
        if sweep + 1 == config.burn_in:
            log_likelihood.append(joint_log_likelihood(n_wk, n_kv, config.alpha, config.beta))
    log_likelihood.append(joint_log_likelihood(n_wk, n_kv, config.alpha, config.beta))

    theta = (n_wk + config.alpha) / (row_sums[:, None] + k * config.alpha)
    phi = (n_kv + config.beta) / (n_k[:, None] + v * config.beta)
    logger.info(
        "Fitted %d topics to %d documents (%d tokens, %d terms); log-likelihood %.3f",
        k, n_docs, n_tokens, v, log_likelihood[-1],
    )
    return TopicModel(
        config=config,
        vocabulary=dtm.vocabulary,
        doc_ids=dtm.doc_ids,
        theta=theta,
        phi=phi,
        z=z,
        token_docs=docs,
        token_words=words,
        n_wk=n_wk,
        n_kv=n_kv,
        log_likelihood=tuple(log_likelihood),
    )


# ---------------------------------------------------------------------------
# Reading a fitted model
# ---------------------------------------------------------------------------


def top_words(model: TopicModel, topic_id: int, n: int) -> TopicSummary:
    """The *n* most probable terms of a topic; ties go to the lexicographically smaller term."""
    if not 0 <= topic_id < model.k:
        raise TopicRangeError("topic %d is outside 0..%d" % (topic_id, model.k - 1))
    if n < 1:
        raise TopicRangeError("n must be >= 1, got %d" % n)
    row = model.phi[topic_id]
    order = sorted(range(row.shape[0]), key=lambda j: (-row[j], model.vocabulary.terms[j]))
    return TopicSummary(
        topic_id=topic_id,
        top_terms=tuple((model.vocabulary.terms[j], float(row[j])) for j in order[:n]),
    )


def summarize_topics(model: TopicModel, n: int) -> list[TopicSummary]:
    return [top_words(model, k, n) for k in range(model.k)]


def doc_topics(model: TopicModel, doc_id: str) -> np.ndarray:
    """The document's topic distribution (a copy of its theta row)."""
    return model.theta[model.doc_row(doc_id)].copy()


def align_topics(phi_est: np.ndarray, phi_ref: np.ndarray) -> list[tuple[int, int, float]]:
    """Greedily pair estimated with reference topics by total-variation distance.

    Returns ``(estimated, reference, distance)`` triples, best match first.
    """
    tv = 0.5 * np.abs(phi_est[:, None, :] - phi_ref[None, :, :]).sum(axis=2)
    pairs: list[tuple[int, int, float]] = []
    free_est = set(range(phi_est.shape[0]))
    free_ref = set(range(phi_ref.shape[0]))
    while free_est and free_ref:
        i, j = min(
            ((i, j) for i in free_est for j in free_ref), key=lambda ij: (tv[ij], ij)
        )
        pairs.append((i, j, float(tv[i, j])))
        free_est.discard(i)
        free_ref.discard(j)
    return pairs


def locate_theme_passages(
    corpus: Corpus,
    topic_terms: set[str] | frozenset[str] | Sequence[str],
    window: int = 0,
    rules: NormalizationRules | None = None,
) -> list[ThemePassage]:
    """Find runs of sentences mentioning any topic term, padded by *window* sentences.

    Passages never cross document boundaries; overlapping padded runs are merged.
    """
    rules = rules or default_rules()
    terms = set(normalize(list(topic_terms), rules))
    if not terms:
        raise DataError("topic_terms must contain at least one usable term")
    if window < 0:
        raise DataError("window must be >= 0")

    passages: list[ThemePassage] = []
    seen: set[tuple[str, tuple[str, ...]]] = set()
    for doc in corpus.documents:
        hits = [terms.intersection(normalize_text(s, rules)) for s in doc.sentences]
        spans: list[list[int]] = []
        for i, matched in enumerate(hits):
            if not matched:
                continue
            lo, hi = max(0, i - window), min(len(hits) - 1, i + window)
            if spans and lo <= spans[-1][1] + 1:
                spans[-1][1] = max(spans[-1][1], hi)
            else:
                spans.append([lo, hi])
        for lo, hi in spans:
            sentences = doc.sentences[lo:hi + 1]
            key = (doc.doc_id, sentences)
            if key in seen:
                continue
            seen.add(key)
            matched_terms = sorted(set().union(*hits[lo:hi + 1]))
            passages.append(
                ThemePassage(
                    sentences=tuple(sentences),
                    source_refs=_passage_refs(doc, lo, hi),
                    doc_id=doc.doc_id,
                    matched_terms=tuple(matched_terms),
                )
            )
    return passages


def _passage_refs(doc: Document, lo: int, hi: int) -> tuple[tuple[str, int], ...]:
    """Utterance refs behind sentences lo..hi; all of the document's refs if unknown."""
    if len(doc.sentence_sources) != len(doc.sentences):
        return doc.source_refs
    return tuple(doc.source_refs[i] for i in sorted(set(doc.sentence_sources[lo:hi + 1])))


def perplexity(
    model: TopicModel, held_out: DocTermMatrix, iterations: int = 50, seed: int = 0
) -> float:
    """exp(-mean log-probability per held-out token), with theta folded in by Gibbs
    sampling against the model's frozen phi.

    Raises:
        VocabularyError: *held_out* was built over a different vocabulary.
        EmptyCorpusError: *held_out* has no tokens.
    """
    if held_out.vocabulary.digest != model.vocabulary.digest:
        raise VocabularyError("held-out matrix does not share the model vocabulary")
    if held_out.shape[0] == 0 or held_out.counts.sum() == 0:
        raise EmptyCorpusError("held-out matrix has no tokens")

    docs, words = _expand_tokens(held_out)
    k = model.k
    alpha = model.config.alpha
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.integers(0, k, size=words.shape[0], dtype=np.int64)
    n_wk = np.zeros((held_out.shape[0], k), dtype=np.int64)
    np.add.at(n_wk, (docs, z), 1)
    phi = np.ascontiguousarray(model.phi)
    for _ in range(iterations):
        fold_in_sweep(words, docs, z, n_wk, phi, alpha, rng.random(words.shape[0]))

    row_sums = held_out.row_sums()
    theta = (n_wk + alpha) / (row_sums[:, None] + k * alpha)
    token_prob = np.einsum("ik,ki->i", theta[docs], phi[:, words])
    return float(np.exp(-np.sum(np.log(token_prob)) / words.shape[0]))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def model_to_dict(model: TopicModel) -> dict:
    return {
        "config": asdict(model.config),
        "vocabulary_digest": model.vocabulary.digest,
        "terms": list(model.vocabulary.terms),
        "doc_ids": list(model.doc_ids),
        "theta": model.theta.tolist(),
        "phi": model.phi.tolist(),
        "z": model.z.tolist(),
        "token_docs": model.token_docs.tolist(),
        "token_words": model.token_words.tolist(),
        "log_likelihood": list(model.log_likelihood),
    }


def save_model(model: TopicModel, path: str | Path) -> None:
    """Write the model as JSON; floats use shortest round-trip repr, so reloads are bit-exact."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(model_to_dict(model), f, ensure_ascii=False)
        f.write("\n")


def load_model(path: str | Path) -> TopicModel:
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    vocab = Vocabulary(tuple(raw["terms"]))
    if vocab.digest != raw["vocabulary_digest"]:
        raise VocabularyError("model file %s has a corrupt vocabulary" % path)
    config = LdaConfig(**raw["config"])
    z = np.asarray(raw["z"], dtype=np.int64)
    docs = np.asarray(raw["token_docs"], dtype=np.int64)
    words = np.asarray(raw["token_words"], dtype=np.int64)
    n_wk, n_kv, _ = _count_matrices(docs, words, z, len(raw["doc_ids"]), config.k, len(vocab))
    return TopicModel(
        config=config,
        vocabulary=vocab,
        doc_ids=tuple(raw["doc_ids"]),
        theta=np.asarray(raw["theta"], dtype=np.float64).reshape(len(raw["doc_ids"]), config.k),
        phi=np.asarray(raw["phi"], dtype=np.float64).reshape(config.k, len(vocab)),
        z=z,
        token_docs=docs,
        token_words=words,
        n_wk=n_wk,
        n_kv=n_kv,
        log_likelihood=tuple(raw["log_likelihood"]),
    )
