"""Shared pytest fixtures for the discourse-mining test suite."""
from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
import pytest

from discourse_mining._types import Transcript
from discourse_mining.corpus import load_transcripts
from discourse_mining.preprocess import DocTermMatrix, NormalizationRules, Vocabulary, build_dtm, default_rules

# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

TRANSCRIPTS_DIR = Path(__file__).parent / "transcripts"
SAMPLE_DIR = Path(str(resources.files("discourse_mining").joinpath("data", "sample")))


@pytest.fixture(scope="session")
def transcripts_dir() -> Path:
    return TRANSCRIPTS_DIR


@pytest.fixture(scope="session")
def sample_dir() -> Path:
    """The two bundled sample sessions (HP-1, EV-1)."""
    return SAMPLE_DIR


@pytest.fixture(scope="session")
def sample_transcripts() -> list[Transcript]:
    return load_transcripts([SAMPLE_DIR])


@pytest.fixture(scope="session")
def rules() -> NormalizationRules:
    return default_rules()


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    """Write a pipeline config into tmp_path; keyword args become extra lines."""

    def _write(name: str = "run.cfg", input: str | None = None, **settings: object) -> Path:
        lines = [
            "input = %s" % (input if input is not None else SAMPLE_DIR),
            "output = out",
        ]
        for key, value in settings.items():
            lines.append("%s = %s" % (key.replace("__", "."), value))
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write


# ---------------------------------------------------------------------------
# Prefect
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def prefect_harness() -> Iterator[None]:
    """Temporary Prefect backend for flow runs (e2e tests only)."""
    from prefect.testing.utilities import prefect_test_harness

    with prefect_test_harness():
        yield


# ---------------------------------------------------------------------------
# Synthetic topic corpora
# ---------------------------------------------------------------------------


def make_synthetic_corpus(
    n_docs: int = 500,
    n_terms: int = 200,
    k: int = 5,
    doc_length: int = 60,
    alpha: float = 0.1,
    seed: int = 7,
) -> tuple[DocTermMatrix, np.ndarray]:
    """Documents drawn from *k* topics with disjoint, equal-sized word supports.

    Returns the document-term matrix and the true K x V topic-word matrix.
    """
    rng = np.random.default_rng(seed)
    terms = ["w%03d" % j for j in range(n_terms)]
    phi = np.zeros((k, n_terms))
    width = n_terms // k
    for t in range(k):
        phi[t, t * width:(t + 1) * width] = rng.dirichlet(np.full(width, 1.0))
    docs = []
    for _ in range(n_docs):
        theta = rng.dirichlet(np.full(k, alpha))
        topics = rng.choice(k, size=doc_length, p=theta)
        docs.append([terms[rng.choice(n_terms, p=phi[t])] for t in topics])
    vocab = Vocabulary(tuple(terms))
    return build_dtm(docs, vocab), phi
