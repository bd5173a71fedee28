"""Text to numbers: n-gram tokenization, TF-IDF weighting, truncated SVD.

The TF-IDF variant is pinned: smoothed idf ln((1+N)/(1+df)) + 1 over raw
term counts, rows L2-normalized. Tokens are lowercased alphanumeric runs of
length >= 2; bigrams join adjacent tokens with one space. SVD keeps the
top-k right singular vectors with a fixed sign convention so fitted
transforms are byte-reproducible.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, SentitradeError

# Alphanumeric runs (unicode letters/digits, underscore excluded).
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

NgramRange = tuple[int, int]

UNIGRAMS: NgramRange = (1, 1)
UNIGRAMS_AND_BIGRAMS: NgramRange = (1, 2)

# FeatureMatrix: a dense (n_rows, n_cols) float64 array. All feature and
# model code in this package trades in this shape.
FeatureMatrix = np.ndarray


class EmptyCorpus(SentitradeError):
    """fit_tfidf needs at least one document."""


class NoTokens(SentitradeError):
    """No document produced a single token."""


def tokenize(text: str, ngram_range: NgramRange = UNIGRAMS) -> list[str]:
    """Lowercased alphanumeric runs of length >= 2, in order of appearance;
    with range (1, 2), adjacent pairs joined by one space are appended."""
    if ngram_range not in (UNIGRAMS, UNIGRAMS_AND_BIGRAMS):
        raise ValueError(f"unsupported ngram_range {ngram_range!r}")
    words = [t for t in _TOKEN.findall(text.lower()) if len(t) >= 2]
    if ngram_range == UNIGRAMS:
        return words
    return words + [f"{a} {b}" for a, b in zip(words, words[1:])]


@dataclass(frozen=True)
class Vocabulary:
    ngram_range: NgramRange
    token_index: dict[str, int]  # token -> column, 0..V-1 without gaps
    document_frequency: dict[str, int]
    n_documents: int

    @property
    def size(self) -> int:
        return len(self.token_index)

    def tokens_in_column_order(self) -> list[str]:
        return sorted(self.token_index, key=self.token_index.__getitem__)


@dataclass(frozen=True)
class TfidfTransform:
    vocabulary: Vocabulary
    idf: np.ndarray  # (V,), idf[t] = ln((1+N)/(1+df)) + 1, always >= 1


def fit_tfidf(docs: list[str], ngram_range: NgramRange = UNIGRAMS_AND_BIGRAMS) -> TfidfTransform:
    """Build the vocabulary (lexicographic column order) and idf weights."""
    if not docs:
        raise EmptyCorpus("fit_tfidf needs at least one document")
    df: dict[str, int] = {}
    for doc in docs:
        for token in set(tokenize(doc, ngram_range)):
            df[token] = df.get(token, 0) + 1
    if not df:
        raise NoTokens("no document produced any token of length >= 2")
    token_index = {token: col for col, token in enumerate(sorted(df))}
    n = len(docs)
    idf = np.empty(len(token_index))
    for token, col in token_index.items():
        idf[col] = math.log((1.0 + n) / (1.0 + df[token])) + 1.0
    vocab = Vocabulary(
        ngram_range=ngram_range,
        token_index=token_index,
        document_frequency=df,
        n_documents=n,
    )
    return TfidfTransform(vocabulary=vocab, idf=idf)


def apply_tfidf(transform: TfidfTransform, docs: list[str]) -> FeatureMatrix:
    """Raw term counts times idf, each nonzero row L2-normalized.

    Tokens outside the fitted vocabulary are ignored; a document with no
    known tokens becomes a zero row.
    """
    vocab = transform.vocabulary
    X = np.zeros((len(docs), vocab.size))
    index = vocab.token_index
    for i, doc in enumerate(docs):
        for token in tokenize(doc, vocab.ngram_range):
            col = index.get(token)
            if col is not None:
                X[i, col] += 1.0
    X *= transform.idf
    norms = np.linalg.norm(X, axis=1)
    nonzero = norms > 0
    X[nonzero] /= norms[nonzero, None]
    return X


@dataclass(frozen=True)
class SvdTransform:
    components: np.ndarray  # (input_dim, output_dim), orthonormal columns
    singular_values: np.ndarray  # (output_dim,), nonincreasing, nonnegative
    input_dim: int
    output_dim: int

    def __post_init__(self) -> None:
        d, k = self.components.shape
        if (d, k) != (self.input_dim, self.output_dim):
            raise ValueError("components shape disagrees with declared dims")
        gram = self.components.T @ self.components
        if not np.allclose(gram, np.eye(k), atol=1e-8):
            raise ValueError("components columns are not orthonormal")
        s = self.singular_values
        if s.shape != (k,) or np.any(s < 0) or np.any(np.diff(s) > 1e-12):
            raise ValueError("singular values must be nonnegative and nonincreasing")


def _fix_signs(components: np.ndarray) -> np.ndarray:
    # Deterministic orientation: the largest-magnitude entry of each column
    # is made nonnegative (first such entry on ties).
    flipped = components.copy()
    for j in range(flipped.shape[1]):
        pivot = int(np.argmax(np.abs(flipped[:, j])))
        if flipped[pivot, j] < 0:
            flipped[:, j] = -flipped[:, j]
    return flipped


def fit_svd(X: FeatureMatrix, k: int = 100) -> SvdTransform:
    """Top-k right singular vectors of X; k is silently capped at
    min(k, n_rows, n_cols)."""
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        raise ValueError("fit_svd needs a nonempty matrix")
    if k < 1:
        raise ValueError("k must be positive")
    n, d = X.shape
    k_eff = min(k, n, d)
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    components = _fix_signs(vt[:k_eff].T)
    return SvdTransform(
        components=components,
        singular_values=s[:k_eff].copy(),
        input_dim=d,
        output_dim=k_eff,
    )


def apply_svd(transform: SvdTransform, X: FeatureMatrix) -> FeatureMatrix:
    """Project rows of X onto the kept components."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != transform.input_dim:
        raise DimensionMismatch(
            f"expected {transform.input_dim} columns, got {X.shape[1] if X.ndim == 2 else X.shape}"
        )
    return X @ transform.components
