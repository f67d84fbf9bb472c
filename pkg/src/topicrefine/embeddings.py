"""Static word vectors: loading, cosine similarity, centroids, fallback search."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from topicrefine.corpus import Vocabulary
from topicrefine.errors import (
    DimensionError,
    FallbackImpossibleError,
    FormatError,
    UnembeddableError,
    ZeroVectorError,
)

logger = logging.getLogger(__name__)

# Scores within this band of the best are ties; the lowest vocabulary index wins.
TIE_TOLERANCE = 1e-12


class EmbeddingStore:
    """Immutable word -> vector map with a fixed dimension."""

    def __init__(self, words: Iterable[str], matrix: np.ndarray):
        self.words: tuple[str, ...] = tuple(words)
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(self.words) or matrix.shape[1] < 1:
            raise DimensionError(f"matrix shape {matrix.shape} does not match {len(self.words)} words")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.dim = int(matrix.shape[1])
        self.index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def from_dict(cls, vectors: Mapping[str, Iterable[float]]) -> "EmbeddingStore":
        words = list(vectors)
        return cls(words, np.array([list(vectors[w]) for w in words], dtype=np.float64))

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return word in self.index

    def get(self, word: str) -> np.ndarray | None:
        i = self.index.get(word)
        return None if i is None else self.matrix[i]

    def __getitem__(self, word: str) -> np.ndarray:
        return self.matrix[self.index[word]]

    def scaled(self, factor: float) -> "EmbeddingStore":
        return EmbeddingStore(self.words, self.matrix * factor)


def load_embeddings(path: str | Path, restrict_to: Vocabulary | Iterable[str] | None = None
                    ) -> EmbeddingStore:
    """Read a GloVe-style text file (``word v1 ... vD`` per line).

    The dimension is fixed by the first data line; any later line with a
    different width is a :class:`DimensionError`. Blank lines are skipped and
    the first occurrence of a repeated word wins.
    """
    keep = None if restrict_to is None else set(restrict_to)
    words: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    dim = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise DimensionError("line has no vector values", line=lineno, path=str(path))
            elif len(values) != dim:
                raise DimensionError(f"expected {dim} values, found {len(values)}",
                                     line=lineno, path=str(path))
            if word in seen or (keep is not None and word not in keep):
                continue
            try:
                vec = [float(v) for v in values]
            except ValueError as exc:
                raise FormatError(f"non-numeric vector value ({exc})", line=lineno, path=str(path)) from None
            seen.add(word)
            words.append(word)
            rows.append(vec)
    if not words:
        raise FormatError("no usable embedding lines", path=str(path))
    logger.info("loaded %d vectors of dim %d from %s", len(words), dim, path)
    return EmbeddingStore(words, np.array(rows, dtype=np.float64))


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"vector lengths differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroVectorError("zero vector")
    return m / norms


@dataclass(frozen=True)
class TopicCentroid:
    topic_index: int
    vector: np.ndarray
    covered: int


def topic_centroid(words: Iterable[str], store: EmbeddingStore, topic_index: int = 0) -> TopicCentroid:
    """Mean vector of the words that have embeddings; missing words are skipped."""
    vecs = [store[w] for w in words if w in store]
    if not vecs:
        raise UnembeddableError(f"topic {topic_index}: no word has a vector")
    return TopicCentroid(topic_index, np.mean(vecs, axis=0), len(vecs))


def mean_similarities(words: list[str], targets: list[str], store: EmbeddingStore) -> np.ndarray:
    """Mean cosine of each word in ``words`` to the embedded words in ``targets``.

    Every entry of ``words`` must have a vector; targets without one are ignored.
    """
    tv = [store[t] for t in targets if t in store]
    if not tv:
        raise FallbackImpossibleError("no target word has a vector")
    cand = _unit_rows(np.array(tv))
    rows = _unit_rows(np.array([store[w] for w in words]).reshape(len(words), store.dim))
    return np.clip(rows @ cand.T, -1.0, 1.0).mean(axis=1)


def argmax_first(scores: np.ndarray) -> int:
    """Index of the best score, preferring the earliest among near-ties."""
    best = scores.max()
    return int(np.flatnonzero(scores >= best - TIE_TOLERANCE)[0])


def top_k_by_score(scores: np.ndarray, k: int) -> list[int]:
    """Indices of the ``k`` best scores, descending; near-ties keep input order."""
    s = np.asarray(scores, dtype=np.float64).copy()
    order: list[int] = []
    for _ in range(min(k, len(s))):
        i = argmax_first(s)
        order.append(i)
        s[i] = -np.inf
    return order


def nearest_in_vocab_by_avg_similarity(candidates: Iterable[str], vocabulary: Vocabulary,
                                       exclude: Iterable[str], store: EmbeddingStore) -> str:
    """Vocabulary word with the highest mean cosine to the candidate words.

    Candidates lacking vectors are ignored. The search covers every
    vocabulary word that has a vector and is not in ``exclude``.

    Raises:
        FallbackImpossibleError: no candidate has a vector, or nothing is searchable.
    """
    candidates = list(candidates)
    if not any(c in store for c in candidates):
        raise FallbackImpossibleError(f"fallback impossible: none of {candidates[:10]} has a vector")
    exclude = set(exclude)
    searchable = [w for w in vocabulary.words if w in store and w not in exclude]
    if not searchable:
        raise FallbackImpossibleError("fallback impossible: no searchable vocabulary word")
    scores = mean_similarities(searchable, candidates, store)
    return searchable[argmax_first(scores)]
