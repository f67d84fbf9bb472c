"""Text classification on topic distributions.

Documents and topics are embedded as mean word vectors, a document's topic
distribution is its clamped and normalized cosine similarity to each topic,
and a one-vs-rest linear SVM is trained on a stratified 80/20 split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from topicrefine.corpus import Corpus, Document
from topicrefine.embeddings import EmbeddingStore, topic_centroid
from topicrefine.errors import FormatError, TopicRefineError, UnembeddableError, ZeroVectorError
from topicrefine.topics import TopicSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassificationOutcome:
    accuracy: float
    f1: float  # macro-averaged
    split_seed: int
    train_fraction: float
    n_train: int
    n_test: int
    f1_average: str = "macro"

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "f1_average": self.f1_average,
            "split_seed": self.split_seed,
            "train_fraction": self.train_fraction,
            "n_train": self.n_train,
            "n_test": self.n_test,
        }


def topic_distribution(doc_embedding, topic_embeddings) -> np.ndarray:
    """Cosine similarity to each topic, negatives clamped to 0, L1-normalized.

    Falls back to the uniform distribution when no similarity is positive.
    """
    doc = np.asarray(doc_embedding, dtype=np.float64)
    topics = np.asarray(topic_embeddings, dtype=np.float64)
    dn = np.linalg.norm(doc)
    if dn == 0.0:
        raise ZeroVectorError("zero document embedding")
    tn = np.linalg.norm(topics, axis=1)
    if np.any(tn == 0.0):
        raise ZeroVectorError("zero topic embedding")
    sims = np.clip(topics @ doc / (tn * dn), 0.0, None)
    total = sims.sum()
    if total == 0.0:
        return np.full(len(topics), 1.0 / len(topics))
    return sims / total


def embed_document(doc: Document | Sequence[str], store: EmbeddingStore) -> np.ndarray:
    tokens = doc.tokens if isinstance(doc, Document) else doc
    vecs = [store[t] for t in tokens if t in store]
    if not vecs:
        raise UnembeddableError("unembeddable document: no token has a vector")
    return np.mean(vecs, axis=0)


def embed_topic(words: Sequence[str], store: EmbeddingStore) -> np.ndarray:
    return topic_centroid(words, store).vector


class LinearSVM:
    """One-vs-rest linear SVM trained by full-batch Pegasos subgradient steps.

    Minimizes ``lam/2 |w|^2 + mean(hinge)`` per class with ``lam = 1/(C n)``
    and step ``1/(lam t)``, projecting onto the ball of radius ``1/sqrt(lam)``.
    A constant feature stands in for the bias. The procedure uses no
    randomness, so identical data gives bit-identical weights.
    """

    def __init__(self, C: float = 1.0, epochs: int = 200):
        self.C = C
        self.epochs = epochs
        self.classes_: list = []
        self.coef_: np.ndarray | None = None

    @staticmethod
    def _augment(X: np.ndarray) -> np.ndarray:
        return np.hstack([X, np.ones((X.shape[0], 1))])

    def fit(self, X, y) -> "LinearSVM":
        X = self._augment(np.asarray(X, dtype=np.float64))
        y = list(y)
        self.classes_ = sorted(set(y))
        n, d = X.shape
        lam = 1.0 / (self.C * n)
        radius = 1.0 / np.sqrt(lam)
        # Y[c, i] = +1 if sample i has class c else -1
        Y = np.array([[1.0 if yi == c else -1.0 for yi in y] for c in self.classes_])
        W = np.zeros((len(self.classes_), d))
        for t in range(1, self.epochs + 1):
            margins = Y * (W @ X.T)
            active = (margins < 1.0) * Y
            eta = 1.0 / (lam * t)
            W = (1.0 - eta * lam) * W + (eta / n) * (active @ X)
            norms = np.linalg.norm(W, axis=1, keepdims=True)
            W = W * np.minimum(1.0, radius / np.maximum(norms, 1e-300))
        self.coef_ = W
        return self

    def decision_function(self, X) -> np.ndarray:
        return self._augment(np.asarray(X, dtype=np.float64)) @ self.coef_.T

    def predict(self, X) -> list:
        scores = self.decision_function(X)
        return [self.classes_[i] for i in np.argmax(scores, axis=1)]


def stratified_split(labels: Sequence, seed: int, train_fraction: float = 0.8
                     ) -> tuple[list[int], list[int]]:
    """Per-label shuffle; each label keeps at least one example on each side."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    by_label: dict = {}
    for i, lab in enumerate(labels):
        by_label.setdefault(lab, []).append(i)
    train, test = [], []
    for lab in sorted(by_label, key=str):
        idx = by_label[lab]
        if len(idx) < 2:
            raise TopicRefineError(f"label {lab!r} has fewer than 2 documents")
        perm = [idx[i] for i in rng.permutation(len(idx))]
        n_test = min(len(idx) - 1, max(1, round(len(idx) * (1.0 - train_fraction))))
        test.extend(perm[:n_test])
        train.extend(perm[n_test:])
    return sorted(train), sorted(test)


def accuracy_score(y_true: Sequence, y_pred: Sequence) -> float:
    return sum(a == b for a, b in zip(y_true, y_pred)) / len(y_true)


def macro_f1(y_true: Sequence, y_pred: Sequence) -> float:
    """Unweighted mean of per-class F1 over labels seen in either sequence."""
    labels = sorted(set(y_true) | set(y_pred), key=str)
    scores = []
    for c in labels:
        tp = sum(t == c and p == c for t, p in zip(y_true, y_pred))
        fp = sum(t != c and p == c for t, p in zip(y_true, y_pred))
        fn = sum(t == c and p != c for t, p in zip(y_true, y_pred))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return sum(scores) / len(scores)


def evaluate_features(features, labels: Sequence, split_seed: int = 42,
                      train_fraction: float = 0.8, C: float = 1.0, epochs: int = 200
                      ) -> ClassificationOutcome:
    features = np.asarray(features, dtype=np.float64)
    labels = list(labels)
    if len(set(labels)) < 2:
        raise TopicRefineError("classification needs at least two labels")
    train, test = stratified_split(labels, split_seed, train_fraction)
    if not train or not test:
        raise TopicRefineError("degenerate train/test split")
    ytr = [labels[i] for i in train]
    if len(set(ytr)) < 2:
        raise TopicRefineError("training fold holds a single label")
    model = LinearSVM(C=C, epochs=epochs).fit(features[train], ytr)
    y_true = [labels[i] for i in test]
    y_pred = model.predict(features[test])
    return ClassificationOutcome(accuracy_score(y_true, y_pred), macro_f1(y_true, y_pred),
                                 split_seed, train_fraction, len(train), len(test))


def document_features(corpus: Corpus, topics: TopicSet, store: EmbeddingStore,
                      doc_embeddings: np.ndarray | None = None,
                      topic_embeddings: np.ndarray | None = None
                      ) -> tuple[np.ndarray, list[int]]:
    """Topic distributions for every embeddable document, plus their positions.

    ``doc_embeddings`` replaces the mean-of-word-vectors encoder; row ``r``
    belongs to the document whose id is ``r`` (its line in the raw corpus
    file). Vectors from another encoder need matching ``topic_embeddings``
    (one row per topic) in the same space.
    """
    if topic_embeddings is not None:
        topic_vecs = np.asarray(topic_embeddings, dtype=np.float64)
        if topic_vecs.shape[0] != topics.K:
            raise TopicRefineError(f"{topic_vecs.shape[0]} topic embeddings for {topics.K} topics")
    else:
        topic_vecs = np.array([embed_topic(t, store) for t in topics])
    rows, kept = [], []
    for i, doc in enumerate(corpus.documents):
        try:
            if doc_embeddings is not None:
                emb = doc_embeddings[int(doc.id)]
            else:
                emb = embed_document(doc, store)
            rows.append(topic_distribution(emb, topic_vecs))
        except (UnembeddableError, ZeroVectorError) as exc:
            logger.warning("document %s excluded: %s", doc.id, exc)
            continue
        kept.append(i)
    return np.array(rows).reshape(len(rows), topics.K), kept


def run_classification(corpus: Corpus, topics: TopicSet, store: EmbeddingStore,
                       split_seed: int = 42, train_fraction: float = 0.8,
                       doc_embeddings: np.ndarray | None = None,
                       topic_embeddings: np.ndarray | None = None) -> ClassificationOutcome:
    feats, kept = document_features(corpus, topics, store, doc_embeddings, topic_embeddings)
    labels = [corpus.documents[i].label for i in kept]
    if any(lab is None for lab in labels):
        raise TopicRefineError("every document needs a label for classification")
    return evaluate_features(feats, labels, split_seed, train_fraction)


def load_vector_rows(path) -> np.ndarray:
    """Whitespace-separated floats, one row per line."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            try:
                rows.append([float(v) for v in line.split()])
            except ValueError:
                raise FormatError("non-numeric value", line=lineno, path=str(path)) from None
            if rows[-1] and len(rows[-1]) != len(rows[0]):
                raise FormatError("inconsistent row width", line=lineno, path=str(path))
    return np.array(rows, dtype=np.float64)
