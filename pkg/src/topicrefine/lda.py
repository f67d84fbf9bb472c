"""Collapsed Gibbs sampling for LDA, used to produce base topics offline.

Sampling is sequential over tokens with :class:`random.Random`, so a fixed
seed gives the same assignments on every platform.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from topicrefine.corpus import Corpus, Vocabulary
from topicrefine.errors import ConfigError, CorpusDegenerateError
from topicrefine.topics import TopicSet

logger = logging.getLogger(__name__)


@dataclass
class LdaState:
    K: int
    alpha: float
    beta: float
    vocabulary: Vocabulary
    assignments: list[list[int]]
    n_dk: np.ndarray
    n_kw: np.ndarray
    n_k: np.ndarray
    rng_seed: int
    iterations: int
    log_likelihood: list[tuple[int, float]] = field(default_factory=list)

    def check_invariants(self, doc_lengths: list[int]) -> None:
        assert np.array_equal(self.n_dk.sum(axis=1), np.asarray(doc_lengths)), "n_dk rows != doc lengths"
        assert np.array_equal(self.n_kw.sum(axis=1), self.n_k), "n_kw rows != n_k"
        assert (self.n_dk >= 0).all() and (self.n_kw >= 0).all() and (self.n_k >= 0).all()

    def phi(self) -> np.ndarray:
        V = self.n_kw.shape[1]
        return (self.n_kw + self.beta) / (self.n_k[:, None] + self.beta * V)


def default_alpha(K: int) -> float:
    return 50.0 / K


def conditional_distribution(n_dk_row, n_kw_col, n_k, alpha: float, beta: float, V: int) -> np.ndarray:
    """Normalized full conditional p(z = k | rest) for one token, counts already decremented."""
    w = (np.asarray(n_kw_col, float) + beta) / (np.asarray(n_k, float) + V * beta) \
        * (np.asarray(n_dk_row, float) + alpha)
    return w / w.sum()


def log_likelihood(n_kw: np.ndarray, n_k: np.ndarray, beta: float) -> float:
    """log p(w | z) with phi integrated out."""
    K, V = n_kw.shape
    return float(K * (gammaln(V * beta) - V * gammaln(beta))
                 + gammaln(n_kw + beta).sum() - gammaln(n_k + V * beta).sum())


def fit_gibbs_lda(corpus: Corpus, K: int, alpha: float | None = None, beta: float = 0.01,
                  iterations: int = 1000, seed: int = 42, check_invariants: bool = False,
                  log_every: int = 10) -> LdaState:
    """Fit LDA by collapsed Gibbs sampling; the final sweep's state is returned."""
    vocab = corpus.vocabulary
    V = len(vocab)
    if K < 1:
        raise ConfigError("K must be >= 1")
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")
    if K > V:
        raise ConfigError(f"K={K} exceeds vocabulary size {V}")
    if not corpus.documents:
        raise CorpusDegenerateError("corpus degenerate: no documents")
    if alpha is None:
        alpha = default_alpha(K)
    if alpha <= 0 or beta <= 0:
        raise ConfigError("alpha and beta must be positive")

    docs = [[vocab.index[t] for t in d.tokens] for d in corpus.documents]
    rng = random.Random(seed)
    # Plain lists in the hot loop: far cheaper than numpy indexing per token.
    n_dk = [[0] * K for _ in docs]
    n_kw = [[0] * V for _ in range(K)]
    n_k = [0] * K
    z = []
    for d, doc in enumerate(docs):
        zd = []
        for w in doc:
            k = rng.randrange(K)
            zd.append(k)
            n_dk[d][k] += 1
            n_kw[k][w] += 1
            n_k[k] += 1
        z.append(zd)

    vbeta = V * beta
    topics = range(K)
    trace: list[tuple[int, float]] = []
    lengths = [len(doc) for doc in docs]
    for it in range(1, iterations + 1):
        for d, doc in enumerate(docs):
            ndk = n_dk[d]
            zd = z[d]
            for i, w in enumerate(doc):
                k = zd[i]
                ndk[k] -= 1
                n_kw[k][w] -= 1
                n_k[k] -= 1
                weights = [(n_kw[t][w] + beta) / (n_k[t] + vbeta) * (ndk[t] + alpha) for t in topics]
                u = rng.random() * sum(weights)
                acc = 0.0
                k = K - 1
                for t in topics:
                    acc += weights[t]
                    if u < acc:
                        k = t
                        break
                zd[i] = k
                ndk[k] += 1
                n_kw[k][w] += 1
                n_k[k] += 1
        if check_invariants:
            _snapshot(K, alpha, beta, vocab, z, n_dk, n_kw, n_k, seed, it).check_invariants(lengths)
        if log_every and (it % log_every == 0 or it == iterations):
            ll = log_likelihood(np.array(n_kw, float), np.array(n_k, float), beta)
            trace.append((it, ll))
            logger.debug("sweep %d log-likelihood %.4f", it, ll)

    state = _snapshot(K, alpha, beta, vocab, z, n_dk, n_kw, n_k, seed, iterations)
    state.log_likelihood = trace
    return state


def _snapshot(K, alpha, beta, vocab, z, n_dk, n_kw, n_k, seed, iterations) -> LdaState:
    return LdaState(
        K=K, alpha=alpha, beta=beta, vocabulary=vocab,
        assignments=[list(zd) for zd in z],
        n_dk=np.array(n_dk, dtype=np.int64).reshape(len(n_dk), K),
        n_kw=np.array(n_kw, dtype=np.int64),
        n_k=np.array(n_k, dtype=np.int64),
        rng_seed=seed, iterations=iterations,
    )


def top_words(state: LdaState, N: int = 10) -> TopicSet:
    """Top-N words per topic by smoothed probability; ties go to the lower vocabulary index."""
    V = len(state.vocabulary)
    if not 1 <= N <= V:
        raise ConfigError(f"N={N} must be between 1 and vocabulary size {V}")
    phi = state.phi()
    topics = []
    for k in range(state.K):
        # Stable sort on -phi keeps vocabulary order among equal probabilities.
        order = np.argsort(-phi[k], kind="stable")[:N]
        topics.append([state.vocabulary.words[i] for i in order])
    return TopicSet.from_lists(topics, provenance=f"lda K={state.K} seed={state.rng_seed}")
