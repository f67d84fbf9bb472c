"""Synthetic corpora and embeddings with planted structure, for tests and demos."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from topicrefine._io import atomic_write_text
from topicrefine.embeddings import EmbeddingStore

THEMES = {
    "finance": "money bank loan credit stock budget investment fund wealth profit market tax",
    "sports": "game team player coach match score league season goal win ball stadium",
    "health": "doctor medicine illness hospital patient nurse treatment infection health virus drug therapy",
    "theater": "actor drama stage play director performance theater audience review script comedy scene",
}
NOISE_WORDS = "lcd georgia android editorial math pollution dragon legacy".split()


def planted_two_topic_corpus(n_docs: int = 200, half_size: int = 10, doc_len: int = 8,
                             seed: int = 7) -> tuple[list[list[str]], list[str], list[str]]:
    """Documents drawn from one of two disjoint word sets.

    Returns ``(docs, half_a, half_b)``; each document is ``doc_len`` tokens
    sampled uniformly from a single half.
    """
    rng = np.random.default_rng(seed)
    half_a = [f"alpha{i:02d}" for i in range(half_size)]
    half_b = [f"beta{i:02d}" for i in range(half_size)]
    docs = []
    for d in range(n_docs):
        half = half_a if d % 2 == 0 else half_b
        docs.append([half[i] for i in rng.integers(0, half_size, size=doc_len)])
    return docs, half_a, half_b


def clustered_store(clusters: dict[str, list[str]], dim: int = 50, spread: float = 0.6,
                    extra_words: list[str] = (), seed: int = 0) -> EmbeddingStore:
    """Vectors scattered around one random center per cluster.

    ``extra_words`` get independent random vectors (no cluster).
    """
    rng = np.random.default_rng(seed)
    words, rows = [], []
    for name in clusters:
        center = rng.normal(size=dim)
        for w in clusters[name]:
            words.append(w)
            rows.append(center + spread * rng.normal(size=dim))
    for w in extra_words:
        words.append(w)
        rows.append(rng.normal(size=dim))
    return EmbeddingStore(words, np.array(rows))


def themed_corpus(n_docs: int = 200, noise_rate: float = 0.15, seed: int = 42
                  ) -> tuple[list[str], list[str]]:
    """Labeled short documents: theme words plus occasional noise words."""
    rng = np.random.default_rng(seed)
    names = list(THEMES)
    lines, labels = [], []
    for d in range(n_docs):
        label = names[d % len(names)]
        vocab = THEMES[label].split()
        length = int(rng.integers(6, 10))
        toks = []
        for _ in range(length):
            if rng.random() < noise_rate:
                toks.append(NOISE_WORDS[int(rng.integers(len(NOISE_WORDS)))])
            else:
                toks.append(vocab[int(rng.integers(len(vocab)))])
        lines.append(" ".join(toks))
        labels.append(label)
    return lines, labels


def format_embeddings(store: EmbeddingStore, digits: int = 6) -> str:
    return "".join(
        w + " " + " ".join(f"{v:.{digits}f}" for v in store[w]) + "\n" for w in store.words)


def write_fixture(out_dir: str | Path, n_docs: int = 200, dim: int = 50, seed: int = 42) -> dict:
    """Write ``corpus.txt``, ``labels.txt`` and ``embeddings.txt`` for a pipeline demo."""
    out = Path(out_dir)
    lines, labels = themed_corpus(n_docs, seed=seed)
    store = clustered_store({k: v.split() for k, v in THEMES.items()}, dim=dim,
                            extra_words=NOISE_WORDS, seed=seed)
    paths = {"corpus": out / "corpus.txt", "labels": out / "labels.txt",
             "embeddings": out / "embeddings.txt"}
    atomic_write_text(paths["corpus"], "\n".join(lines) + "\n")
    atomic_write_text(paths["labels"], "\n".join(labels) + "\n")
    atomic_write_text(paths["embeddings"], format_embeddings(store))
    return {k: str(v) for k, v in paths.items()}
