"""Topic quality: NPMI / UCI coherence over boolean sliding windows, and the
embedding-based granularity scores (within-topic similarity S, between-topic
distance D)."""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from topicrefine.corpus import Corpus
from topicrefine.embeddings import EmbeddingStore, topic_centroid
from topicrefine.errors import (
    CorpusDegenerateError,
    TopicRefineError,
    TopicUnscoreableError,
    UnembeddableError,
    UnseenWordError,
)
from topicrefine.topics import TopicSet

logger = logging.getLogger(__name__)

EPSILON = 1e-12
DEFAULT_WINDOW = 10
METRICS = ("NPMI", "UCI", "S", "D")
EXTERNAL_METRICS = ("C_A", "C_P", "C_V")


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class CooccurrenceStats:
    window: int
    total_windows: int = 0
    word_windows: Counter = field(default_factory=Counter)
    pair_windows: Counter = field(default_factory=Counter)
    epsilon: float = EPSILON

    def count(self, word: str) -> int:
        return self.word_windows.get(word, 0)

    def pair_count(self, a: str, b: str) -> int:
        if a == b:
            return self.count(a)
        return self.pair_windows.get(_pair(a, b), 0)

    def merge(self, other: "CooccurrenceStats") -> "CooccurrenceStats":
        if other.window != self.window:
            raise ValueError("cannot merge counts from different window sizes")
        return CooccurrenceStats(
            self.window,
            self.total_windows + other.total_windows,
            self.word_windows + other.word_windows,
            self.pair_windows + other.pair_windows,
            self.epsilon,
        )


def _add_window(stats: CooccurrenceStats, present: Iterable[str]) -> None:
    words = sorted(present)
    stats.total_windows += 1
    stats.word_windows.update(words)
    stats.pair_windows.update(itertools.combinations(words, 2))


def build_cooccurrence(reference: Corpus | Iterable[Sequence[str]], window: int = DEFAULT_WINDOW,
                       target_words: Iterable[str] | None = None,
                       epsilon: float = EPSILON) -> CooccurrenceStats:
    """Count boolean co-occurrence over virtual windows.

    Each document contributes its stride-1 windows of ``window`` tokens; a
    document no longer than the window is one window, and ``window=0`` makes
    every document a single window. A word or pair counts at most once per
    window. Only ``target_words`` are counted (all words when ``None``), but
    every window contributes to ``total_windows``. Empty documents are skipped.
    """
    if window < 0:
        raise ValueError("window must be >= 0")
    docs = reference.token_lists() if isinstance(reference, Corpus) else reference
    targets = None if target_words is None else set(target_words)
    if targets is not None and not targets:
        raise ValueError("target_words must not be empty")
    stats = CooccurrenceStats(window, epsilon=epsilon)

    for tokens in docs:
        if not tokens:
            continue
        if window == 0 or len(tokens) <= window:
            _add_window(stats, {t for t in tokens if targets is None or t in targets})
            continue
        # Slide the window, tracking which targets are currently inside it.
        inside: Counter = Counter()
        for t in tokens[:window]:
            if targets is None or t in targets:
                inside[t] += 1
        _add_window(stats, inside)
        for end in range(window, len(tokens)):
            out_tok, in_tok = tokens[end - window], tokens[end]
            if targets is None or out_tok in targets:
                inside[out_tok] -= 1
                if not inside[out_tok]:
                    del inside[out_tok]
            if targets is None or in_tok in targets:
                inside[in_tok] += 1
            _add_window(stats, inside)

    if stats.total_windows == 0:
        raise CorpusDegenerateError("reference corpus is empty")
    return stats


def _probabilities(a: str, b: str, stats: CooccurrenceStats) -> tuple[float, float, float, int]:
    ca, cb = stats.count(a), stats.count(b)
    for w, c in ((a, ca), (b, cb)):
        if c == 0:
            raise UnseenWordError(f"unseen in reference: {w!r}")
    n = stats.total_windows
    cab = stats.pair_count(a, b)
    return ca / n, cb / n, cab / n, cab


def pmi_pair(a: str, b: str, stats: CooccurrenceStats) -> float:
    """log((P(a,b) + eps) / (P(a) P(b)))."""
    pa, pb, pab, _ = _probabilities(a, b, stats)
    return math.log((pab + stats.epsilon) / (pa * pb))


def npmi_pair(a: str, b: str, stats: CooccurrenceStats) -> float:
    """PMI normalized by -log(P(a,b) + eps); -1 for pairs that never co-occur.

    When both words fill every window (P(a,b) = 1) the normalizer vanishes
    and the perfect-association value 1 is returned. Smoothing can push the
    ratio a hair above 1, so the result is clipped to [-1, 1].
    """
    pa, pb, pab, cab = _probabilities(a, b, stats)
    if cab == 0:
        return -1.0
    if cab == stats.total_windows:
        return 1.0
    joint = pab + stats.epsilon
    value = math.log(joint / (pa * pb)) / -math.log(joint)
    return max(-1.0, min(1.0, value))


def scoreable_words(topic: Sequence[str], stats: CooccurrenceStats) -> list[str]:
    return [w for w in topic if stats.count(w) > 0]


def _topic_mean(topic: Sequence[str], stats: CooccurrenceStats, fn) -> float:
    words = scoreable_words(topic, stats)
    if len(words) < 2:
        raise TopicUnscoreableError(f"topic unscoreable: fewer than 2 of {list(topic)} seen in reference")
    values = [fn(a, b, stats) for a, b in itertools.combinations(words, 2)]
    return math.fsum(values) / len(values)


def topic_npmi(topic: Sequence[str], stats: CooccurrenceStats) -> float:
    """Mean NPMI over all unordered pairs of topic words found in the reference."""
    return _topic_mean(topic, stats, npmi_pair)


def topic_uci(topic: Sequence[str], stats: CooccurrenceStats) -> float:
    """Mean PMI over all unordered pairs of topic words found in the reference."""
    return _topic_mean(topic, stats, pmi_pair)


def per_word_npmi_matrix(topics: TopicSet, stats: CooccurrenceStats) -> np.ndarray:
    """K x N matrix; cell (i, j) is the mean NPMI of word j against the rest of topic i.

    Words unseen in the reference (and every cell of an unscoreable topic) are NaN.
    """
    out = np.full((topics.K, topics.N), np.nan)
    for i, topic in enumerate(topics):
        words = set(scoreable_words(topic, stats))
        if len(words) < 2:
            continue
        for j, w in enumerate(topic):
            if w not in words:
                continue
            vals = [npmi_pair(w, o, stats) for o in topic if o != w and o in words]
            out[i, j] = math.fsum(vals) / len(vals)
    return out


def topic_similarity(words: Sequence[str], store: EmbeddingStore) -> float:
    """Mean pairwise cosine among the embedded words of one topic."""
    vecs = [store[w] for w in words if w in store]
    if len(vecs) < 2:
        raise UnembeddableError(f"fewer than 2 embedded words in {list(words)}")
    m = np.array(vecs)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0):
        raise UnembeddableError("zero vector in topic")
    unit = m / norms[:, None]
    sims = unit @ unit.T
    iu = np.triu_indices(len(vecs), k=1)
    return float(np.clip(sims[iu], -1.0, 1.0).mean())


def within_topic_similarity(topics: TopicSet, store: EmbeddingStore) -> float:
    """Within-topic similarity S: average over topics of the mean pairwise cosine.

    With full vector coverage this is the plain mean over all K*N*(N-1)/2
    pairs. Topics with fewer than two embedded words are skipped with a warning.
    """
    values = []
    for i, topic in enumerate(topics):
        try:
            values.append(topic_similarity(topic, store))
        except UnembeddableError as exc:
            logger.warning("topic %d excluded from S: %s", i, exc)
    if not values:
        raise UnembeddableError("no topic has two embedded words")
    return float(np.mean(values))


def between_topic_distance(topics: TopicSet, store: EmbeddingStore) -> float:
    """Between-topic distance D: mean squared Euclidean distance over centroid pairs."""
    if topics.K < 2:
        raise TopicRefineError("need at least two topics")
    cents = np.array([topic_centroid(t, store, i).vector for i, t in enumerate(topics)])
    dists = [float(np.sum((cents[i] - cents[m]) ** 2))
             for i, m in itertools.combinations(range(topics.K), 2)]
    return math.fsum(dists) / len(dists)


@dataclass
class QualityReport:
    K: int
    N: int
    per_topic: list[dict]
    aggregate: dict
    per_word_npmi: np.ndarray

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "N": self.N,
            "aggregate": self.aggregate,
            "per_topic": self.per_topic,
            "per_word_npmi": [[None if math.isnan(v) else v for v in row]
                              for row in self.per_word_npmi.tolist()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QualityReport":
        m = np.array([[np.nan if v is None else v for v in row] for row in d["per_word_npmi"]],
                     dtype=float).reshape(d["K"], d["N"])
        return cls(d["K"], d["N"], d["per_topic"], d["aggregate"], m)


def _mean_or_none(values: list) -> float | None:
    values = [v for v in values if v is not None]
    return math.fsum(values) / len(values) if values else None


def compute_quality(topics: TopicSet, stats: CooccurrenceStats, store: EmbeddingStore) -> QualityReport:
    per_topic = []
    for i, topic in enumerate(topics):
        row = {"words": list(topic), "npmi": None, "uci": None, "s_within": None,
               "reference_coverage": len(scoreable_words(topic, stats)) / len(topic),
               "embedding_coverage": sum(w in store for w in topic) / len(topic)}
        try:
            row["npmi"] = topic_npmi(topic, stats)
            row["uci"] = topic_uci(topic, stats)
        except TopicUnscoreableError as exc:
            logger.warning("topic %d: %s", i, exc)
        try:
            row["s_within"] = topic_similarity(topic, store)
        except UnembeddableError as exc:
            logger.warning("topic %d excluded from S: %s", i, exc)
        per_topic.append(row)

    d = None
    if topics.K >= 2:
        try:
            d = between_topic_distance(topics, store)
        except UnembeddableError as exc:
            logger.warning("D not computed: %s", exc)
    aggregate = {
        "NPMI": _mean_or_none([r["npmi"] for r in per_topic]),
        "UCI": _mean_or_none([r["uci"] for r in per_topic]),
        "S": _mean_or_none([r["s_within"] for r in per_topic]),
        "D": d,
    }
    # Reserved for coherence scores computed by external tools.
    aggregate.update({m: None for m in EXTERNAL_METRICS})
    return QualityReport(topics.K, topics.N, per_topic, aggregate, per_word_npmi_matrix(topics, stats))


def delta_report(before: QualityReport, after: QualityReport) -> dict:
    """Per-metric ``after - before``; metrics missing on either side get ``None``."""
    if before.K != after.K or before.N != after.N:
        raise TopicRefineError(
            f"reports differ in shape: K={before.K}/{after.K}, N={before.N}/{after.N}")
    out = {}
    for m in METRICS + EXTERNAL_METRICS:
        b, a = before.aggregate.get(m), after.aggregate.get(m)
        if m in EXTERNAL_METRICS and b is None and a is None:
            continue
        out[m] = {"before": b, "after": a,
                  "delta": None if a is None or b is None else a - b}
    return out


def format_signed(value: float | None, digits: int = 3) -> str:
    if value is None:
        return "n/a"
    text = f"{abs(value):.{digits}f}"
    return ("-" if value < 0 and float(text) != 0 else "+") + text


def render_delta_markdown(delta: dict, digits: int = 3) -> str:
    lines = ["| Metric | Before | After | Delta |", "|---|---|---|---|"]
    for m, row in delta.items():
        b = "n/a" if row["before"] is None else f"{row['before']:.{digits}f}"
        a = "n/a" if row["after"] is None else f"{row['after']:.{digits}f}"
        lines.append(f"| {m} | {b} | {a} | {format_signed(row['delta'], digits)} |")
    return "\n".join(lines) + "\n"


def format_per_word_csv(matrix: np.ndarray, sentinel: str = "NA") -> str:
    rows = []
    for row in matrix:
        rows.append(",".join(sentinel if math.isnan(v) else repr(float(v)) for v in row))
    return "\n".join(rows) + "\n"
