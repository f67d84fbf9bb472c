"""Short-text corpus ingestion: tokenization, frequency filtering, vocabulary."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from topicrefine.errors import CorpusDegenerateError, FormatError

logger = logging.getLogger(__name__)

# Documents with fewer tokens than this carry no co-occurrence and are dropped.
MIN_DOC_TOKENS = 2


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple[str, ...]
    label: str | None = None

    def __len__(self) -> int:
        return len(self.tokens)


class Vocabulary:
    """Ordered lexicon with word <-> index maps and document frequencies."""

    def __init__(self, words: Iterable[str], doc_freq: dict[str, int] | None = None):
        self.words: tuple[str, ...] = tuple(words)
        self.index: dict[str, int] = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            dupes = [w for w, c in Counter(self.words).items() if c > 1]
            raise FormatError(f"duplicate vocabulary words: {dupes[:5]}")
        self.doc_freq: dict[str, int] = dict(doc_freq or {})

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return word in self.index

    def __iter__(self):
        return iter(self.words)

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self.words)})"


@dataclass(frozen=True)
class CorpusStats:
    doc_count: int
    label_count: int
    avg_length: float


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    vocabulary: Vocabulary
    stats: CorpusStats

    @property
    def labels(self) -> list[str | None]:
        return [d.label for d in self.documents]

    def token_lists(self) -> list[tuple[str, ...]]:
        return [d.tokens for d in self.documents]


@dataclass
class PreprocessConfig:
    lowercase: bool = True
    min_token_length: int = 2
    stopwords_path: str | None = None
    stopwords: frozenset[str] = field(default_factory=frozenset)
    min_doc_freq: int = 5
    max_doc_freq_ratio: float = 0.5

    def load_stopwords(self) -> frozenset[str]:
        words = set(self.stopwords)
        if self.stopwords_path:
            # OSError propagates: an unreadable stopword file is an I/O failure.
            text = Path(self.stopwords_path).read_text(encoding="utf-8")
            words.update(w.strip().lower() for w in text.splitlines() if w.strip())
        return frozenset(words)

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "min_token_length": self.min_token_length,
            "stopwords_path": self.stopwords_path,
            "stopwords": sorted(self.stopwords),
            "min_doc_freq": self.min_doc_freq,
            "max_doc_freq_ratio": self.max_doc_freq_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessConfig":
        d = dict(d)
        d["stopwords"] = frozenset(d.get("stopwords", ()))
        return cls(**d)


def _strip_edges(token: str) -> str:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def tokenize(text: str, lowercase: bool = True, min_token_length: int = 1,
             stopwords: frozenset[str] | set[str] = frozenset()) -> list[str]:
    """Whitespace tokenizer with edge-punctuation stripping.

    Interior punctuation is kept (``don't`` stays one token). Applying the
    tokenizer to ``" ".join(tokenize(text))`` returns the same list.
    """
    if lowercase:
        text = text.lower()
    out = []
    for raw in text.split():
        tok = _strip_edges(raw)
        if len(tok) < min_token_length or not tok or tok in stopwords:
            continue
        out.append(tok)
    return out


def preprocess_corpus(raw_docs: Sequence[tuple[str, str | None]],
                      config: PreprocessConfig | None = None) -> Corpus:
    """Tokenize and filter raw documents into a :class:`Corpus`.

    Frequency filtering is repeated until nothing changes: dropping short
    documents shifts document frequencies, and iterating to a fixed point is
    what makes a second application of this function a no-op.

    Args:
        raw_docs: ``(text, label)`` pairs; the document id is the position.
        config: filtering options; defaults to :class:`PreprocessConfig`.

    Raises:
        CorpusDegenerateError: nothing survives filtering.
    """
    config = config or PreprocessConfig()
    if not raw_docs:
        raise CorpusDegenerateError("corpus degenerate: no input documents")
    stop = config.load_stopwords()

    docs = []
    for i, (text, label) in enumerate(raw_docs):
        toks = tokenize(text, config.lowercase, config.min_token_length, stop)
        docs.append((str(i), toks, label))

    while True:
        docs = [d for d in docs if len(d[1]) >= MIN_DOC_TOKENS]
        if not docs:
            raise CorpusDegenerateError("corpus degenerate: all documents were filtered out")
        df = _doc_freq(toks for _, toks, _ in docs)
        max_df = config.max_doc_freq_ratio * len(docs)
        keep = {w for w, c in df.items() if c >= config.min_doc_freq and c <= max_df}
        if len(keep) == len(df):
            break
        docs = [(i, [t for t in toks if t in keep], label) for i, toks, label in docs]

    vocab = Vocabulary(sorted(df), df)
    documents = tuple(Document(i, tuple(toks), label) for i, toks, label in docs)
    labels = {d.label for d in documents if d.label is not None}
    stats = CorpusStats(
        doc_count=len(documents),
        label_count=len(labels),
        avg_length=sum(len(d) for d in documents) / len(documents),
    )
    logger.info("corpus: %d docs, %d words, avg length %.3f",
                stats.doc_count, len(vocab), stats.avg_length)
    return Corpus(documents, vocab, stats)


def _doc_freq(token_lists: Iterable[Sequence[str]]) -> Counter:
    df: Counter = Counter()
    for toks in token_lists:
        df.update(set(toks))
    return df


def read_corpus_file(path: str | Path, labels_path: str | Path | None = None
                     ) -> list[tuple[str, str | None]]:
    """One document per line; optional labels file aligned by line number."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if labels_path is None:
        return [(line, None) for line in lines]
    labels = Path(labels_path).read_text(encoding="utf-8").splitlines()
    if len(labels) != len(lines):
        raise FormatError(
            f"labels file has {len(labels)} lines but corpus has {len(lines)}",
            path=str(labels_path))
    return [(line, lab.strip() or None) for line, lab in zip(lines, labels)]


def save_vocabulary(vocab: Vocabulary) -> str:
    return "".join(w + "\n" for w in vocab.words)


def load_vocabulary(path: str | Path) -> Vocabulary:
    words = [w.strip() for w in Path(path).read_text(encoding="utf-8").splitlines()]
    return Vocabulary(w for w in words if w)
