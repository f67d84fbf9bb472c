"""Topic sets and the one-topic-per-line file format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from topicrefine._io import atomic_write_text
from topicrefine.errors import FormatError


@dataclass(frozen=True)
class TopicSet:
    """K ordered topics of N distinct words each, most relevant word first."""

    topics: tuple[tuple[str, ...], ...]
    provenance: str = ""

    def __post_init__(self):
        topics = tuple(tuple(t) for t in self.topics)
        object.__setattr__(self, "topics", topics)
        if topics:
            n = len(topics[0])
            for i, t in enumerate(topics):
                if len(t) != n:
                    raise FormatError(f"topic {i} has {len(t)} words, expected {n}")
                if len(set(t)) != len(t):
                    raise FormatError(f"topic {i} repeats a word: {' '.join(t)}")

    @classmethod
    def from_lists(cls, topics: Iterable[Sequence[str]], provenance: str = "") -> "TopicSet":
        return cls(tuple(tuple(t) for t in topics), provenance)

    @property
    def K(self) -> int:
        return len(self.topics)

    @property
    def N(self) -> int:
        return len(self.topics[0]) if self.topics else 0

    def __len__(self) -> int:
        return len(self.topics)

    def __iter__(self):
        return iter(self.topics)

    def __getitem__(self, i: int) -> tuple[str, ...]:
        return self.topics[i]

    def words(self) -> set[str]:
        return {w for t in self.topics for w in t}


def parse_topic_set(text: str, source: str = "<string>") -> TopicSet:
    topics: list[list[str]] = []
    n = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        words = line.split()
        if not words:
            continue
        if n is None:
            n = len(words)
        elif len(words) != n:
            raise FormatError(f"expected {n} words, found {len(words)}", line=lineno, path=source)
        if len(set(words)) != len(words):
            raise FormatError("duplicate word within topic", line=lineno, path=source)
        topics.append(words)
    if not topics:
        raise FormatError("no topics found", path=source)
    return TopicSet.from_lists(topics, provenance=source)


def load_topic_set(path: str | Path) -> TopicSet:
    return parse_topic_set(Path(path).read_text(encoding="utf-8"), source=str(path))


def format_topic_set(topics: TopicSet) -> str:
    return "".join(" ".join(t) + "\n" for t in topics.topics)


def save_topic_set(topics: TopicSet, path: str | Path) -> None:
    atomic_write_text(path, format_topic_set(topics))
