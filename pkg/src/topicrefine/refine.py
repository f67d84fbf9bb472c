"""Topic refinement: ask the model about each word of a topic, last word first,
and swap flagged words for in-vocabulary alternatives."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from topicrefine.corpus import Vocabulary
from topicrefine.embeddings import EmbeddingStore, nearest_in_vocab_by_avg_similarity
from topicrefine.errors import RefinementError, ResponseParseError, TopicRefineError
from topicrefine.llm import LlmClient
from topicrefine.prompt import LlmVerdict, build_prompt, parse_response
from topicrefine.topics import TopicSet

logger = logging.getLogger(__name__)

RETAINED = "retained"
CANDIDATE_IN_VOCAB = "candidate_in_vocab"
FALLBACK_NEAREST = "fallback_nearest"


@dataclass
class RefineOptions:
    # "original": prompts use the unmodified topic as context for every word.
    # "refined": prompts use the working copy, including earlier replacements.
    context: str = "original"
    parse_retries: int = 2
    jobs: int = 1

    def __post_init__(self):
        if self.context not in ("original", "refined"):
            raise ValueError(f"context must be 'original' or 'refined', not {self.context!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass(frozen=True)
class RefinementRecord:
    topic_index: int
    position: int  # 1-based
    original_word: str
    prompt: str
    verdict: LlmVerdict
    replacement: str | None
    replacement_source: str
    prompt_tokens: int
    completion_tokens: int
    cached: bool = False
    retries: int = 0

    def to_dict(self) -> dict:
        return {
            "topic_index": self.topic_index,
            "position": self.position,
            "original_word": self.original_word,
            "prompt": self.prompt,
            "r1": self.verdict.topic,
            "r2": self.verdict.r2,
            "r3": list(self.verdict.alternatives),
            "replacement": self.replacement,
            "replacement_source": self.replacement_source,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "cached": self.cached,
            "retries": self.retries,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RefinementRecord":
        verdict = LlmVerdict(d["r1"], d["r2"] == "Yes", tuple(d["r3"]))
        return cls(d["topic_index"], d["position"], d["original_word"], d["prompt"], verdict,
                   d["replacement"], d["replacement_source"], d["prompt_tokens"],
                   d["completion_tokens"], d.get("cached", False), d.get("retries", 0))


@dataclass
class RefineResult:
    topics: TopicSet
    records: list[RefinementRecord]
    summary: dict
    failures: dict[int, str] = field(default_factory=dict)


def select_alternative(candidates: Sequence[str], vocabulary: Vocabulary,
                       current_topic_words: Iterable[str], store: EmbeddingStore
                       ) -> tuple[str, str]:
    """Pick the replacement for a flagged word.

    The first candidate, in the order the model produced them, that is in the
    vocabulary and not already in the topic wins. Failing that, the vocabulary
    word closest on average to all candidates is used.
    """
    if not candidates:
        raise ValueError("no candidate words")
    current = set(current_topic_words)
    for c in candidates:
        if c in vocabulary and c not in current:
            return c, CANDIDATE_IN_VOCAB
    return nearest_in_vocab_by_avg_similarity(candidates, vocabulary, current, store), FALLBACK_NEAREST


def _ask(client: LlmClient, prompt: str, parse_retries: int):
    prompt_tokens = completion_tokens = 0
    cached = True
    err: ResponseParseError | None = None
    for attempt in range(parse_retries + 1):
        result = client.complete(prompt, refresh=attempt > 0)
        prompt_tokens += result.prompt_tokens
        completion_tokens += result.completion_tokens
        cached = cached and result.cached
        try:
            verdict = parse_response(result.text)
        except ResponseParseError as exc:
            logger.warning("unusable reply (attempt %d): %s", attempt + 1, exc)
            err = exc
            continue
        return verdict, prompt_tokens, completion_tokens, cached, attempt
    raise err


def refine_topic(topic: Sequence[str], vocabulary: Vocabulary, store: EmbeddingStore,
                 client: LlmClient, options: RefineOptions | None = None,
                 topic_index: int = 0) -> tuple[list[str], list[RefinementRecord]]:
    """Refine one topic; returns the refined word list and one record per position.

    Raises:
        RefinementError: the backend failed for good on some position.
    """
    options = options or RefineOptions()
    original = list(topic)
    if len(set(original)) != len(original):
        raise ValueError(f"topic {topic_index} repeats a word")
    working = list(original)
    records = []
    try:
        for j in range(len(original) - 1, -1, -1):
            held = original[j]
            source = original if options.context == "original" else working
            context = source[:j] + source[j + 1:]
            prompt = build_prompt(context, held, topic_index, j + 1)
            verdict, p_tok, c_tok, cached, retries = _ask(client, prompt.text, options.parse_retries)
            if verdict.coherent:
                replacement, src = None, RETAINED
            else:
                replacement, src = select_alternative(verdict.alternatives, vocabulary, working, store)
                working[j] = replacement
            records.append(RefinementRecord(topic_index, j + 1, held, prompt.text, verdict,
                                            replacement, src, p_tok, c_tok, cached, retries))
    except TopicRefineError as exc:
        raise RefinementError(topic_index, exc) from exc
    return working, records


def replay_records(topic: Sequence[str], records: Iterable[RefinementRecord]) -> list[str]:
    """Apply the replacements logged in ``records`` to ``topic``."""
    out = list(topic)
    for r in records:
        if out[r.position - 1] != r.original_word:
            raise ValueError(f"record for position {r.position} expects {r.original_word!r}")
        if r.replacement is not None:
            out[r.position - 1] = r.replacement
    return out


def refine_topic_set(topics: TopicSet, vocabulary: Vocabulary, store: EmbeddingStore,
                     client: LlmClient, options: RefineOptions | None = None) -> RefineResult:
    """Refine every topic. A failed topic keeps its original words and is
    listed in ``failures``; the call raises only when every topic fails."""
    options = options or RefineOptions()

    def work(i):
        try:
            return i, refine_topic(topics[i], vocabulary, store, client, options, i), None
        except RefinementError as exc:
            logger.error("%s", exc)
            return i, None, exc

    if options.jobs > 1 and topics.K > 1:
        with ThreadPoolExecutor(max_workers=options.jobs) as pool:
            outcomes = list(pool.map(work, range(topics.K)))
    else:
        outcomes = [work(i) for i in range(topics.K)]

    refined: list[list[str]] = []
    records: list[RefinementRecord] = []
    failures: dict[int, str] = {}
    errors = []
    for i, res, exc in outcomes:
        if res is None:
            refined.append(list(topics[i]))
            failures[i] = str(exc)
            errors.append(exc)
        else:
            refined.append(res[0])
            records.extend(res[1])
    if topics.K and len(errors) == topics.K:
        raise errors[0]

    out = TopicSet.from_lists(refined, provenance=f"refined({topics.provenance})")
    summary = summarize(topics, out, records, failures, options)
    return RefineResult(out, records, summary, failures)


def summarize(before: TopicSet, after: TopicSet, records: list[RefinementRecord],
              failures: dict[int, str], options: RefineOptions) -> dict:
    changes = [None if i in failures else sum(a != b for a, b in zip(before[i], after[i]))
               for i in range(before.K)]
    refined_count = before.K - len(failures)
    prompt_total = sum(r.prompt_tokens for r in records)
    completion_total = sum(r.completion_tokens for r in records)
    return {
        "K": before.K,
        "N": before.N,
        "context": options.context,
        "word_changes": changes,
        "total_word_changes": sum(c for c in changes if c is not None),
        "completion_requests": len(records),
        "parse_retries": sum(r.retries for r in records),
        "prompt_tokens_total": prompt_total,
        "completion_tokens_total": completion_total,
        "avg_prompt_tokens_per_topic": prompt_total / refined_count if refined_count else 0.0,
        "avg_completion_tokens_per_topic": completion_total / refined_count if refined_count else 0.0,
        "replacement_sources": {
            src: sum(r.replacement_source == src for r in records)
            for src in (RETAINED, CANDIDATE_IN_VOCAB, FALLBACK_NEAREST)
        },
        "failed_topics": {str(k): v for k, v in sorted(failures.items())},
    }
