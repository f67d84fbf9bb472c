"""Prompt rendering for intruder-word judgement and mapping of replies to verdicts."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

from topicrefine.errors import ProtocolError, ResponseParseError, ResponseSchemaError

NUM_ALTERNATIVES = 10

PROMPT_TEMPLATE = """\
You will be given a list of topic words produced by a topic model, followed by one additional word.

Topic words: {topic_words}
Word: {word}

Task 1: Identify the common topic shared by the topic words. Describe it with one word or a short phrase.
Task 2: Decide whether the word "{word}" is semantically consistent with that common topic. Answer "Yes" or "No".
If the answer is "No", suggest ten commonly used words closely related to the common topic. \
The suggested words must be easy to recognize and clearly different from the words in the list above.

Reply with a JSON object only, in this format:
{{"topic": "<common topic>", "coherent": "<Yes or No>", "alternatives": ["<word>", ...]}}
Use an empty list for "alternatives" when the answer is "Yes".
"""

_TOPIC_LINE = re.compile(r"^Topic words: (.+)$", re.MULTILINE)
_WORD_LINE = re.compile(r"^Word: (\S+)$", re.MULTILINE)


@dataclass(frozen=True)
class PromptInstance:
    context_words: tuple[str, ...]
    held_out: str
    text: str
    topic_index: int = 0
    position: int = 0  # 1-based position of held_out in the topic


@dataclass(frozen=True)
class LlmVerdict:
    """Mapped reply: topic label, coherence judgement and alternative words."""

    topic: str
    coherent: bool
    alternatives: tuple[str, ...] = ()

    def __post_init__(self):
        if self.coherent and self.alternatives:
            raise ResponseSchemaError("coherent verdict must not carry alternatives")
        if not self.coherent and not self.alternatives:
            raise ResponseSchemaError("incoherent verdict needs at least one alternative")

    @property
    def r2(self) -> str:
        return "Yes" if self.coherent else "No"

    def to_dict(self) -> dict:
        return {"topic": self.topic, "coherent": self.r2, "alternatives": list(self.alternatives)}


def build_prompt(context_words: Sequence[str], held_out: str,
                 topic_index: int = 0, position: int = 0) -> PromptInstance:
    context_words = tuple(context_words)
    if not context_words:
        raise ValueError("context_words must not be empty")
    if len(set(context_words)) != len(context_words):
        raise ValueError(f"duplicate context words: {context_words}")
    if held_out in context_words:
        raise ValueError(f"held-out word {held_out!r} appears in the context")
    for w in context_words + (held_out,):
        if not w or any(c.isspace() for c in w) or "," in w:
            raise ValueError(f"word {w!r} cannot be placed in the prompt")
    text = PROMPT_TEMPLATE.format(topic_words=", ".join(context_words), word=held_out)
    return PromptInstance(context_words, held_out, text, topic_index, position)


def parse_prompt(text: str) -> tuple[list[str], str]:
    """Recover ``(context_words, held_out)`` from a rendered prompt."""
    topic = _TOPIC_LINE.search(text)
    word = _WORD_LINE.search(text)
    if topic is None or word is None:
        raise ProtocolError("prompt does not match the refinement template")
    context = topic.group(1).split(", ")
    if build_prompt(context, word.group(1)).text != text:
        raise ProtocolError("prompt text deviates from the refinement template")
    return context, word.group(1)


def extract_json_object(text: str) -> dict:
    """Return the first balanced ``{...}`` block in ``text`` that parses as a JSON object."""
    start = text.find("{")
    while start != -1:
        end = _balanced_end(text, start)
        if end is not None:
            try:
                obj = json.loads(text[start:end])
            except json.JSONDecodeError:
                obj = None
            if isinstance(obj, dict):
                return obj
        start = text.find("{", start + 1)
    raise ResponseParseError(f"no JSON object in response: {text[:200]!r}")


def _balanced_end(text: str, start: int) -> int | None:
    depth = 0
    in_str = False
    escaped = False
    for i in range(start, len(text)):
        c = text[i]
        if in_str:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def parse_response(text: str) -> LlmVerdict:
    """Map a completion to a verdict.

    Raises:
        ResponseParseError: no JSON object present.
        ResponseSchemaError: ``coherent`` missing or not Yes/No, or a "No"
            without usable alternatives.
    """
    obj = extract_json_object(text)
    coherent = obj.get("coherent")
    if not isinstance(coherent, str) or coherent.strip().lower() not in ("yes", "no"):
        raise ResponseSchemaError(f"'coherent' must be Yes or No, got {coherent!r}")
    is_yes = coherent.strip().lower() == "yes"
    topic = obj.get("topic", "")
    topic = topic.strip() if isinstance(topic, str) else json.dumps(topic)
    if is_yes:
        return LlmVerdict(topic, True, ())
    alts = obj.get("alternatives")
    if not isinstance(alts, list):
        raise ResponseSchemaError("'alternatives' must be a list")
    cleaned = [a.strip().lower() for a in alts if isinstance(a, str)]
    cleaned = [a for a in cleaned if a][:NUM_ALTERNATIVES]
    if not cleaned:
        raise ResponseSchemaError("'coherent' is No but no alternatives were given")
    return LlmVerdict(topic, False, tuple(cleaned))
