"""Completion backends: a remote chat-completions endpoint and an offline mock oracle.

Both sit behind :class:`LlmClient`, which adds an on-disk response cache,
bounded retries with exponential backoff, and token accounting.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import httpx

from topicrefine._io import atomic_write_text
from topicrefine.corpus import Vocabulary
from topicrefine.embeddings import EmbeddingStore, mean_similarities, top_k_by_score
from topicrefine.errors import (
    BackendUnavailableError,
    ConfigError,
    RequestRejectedError,
    ResponseParseError,
)
from topicrefine.prompt import NUM_ALTERNATIVES, parse_prompt

logger = logging.getLogger(__name__)

ENV_API_URL = "TOPICREFINE_API_URL"
ENV_API_KEY = "TOPICREFINE_API_KEY"
ENV_CACHE_DIR = "TOPICREFINE_CACHE_DIR"
DEFAULT_API_URL = "https://api.openai.com/v1/chat/completions"

BACKOFF_BASE = 1.0
BACKOFF_CAP = 30.0


@dataclass
class LlmConfig:
    backend: str = "remote"  # "remote" | "mock"
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 60.0
    cache_dir: str | None = None
    json_mode: bool = True
    max_in_flight: int = 4
    api_url: str | None = None

    def __post_init__(self):
        if self.backend not in ("remote", "mock"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int
    completion_tokens: int
    cached: bool = False


def estimate_tokens(text: str) -> int:
    """Offline token proxy used when a backend reports no usage: ceil(chars / 4)."""
    return math.ceil(len(text) / 4)


def backoff_delay(attempt: int) -> float:
    """Delay before retry number ``attempt`` (1-based); nondecreasing in ``attempt``."""
    return min(BACKOFF_CAP, BACKOFF_BASE * 2 ** (attempt - 1))


def cache_key(model_id: str, temperature: float, prompt: str) -> str:
    payload = json.dumps([model_id, float(temperature), prompt], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """One JSON file per key under ``<root>/<first2hex>/<fullhash>.json``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> CompletionResult | None:
        p = self.path(key)
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError) as exc:
            logger.warning("ignoring unreadable cache entry %s: %s", p, exc)
            return None
        return CompletionResult(data["text"], int(data["prompt_tokens"]),
                                int(data["completion_tokens"]), cached=True)

    def put(self, key: str, result: CompletionResult, **meta) -> None:
        record = {
            "text": result.text,
            "prompt_tokens": result.prompt_tokens,
            "completion_tokens": result.completion_tokens,
            **meta,
        }
        atomic_write_text(self.path(key), json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


class MockOracle:
    """Deterministic embedding-threshold stand-in for the language model.

    The held-out word is judged coherent when its mean cosine to the topic
    words is at least ``threshold`` (words without vectors count as coherent).
    Otherwise the ten pool words closest on average to the topic words are
    proposed, excluding the topic words and the held-out word.
    """

    def __init__(self, store: EmbeddingStore, pool: Vocabulary, threshold: float = 0.5):
        if not -1.0 <= threshold <= 1.0:
            raise ConfigError("mock threshold must lie in [-1, 1]")
        self.store = store
        self.pool = pool
        self.threshold = threshold
        self._pool_words = [w for w in pool.words if w in store]

    def verdict(self, topic_words: list[str], held_out: str) -> dict:
        label = min(topic_words)
        embedded = [w for w in topic_words if w in self.store]
        if held_out not in self.store or not embedded:
            return {"topic": label, "coherent": "Yes", "alternatives": []}
        score = float(mean_similarities([held_out], embedded, self.store)[0])
        if score >= self.threshold:
            return {"topic": label, "coherent": "Yes", "alternatives": []}
        banned = set(topic_words) | {held_out}
        pool = [w for w in self._pool_words if w not in banned]
        if not pool:
            return {"topic": label, "coherent": "Yes", "alternatives": []}
        scores = mean_similarities(pool, embedded, self.store)
        alts = [pool[i] for i in top_k_by_score(scores, NUM_ALTERNATIVES)]
        return {"topic": label, "coherent": "No", "alternatives": alts}

    def __call__(self, prompt: str) -> str:
        topic_words, held_out = parse_prompt(prompt)
        return json.dumps(self.verdict(topic_words, held_out))


def mock_complete(prompt: str, oracle: Callable[[str], str]) -> CompletionResult:
    text = oracle(prompt)
    return CompletionResult(text, estimate_tokens(prompt), estimate_tokens(text))


@dataclass
class ClientStats:
    calls: int = 0
    retries: int = 0
    cache_hits: int = 0
    backoff_delays: list[float] = field(default_factory=list)


class LlmClient:
    """Completion client shared by concurrent refinement tasks.

    Args:
        config: backend and request settings.
        oracle: callable mapping prompt -> reply text; required for the mock backend.
        transport: optional ``httpx`` transport (tests inject a mock one).
        sleep: called with each backoff delay.
        env: environment mapping used to resolve credentials.
    """

    def __init__(self, config: LlmConfig, oracle: Callable[[str], str] | None = None,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep, env=None):
        self.config = config
        self.oracle = oracle
        if config.backend == "mock" and oracle is None:
            raise ConfigError("mock backend needs an oracle")
        self._env = os.environ if env is None else env
        cache_dir = config.cache_dir or self._env.get(ENV_CACHE_DIR)
        self.cache = ResponseCache(cache_dir) if cache_dir else None
        self._transport = transport
        self._sleep = sleep
        self._http: httpx.Client | None = None
        self._lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(config.max_in_flight)
        self.stats = ClientStats()

    def complete(self, prompt: str, refresh: bool = False) -> CompletionResult:
        """Return a completion, from the cache when possible.

        ``refresh`` skips the cache lookup (used when a cached reply failed
        to parse) but still stores the new reply.
        """
        if not prompt:
            raise ValueError("prompt must not be empty")
        key = cache_key(self.config.model_id, self.config.temperature, prompt)
        if self.cache is not None and not refresh:
            hit = self.cache.get(key)
            if hit is not None:
                with self._lock:
                    self.stats.cache_hits += 1
                return hit
        if self.config.backend == "mock":
            result = mock_complete(prompt, self.oracle)
        else:
            result = self._remote_complete(prompt)
        with self._lock:
            self.stats.calls += 1
        if self.cache is not None:
            self.cache.put(key, result, model_id=self.config.model_id,
                           temperature=self.config.temperature, prompt=prompt)
        return result

    # -- remote backend ------------------------------------------------------

    def request_body(self, prompt: str) -> dict:
        body = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        if self.config.json_mode:
            body["response_format"] = {"type": "json_object"}
        return body

    def _client(self) -> httpx.Client:
        if self._http is None:
            self._http = httpx.Client(transport=self._transport, timeout=self.config.timeout)
        return self._http

    def _credentials(self) -> tuple[str, str]:
        key = self._env.get(ENV_API_KEY)
        if not key:
            raise ConfigError(f"remote backend needs {ENV_API_KEY} in the environment")
        url = self._env.get(ENV_API_URL) or self.config.api_url or DEFAULT_API_URL
        return url, key

    def _remote_complete(self, prompt: str) -> CompletionResult:
        url, key = self._credentials()
        body = self.request_body(prompt)
        headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
        attempt = 0
        while True:
            try:
                with self._slots:
                    resp = self._client().post(url, json=body, headers=headers)
            except httpx.TransportError as exc:
                failure = f"transport error: {exc}"
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    failure = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise RequestRejectedError(resp.status_code, resp.text)
                else:
                    return self._read_reply(resp, prompt)
            if attempt >= self.config.max_retries:
                raise BackendUnavailableError(
                    f"backend unavailable after {attempt + 1} attempts ({failure})")
            attempt += 1
            delay = backoff_delay(attempt)
            with self._lock:
                self.stats.retries += 1
                self.stats.backoff_delays.append(delay)
            logger.warning("completion failed (%s); retry %d in %.1fs", failure, attempt, delay)
            self._sleep(delay)

    @staticmethod
    def _read_reply(resp: httpx.Response, prompt: str) -> CompletionResult:
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ResponseParseError(f"malformed completion payload: {exc}") from None
        if not isinstance(text, str):
            raise ResponseParseError("completion content is not text")
        usage = data.get("usage") or {}
        return CompletionResult(
            text,
            int(usage.get("prompt_tokens", estimate_tokens(prompt))),
            int(usage.get("completion_tokens", estimate_tokens(text))),
        )

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None
