"""Exception hierarchy.

Every error carries a machine-readable ``error_code`` and the process exit
code the CLI should use when it escapes a subcommand.
"""

from __future__ import annotations


class TopicRefineError(Exception):
    error_code = "error"
    exit_code = 2


class ConfigError(TopicRefineError):
    error_code = "config_error"
    exit_code = 1


class FormatError(TopicRefineError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    error_code = "format_error"

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.path = path


class DimensionError(FormatError):
    error_code = "dimension_error"


class CorpusDegenerateError(TopicRefineError):
    error_code = "corpus_degenerate"


class ZeroVectorError(TopicRefineError, ValueError):
    error_code = "zero_vector"


class FallbackImpossibleError(TopicRefineError):
    error_code = "fallback_impossible"


class UnseenWordError(TopicRefineError, KeyError):
    error_code = "unseen_in_reference"

    def __str__(self) -> str:
        return Exception.__str__(self)


class TopicUnscoreableError(TopicRefineError):
    error_code = "topic_unscoreable"


class UnembeddableError(TopicRefineError):
    error_code = "unembeddable"


class ProtocolError(TopicRefineError):
    """A prompt could not be mapped back to its slots (template drift)."""

    error_code = "protocol_error"


class BackendError(TopicRefineError):
    error_code = "backend_error"
    exit_code = 3


class BackendUnavailableError(BackendError):
    error_code = "backend_unavailable"


class RequestRejectedError(BackendError):
    error_code = "request_rejected"

    def __init__(self, status: int, body: str):
        super().__init__(f"request rejected (HTTP {status}): {body[:300]}")
        self.status = status
        self.body = body


class ResponseParseError(BackendError):
    """No JSON object could be extracted from a completion."""

    error_code = "response_parse_error"


class ResponseSchemaError(ResponseParseError):
    error_code = "response_schema_error"


class RefinementError(BackendError):
    def __init__(self, topic_index: int, cause: Exception):
        super().__init__(f"topic {topic_index}: {cause}")
        self.topic_index = topic_index
        self.cause = cause
        self.error_code = getattr(cause, "error_code", "refinement_error")
        self.exit_code = getattr(cause, "exit_code", 3)
