from .backends import (
    BackendResponse,
    BackendTransportError,
    BackendUnavailableError,
    CallableBackend,
    ContextOverflowError,
    DecodeParams,
    HTTPChatBackend,
    ReplayBackend,
    ReplayMissError,
)
from .parsing import ParseFailure, parse_decisions, serialize_decisions
from .prompts import (
    JudgeMode,
    MissingInputError,
    PromptBundle,
    UnresolvedPlaceholderError,
    render_prompt,
)
from .runner import JudgeRun, RateLimiter, run_judge

__all__ = [
    "BackendResponse", "BackendTransportError", "BackendUnavailableError",
    "CallableBackend", "ContextOverflowError", "DecodeParams",
    "HTTPChatBackend", "ReplayBackend", "ReplayMissError", "ParseFailure",
    "parse_decisions", "serialize_decisions", "JudgeMode",
    "MissingInputError", "PromptBundle", "UnresolvedPlaceholderError",
    "render_prompt", "JudgeRun", "RateLimiter", "run_judge",
]
