"""Judge invocation with retries, rate limiting, and write-ahead raw
response persistence: the raw text hits disk before parsing so a crash in
between never loses a paid completion."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path

from ..costing import Usage
from ..labels import DimScores
from .backends import (
    BackendTransportError,
    BackendUnavailableError,
    ContextOverflowError,
    DecodeParams,
)
from .parsing import ParseFailure, parse_decisions, scores_from_record, scores_to_record
from .prompts import JudgeMode, PromptBundle


class RateLimiter:
    """Global requests-per-minute limiter shared by concurrent judge calls."""

    def __init__(self, requests_per_minute: float | None = None,
                 clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / requests_per_minute if requests_per_minute else 0.0
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_at = 0.0

    def acquire(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            wait = self._next_at - now
            self._next_at = max(now, self._next_at) + self.interval
        if wait > 0:
            self._sleep(wait)


@dataclass
class JudgeRun:
    """Persisted record of one judge invocation."""

    example_id: str
    mode: JudgeMode
    backend_id: str
    bundle_digest: str
    raw_response_text: str
    parsed: DimScores | None
    parse_failure: dict | None
    usage: Usage
    started_at: float
    finished_at: float
    retry_count: int
    decode: dict

    def __post_init__(self):
        if (self.parsed is None) == (self.parse_failure is None):
            raise ValueError("exactly one of parsed/parse_failure must be set")

    def to_record(self) -> dict:
        return {
            "example_id": self.example_id,
            "mode": self.mode.value,
            "backend_id": self.backend_id,
            "bundle_digest": self.bundle_digest,
            "raw_response_text": self.raw_response_text,
            "parsed": scores_to_record(self.parsed) if self.parsed else None,
            "parse_failure": self.parse_failure,
            "usage": {"text_in": self.usage.text_in,
                      "audio_in": self.usage.audio_in,
                      "text_out": self.usage.text_out},
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "retry_count": self.retry_count,
            "decode": self.decode,
        }

    @classmethod
    def from_record(cls, record: dict) -> "JudgeRun":
        return cls(
            example_id=record["example_id"],
            mode=JudgeMode(record["mode"]),
            backend_id=record["backend_id"],
            bundle_digest=record["bundle_digest"],
            raw_response_text=record["raw_response_text"],
            parsed=(scores_from_record(record["parsed"])
                    if record["parsed"] else None),
            parse_failure=record["parse_failure"],
            usage=Usage(**record["usage"]),
            started_at=record["started_at"],
            finished_at=record["finished_at"],
            retry_count=record["retry_count"],
            decode=record["decode"],
        )


def run_judge(bundle: PromptBundle, backend, example_id: str,
              params: DecodeParams = DecodeParams(),
              raw_dir: str | Path | None = None,
              max_retries: int = 3, backoff: float = 0.5,
              limiter: RateLimiter | None = None,
              sleep=time.sleep) -> JudgeRun:
    """Call the backend once (with transport retries) and record the run.

    Transport errors are retried with exponential backoff up to
    ``max_retries``; exhaustion raises BackendUnavailableError carrying the
    retry count. Context overflow propagates immediately. A response that
    fails to parse still yields a JudgeRun (with parse_failure set).
    """
    if bundle.attachments and not getattr(backend, "supports_audio", False):
        raise ValueError(
            f"backend {backend.backend_id} does not accept audio input")
    started = time.time()
    retries = 0
    delay = backoff
    while True:
        if limiter is not None:
            limiter.acquire()
        try:
            response = backend.complete(bundle, params)
            break
        except ContextOverflowError:
            raise
        except BackendTransportError as exc:
            if retries >= max_retries:
                raise BackendUnavailableError(
                    f"backend {backend.backend_id} unavailable after "
                    f"{retries} retries: {exc}", retry_count=retries) from exc
            retries += 1
            sleep(delay)
            delay *= 2

    digest = bundle.digest()
    if raw_dir is not None:
        raw_dir = Path(raw_dir)
        raw_dir.mkdir(parents=True, exist_ok=True)
        raw_path = raw_dir / f"{example_id}__{digest[:16]}.txt"
        raw_path.write_text(response.text, encoding="utf-8")

    parsed = None
    failure = None
    try:
        parsed = parse_decisions(response.text)
    except ParseFailure as exc:
        failure = exc.as_record()

    return JudgeRun(
        example_id=example_id,
        mode=bundle.mode,
        backend_id=backend.backend_id,
        bundle_digest=digest,
        raw_response_text=response.text,
        parsed=parsed,
        parse_failure=failure,
        usage=response.usage,
        started_at=started,
        finished_at=time.time(),
        retry_count=retries,
        decode=params.as_dict(),
    )
