"""Chat-completion backends: generic HTTP wire contract plus a replay
fixture backend for deterministic offline runs."""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from ..costing import Usage
from .prompts import PromptBundle


class BackendTransportError(ConnectionError):
    """Retryable transport-level failure."""


class BackendUnavailableError(ConnectionError):
    """Backend still failing after the retry budget."""

    def __init__(self, message: str, retry_count: int):
        self.retry_count = retry_count
        super().__init__(message)


class ContextOverflowError(ValueError):
    """The prompt exceeds the backend's context window; not retryable."""


class ReplayMissError(KeyError):
    """The replay fixture has no response for a bundle digest."""


@dataclass(frozen=True)
class DecodeParams:
    temperature: float = 0.0
    max_tokens: int = 1024

    def as_dict(self) -> dict:
        return {"temperature": self.temperature, "max_tokens": self.max_tokens}


@dataclass(frozen=True)
class BackendResponse:
    text: str
    usage: Usage


class ReplayBackend:
    """Serves raw responses from a JSONL fixture keyed by bundle digest.

    Unknown digests raise ReplayMissError; when ``record_misses`` is set
    the digest is appended there first so fixtures can be completed.
    """

    supports_audio = True

    def __init__(self, fixture_path: str | Path,
                 record_misses: str | Path | None = None):
        self.fixture_path = Path(fixture_path)
        self.record_misses = Path(record_misses) if record_misses else None
        self.backend_id = f"replay:{self.fixture_path.name}"
        self._responses: dict[str, dict] = {}
        with open(self.fixture_path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                self._responses[row["digest"]] = row

    def complete(self, bundle: PromptBundle,
                 params: DecodeParams) -> BackendResponse:
        digest = bundle.digest()
        row = self._responses.get(digest)
        if row is None:
            if self.record_misses is not None:
                with open(self.record_misses, "a") as fh:
                    fh.write(json.dumps({"digest": digest}) + "\n")
            raise ReplayMissError(f"fixture has no response for {digest}")
        usage = row.get("usage", {})
        return BackendResponse(
            text=row["response"],
            usage=Usage(text_in=usage.get("text_in", 0),
                        audio_in=usage.get("audio_in", 0),
                        text_out=usage.get("text_out", 0)))


class HTTPChatBackend:
    """Generic chat-completion JSON wire: messages in, choices out.

    Audio attachments are inlined as base64 content parts when present.
    The API key comes from the named environment variable, never from
    configuration files.
    """

    def __init__(self, endpoint: str, model: str,
                 api_key_env: str = "TRACE_EVAL_API_KEY",
                 timeout: float = 120.0, supports_audio: bool = False,
                 client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.supports_audio = supports_audio
        self.backend_id = f"http:{model}@{endpoint}"
        self._client = client

    def _messages(self, bundle: PromptBundle) -> list[dict]:
        if not bundle.attachments:
            user_content: object = bundle.user_text
        else:
            parts: list[dict] = [{"type": "text", "text": bundle.user_text}]
            for ref in bundle.attachments:
                data = base64.b64encode(Path(ref).read_bytes()).decode()
                parts.append({"type": "input_audio",
                              "input_audio": {"data": data, "format": "wav"}})
            user_content = parts
        return [{"role": "system", "content": bundle.system_text},
                {"role": "user", "content": user_content}]

    def complete(self, bundle: PromptBundle,
                 params: DecodeParams) -> BackendResponse:
        payload = {"model": self.model,
                   "messages": self._messages(bundle),
                   "temperature": params.temperature,
                   "max_tokens": params.max_tokens}
        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            owned = self._client is None
            client = self._client or httpx.Client(timeout=self.timeout)
            try:
                response = client.post(self.endpoint, json=payload,
                                       headers=headers)
            finally:
                if owned:
                    client.close()
        except httpx.HTTPError as exc:
            raise BackendTransportError(str(exc)) from exc
        if response.status_code == 400 and "context" in response.text.lower():
            raise ContextOverflowError(response.text[:500])
        if response.status_code >= 400:
            raise BackendTransportError(
                f"HTTP {response.status_code}: {response.text[:200]}")
        body = response.json()
        usage = body.get("usage", {})
        audio_in = usage.get("audio_tokens", 0)
        return BackendResponse(
            text=body["choices"][0]["message"]["content"],
            usage=Usage(
                text_in=max(0, usage.get("prompt_tokens", 0) - audio_in),
                audio_in=audio_in,
                text_out=usage.get("completion_tokens", 0)))


@dataclass
class CallableBackend:
    """Wraps a function (bundle, params) -> BackendResponse; test helper."""

    fn: object
    backend_id: str = "callable"
    supports_audio: bool = True
    calls: int = field(default=0)

    def complete(self, bundle: PromptBundle,
                 params: DecodeParams) -> BackendResponse:
        self.calls += 1
        return self.fn(bundle, params)
