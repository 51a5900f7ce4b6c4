"""Clients for the neural feature sources feeding the blueprint.

Four feature kinds: ASR transcript, emotion vector, accent-similarity
vector, and MOS-style quality scores. Each can come from an HTTP service
(multipart audio POST, JSON payload back) or from a precomputed JSONL
manifest. Payload validation is backend-independent, and validated results
are cached under (feature, audio content hash, backend identity) so an
unchanged corpus never re-issues backend calls.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import httpx

EMOTION_KEYS = ("angry", "disgusted", "fearful", "happy", "neutral",
                "other", "sad", "surprised", "unknown")
# Key set of the accent-similarity vector, as emitted by the upstream
# accent classifier (spelling preserved verbatim).
ACCENT_KEYS = ("england", "us", "canada", "australia", "indian", "scotland",
               "ireland", "african", "malaysia", "newzealand",
               "southatlandtic", "bermuda", "philippines", "hongkong",
               "wales", "singapore")
QUALITY_KEYS = ("sig", "bak", "ovrl", "p808")


class Feature(enum.Enum):
    ASR = "asr"
    EMOTION = "emotion"
    ACCENT = "accent"
    MOS = "mos"


class Backend(enum.Enum):
    HTTP_SERVICE = "http_service"
    PRECOMPUTED_FILE = "precomputed_file"


class MalformedPayloadError(ValueError):
    """Payload violates the feature schema."""


class MissingPrecomputedError(KeyError):
    """The file backend has no row for the requested clip."""


class FeatureTimeoutError(TimeoutError):
    """Backend did not answer within the deadline after all retries."""


@dataclass(frozen=True)
class ClipRef:
    """An audio file registered by content."""

    clip_id: str
    path: Path
    sha256: str

    @classmethod
    def from_path(cls, clip_id: str, path: str | Path) -> "ClipRef":
        path = Path(path)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        return cls(clip_id=clip_id, path=path, sha256=digest)


@dataclass(frozen=True)
class ExtractorSpec:
    feature: Feature
    backend: Backend
    location: str  # endpoint URL or manifest path
    timeout: float = 30.0
    max_retries: int = 3

    def __post_init__(self):
        if self.backend is Backend.HTTP_SERVICE:
            if not self.location.startswith(("http://", "https://")):
                raise ValueError(f"not a valid endpoint URL: {self.location}")
            identity = f"http:{self.location}"
        else:
            if not Path(self.location).exists():
                raise ValueError(f"manifest does not exist: {self.location}")
            digest = hashlib.sha256(Path(self.location).read_bytes()).hexdigest()
            identity = f"file:{digest[:16]}"
        # identity is pinned at construction so cache hits never touch the
        # backend again (frozen dataclass, hence the setattr indirection)
        object.__setattr__(self, "_identity", identity)

    def backend_identity(self) -> str:
        return self._identity


@dataclass(frozen=True)
class EmotionVector:
    scores: dict[str, float]
    is_distribution: bool

    @classmethod
    def validate(cls, payload: Any) -> "EmotionVector":
        if not isinstance(payload, dict):
            raise MalformedPayloadError("emotion payload must be an object")
        missing = set(EMOTION_KEYS) - set(payload)
        extra = set(payload) - set(EMOTION_KEYS)
        if missing or extra:
            raise MalformedPayloadError(
                f"emotion keys wrong (missing {sorted(missing)}, "
                f"extra {sorted(extra)})")
        scores = {}
        for key in EMOTION_KEYS:
            value = payload[key]
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise MalformedPayloadError(
                    f"emotion score {key}={value!r} outside [0, 1]")
            scores[key] = float(value)
        total = sum(scores.values())
        # Non-distribution outputs are kept verbatim, only flagged.
        return cls(scores=scores, is_distribution=0.99 <= total <= 1.01)

    def to_payload(self) -> dict:
        return dict(self.scores)


@dataclass(frozen=True)
class AccentVector:
    similarities: dict[str, float]

    @classmethod
    def validate(cls, payload: Any) -> "AccentVector":
        if not isinstance(payload, dict):
            raise MalformedPayloadError("accent payload must be an object")
        missing = set(ACCENT_KEYS) - set(payload)
        extra = set(payload) - set(ACCENT_KEYS)
        if missing or extra:
            raise MalformedPayloadError(
                f"accent keys wrong (missing {sorted(missing)}, "
                f"extra {sorted(extra)})")
        sims = {}
        for key in ACCENT_KEYS:
            value = payload[key]
            if not isinstance(value, (int, float)) or not -1.0 <= value <= 1.0:
                raise MalformedPayloadError(
                    f"accent similarity {key}={value!r} outside [-1, 1]")
            sims[key] = float(value)
        return cls(similarities=sims)

    def to_payload(self) -> dict:
        return dict(self.similarities)


@dataclass(frozen=True)
class QualityScores:
    sig: float
    bak: float
    ovrl: float
    p808: float

    @classmethod
    def validate(cls, payload: Any) -> "QualityScores":
        if not isinstance(payload, dict):
            raise MalformedPayloadError("quality payload must be an object")
        values = {}
        for key in QUALITY_KEYS:
            if key not in payload:
                raise MalformedPayloadError(f"quality payload missing {key!r}")
            value = payload[key]
            if not isinstance(value, (int, float)) or not 1.0 <= value <= 5.0:
                raise MalformedPayloadError(
                    f"quality score {key}={value!r} outside [1, 5]")
            values[key] = float(value)
        return cls(**values)

    def to_payload(self) -> dict:
        return {"sig": self.sig, "bak": self.bak, "ovrl": self.ovrl,
                "p808": self.p808}


def validate_payload(feature: Feature, payload: Any):
    """Backend-independent payload validation; returns the typed value."""
    if feature is Feature.ASR:
        if not isinstance(payload, dict) or not isinstance(
                payload.get("text"), str):
            raise MalformedPayloadError('asr payload must be {"text": str}')
        return payload["text"]
    if feature is Feature.EMOTION:
        return EmotionVector.validate(payload)
    if feature is Feature.ACCENT:
        return AccentVector.validate(payload)
    return QualityScores.validate(payload)


class FeatureCache:
    """Content-addressed payload cache with atomic idempotent writes."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, feature: Feature, audio_sha: str, backend_id: str) -> Path:
        backend_digest = hashlib.sha256(backend_id.encode()).hexdigest()[:12]
        return self.root / f"{feature.value}_{audio_sha[:24]}_{backend_digest}.json"

    def get(self, feature: Feature, audio_sha: str, backend_id: str):
        path = self._path(feature, audio_sha, backend_id)
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def put(self, feature: Feature, audio_sha: str, backend_id: str,
            payload: Any) -> None:
        path = self._path(feature, audio_sha, backend_id)
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp, path)


class _PrecomputedIndex:
    """Lazy per-manifest index of {(clip_id, feature) -> payload}.

    Keyed by the backend's content identity, not the path string, so a
    re-written manifest (or an equal relative path in another working
    directory) never serves a stale index.
    """

    def __init__(self):
        self._indexes: dict[str, dict] = {}

    def lookup(self, manifest: str, identity: str, clip_id: str,
               feature: Feature):
        if identity not in self._indexes:
            index = {}
            with open(manifest) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    row = json.loads(line)
                    index[(row["clip_id"], row["feature"])] = row["payload"]
            self._indexes[identity] = index
        try:
            return self._indexes[identity][(clip_id, feature.value)]
        except KeyError:
            raise MissingPrecomputedError(
                f"no {feature.value} payload for clip {clip_id!r} "
                f"in {manifest}") from None


_precomputed = _PrecomputedIndex()


API_KEY_ENV = "TRACE_EVAL_EXTRACTOR_API_KEY"


def _http_fetch(spec: ExtractorSpec, clip: ClipRef,
                client: httpx.Client | None = None) -> Any:
    delay = 0.5
    last_exc: Exception | None = None
    headers = {}
    key = os.environ.get(API_KEY_ENV)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    for attempt in range(spec.max_retries + 1):
        try:
            owned = client is None
            c = client or httpx.Client(timeout=spec.timeout)
            try:
                response = c.post(
                    spec.location,
                    files={"audio": (clip.path.name, clip.path.read_bytes(),
                                     "application/octet-stream")},
                    data={"feature": spec.feature.value,
                          "clip_id": clip.clip_id},
                    headers=headers,
                )
            finally:
                if owned:
                    c.close()
            response.raise_for_status()
            return response.json()
        except (httpx.TimeoutException, httpx.TransportError,
                httpx.HTTPStatusError) as exc:
            last_exc = exc
            if attempt < spec.max_retries:
                time.sleep(delay)
                delay *= 2
    raise FeatureTimeoutError(
        f"{spec.feature.value} backend failed after "
        f"{spec.max_retries + 1} attempts: {last_exc}")


def fetch_feature(spec: ExtractorSpec, clip: ClipRef,
                  cache: FeatureCache | None = None,
                  client: httpx.Client | None = None):
    """Fetch and validate one feature payload for one clip.

    Returns the typed value (str for ASR, EmotionVector, AccentVector, or
    QualityScores). Cached payloads are revalidated, never trusted blindly.
    """
    backend_id = spec.backend_identity()
    if cache is not None:
        hit = cache.get(spec.feature, clip.sha256, backend_id)
        if hit is not None:
            return validate_payload(spec.feature, hit)
    if spec.backend is Backend.PRECOMPUTED_FILE:
        payload = _precomputed.lookup(spec.location, backend_id,
                                      clip.clip_id, spec.feature)
    else:
        payload = _http_fetch(spec, clip, client=client)
    value = validate_payload(spec.feature, payload)
    if cache is not None:
        cache.put(spec.feature, clip.sha256, backend_id, payload)
    return value


@dataclass
class FetchReport:
    """Outcome of a batch fetch; failures are collected, not raised."""

    results: dict = field(default_factory=dict)  # (clip_id, feature) -> value
    failures: list = field(default_factory=list)  # {clip_id, feature, error}


def batch_fetch(specs: list[ExtractorSpec], clips: list[ClipRef],
                cache: FeatureCache | None = None, concurrency: int = 8,
                client: httpx.Client | None = None) -> FetchReport:
    """Fetch every (clip, feature) pair with bounded parallelism."""
    report = FetchReport()
    if not specs or not clips:
        return report

    def job(args):
        spec, clip = args
        try:
            value = fetch_feature(spec, clip, cache=cache, client=client)
            return (clip.clip_id, spec.feature.value), value, None
        except Exception as exc:
            return (clip.clip_id, spec.feature.value), None, exc

    pairs = [(spec, clip) for spec in specs for clip in clips]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        for key, value, exc in pool.map(job, pairs):
            if exc is None:
                report.results[key] = value
            else:
                report.failures.append(
                    {"clip_id": key[0], "feature": key[1],
                     "error": f"{type(exc).__name__}: {exc}"})
    return report
