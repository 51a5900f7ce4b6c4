"""HTTP backend for the annotation UI.

Serves task assignment with optimistic claims, audio by content hash with
range-request support, rating submission with server-side replay of the
five-step procedure, and live agreement summaries. Protocol enforcement
lives here, not in the UI, so stored records stay consistent regardless of
client correctness.
"""

from __future__ import annotations

import random
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import APIRouter, FastAPI, Header, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import stats
from .datastore import AnnotationRecord, ConflictError, Datastore
from .labels import Arity, BadLabelError, parse_rating
from .protocol import PassKind, dims_from_trace, trace_ratings, validate_step_trace

DEFAULT_CLAIM_TTL = 600.0


@dataclass
class ServerConfig:
    annotators: dict[str, str]  # token -> annotator_id
    claim_ttl: float = DEFAULT_CLAIM_TTL
    ui_dist: Path | None = None


@dataclass
class Session:
    session_id: str
    annotator_id: str
    pass_kind: PassKind
    queue: list[str]
    resample_fraction: float | None = None
    resample_seed: int | None = None


@dataclass
class _Claims:
    ttl: float
    by_example: dict = field(default_factory=dict)  # (pass, example) -> (session, expiry)

    def holder(self, pass_kind: PassKind, example_id: str) -> str | None:
        entry = self.by_example.get((pass_kind.value, example_id))
        if entry is None or entry[1] < time.monotonic():
            return None
        return entry[0]

    def claim(self, pass_kind: PassKind, example_id: str,
              session_id: str) -> None:
        self.by_example[(pass_kind.value, example_id)] = (
            session_id, time.monotonic() + self.ttl)


def _error(status: int, code: str, detail) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": code, "detail": detail})


def create_app(store: Datastore, config: ServerConfig) -> FastAPI:
    app = FastAPI(title="annotation server")
    router = APIRouter()
    sessions: dict[str, Session] = {}
    claims = _Claims(ttl=config.claim_ttl)

    def authenticate(token: str | None) -> str | None:
        if token is None:
            return None
        return config.annotators.get(token)

    def rated_examples(annotator_id: str, pass_kind: PassKind) -> set[str]:
        return {r.example_id
                for r in store.load_annotations(pass_kind=pass_kind,
                                                annotator_id=annotator_id)}

    @router.post("/sessions")
    def open_session(payload: dict,
                     x_annotator_token: str | None = Header(default=None)):
        annotator_id = authenticate(x_annotator_token)
        if annotator_id is None:
            return _error(401, "UNAUTHENTICATED", "unknown annotator token")
        try:
            pass_kind = PassKind.from_name(payload.get("pass", ""))
        except ValueError as exc:
            return _error(422, "BAD_PASS", str(exc))
        example_ids = sorted(e.example_id for e in store.examples())
        fraction = None
        seed = None
        if pass_kind is PassKind.HCOT_RESAMPLE:
            fraction = float(payload.get("fraction", 0.2))
            seed = int(payload.get("seed", 0))
            rng = random.Random(seed)
            count = max(1, round(fraction * len(example_ids)))
            example_ids = sorted(rng.sample(example_ids, count))
        done = rated_examples(annotator_id, pass_kind)
        queue = [e for e in example_ids if e not in done]
        session = Session(session_id=uuid.uuid4().hex,
                          annotator_id=annotator_id, pass_kind=pass_kind,
                          queue=queue, resample_fraction=fraction,
                          resample_seed=seed)
        sessions[session.session_id] = session
        return {"session_id": session.session_id, "pass": pass_kind.value,
                "queue_size": len(queue)}

    @router.get("/tasks/next")
    def next_task(session: str,
                  x_annotator_token: str | None = Header(default=None)):
        annotator_id = authenticate(x_annotator_token)
        if annotator_id is None:
            return _error(401, "UNAUTHENTICATED", "unknown annotator token")
        sess = sessions.get(session)
        if sess is None or sess.annotator_id != annotator_id:
            return _error(404, "NO_SESSION", "unknown session id")
        done = rated_examples(annotator_id, sess.pass_kind)
        clips = store.clips()
        # full rescan every call: examples claimed by another session come
        # back into reach here once the optimistic claim expires
        for example_id in sess.queue:
            if example_id in done:
                continue
            holder = claims.holder(sess.pass_kind, example_id)
            if holder not in (None, sess.session_id):
                continue
            claims.claim(sess.pass_kind, example_id, sess.session_id)
            example = store.example(example_id)
            audio = {
                "prompt": f"/audio/{clips[example.prompt_audio]['sha256']}",
                "a": f"/audio/{clips[example.response_a]['sha256']}",
                "b": f"/audio/{clips[example.response_b]['sha256']}",
            }
            # Task descriptors never include prior ratings of any pass.
            return {"example_id": example_id,
                    "pass": sess.pass_kind.value,
                    "dims": list(sess.pass_kind.dims),
                    "audio": audio}
        return Response(status_code=204)

    @router.post("/ratings")
    def submit_rating(payload: dict,
                      x_annotator_token: str | None = Header(default=None)):
        annotator_id = authenticate(x_annotator_token)
        if annotator_id is None:
            return _error(401, "UNAUTHENTICATED", "unknown annotator token")
        sess = sessions.get(payload.get("session_id", ""))
        if sess is None or sess.annotator_id != annotator_id:
            return _error(404, "NO_SESSION", "unknown session id")
        example_id = payload.get("example_id", "")
        if example_id not in sess.queue:
            return _error(422, "PROTOCOL_VIOLATION",
                          [{"step": "assignment",
                            "message": "example is not assigned to this "
                                       "session"}])
        trace = payload.get("step_trace", [])
        violations = validate_step_trace(sess.pass_kind, trace)
        if violations:
            return _error(422, "PROTOCOL_VIOLATION",
                          [v.as_dict() for v in violations])
        ratings = trace_ratings(trace)
        try:
            claimed_overall = parse_rating(str(payload.get("overall", "")))
        except BadLabelError as exc:
            return _error(422, "PROTOCOL_VIOLATION",
                          [{"step": "label", "message": str(exc)}])
        if claimed_overall is not ratings["overall"]:
            return _error(422, "PROTOCOL_VIOLATION",
                          [{"step": "step_trace_mismatch",
                            "message": "overall label contradicts the "
                                       "step trace"}])
        record = AnnotationRecord(
            example_id=example_id,
            annotator_id=annotator_id,
            pass_kind=sess.pass_kind,
            overall=claimed_overall,
            dims=dims_from_trace(trace),
            step_trace=tuple(trace),
            created_at=time.time(),
        )
        try:
            stored = store.append_annotation(record)
        except ConflictError:
            return _error(409, "DUPLICATE",
                          "a different rating already exists for this "
                          "(example, annotator, pass)")
        if not stored:
            return _error(409, "DUPLICATE",
                          "rating already stored for this "
                          "(example, annotator, pass)")
        return JSONResponse(status_code=201,
                            content={"stored": True,
                                     "example_id": example_id})

    @router.get("/agreement")
    def agreement(pass_a: str = "blind", pass_b: str = "hcot"):
        try:
            kind_a = PassKind.from_name(pass_a)
            kind_b = PassKind.from_name(pass_b)
        except ValueError as exc:
            return _error(422, "BAD_PASS", str(exc))
        overall_a = {r.example_id: r.overall
                     for r in store.load_annotations(pass_kind=kind_a)}
        overall_b = {r.example_id: r.overall
                     for r in store.load_annotations(pass_kind=kind_b)}
        shared = sorted(set(overall_a) & set(overall_b))
        if not overall_a or not overall_b or not shared:
            return _error(409, "INSUFFICIENT_DATA",
                          "need two overlapping label sets")
        labels_a = [overall_a[e] for e in shared]
        labels_b = [overall_b[e] for e in shared]
        report: dict = {"pass_a": pass_a, "pass_b": pass_b,
                        "overlap": len(shared), "agreement": {}}
        for arity in (Arity.TWO_WAY, Arity.THREE_WAY, Arity.FOUR_WAY):
            try:
                frac, n = stats.agreement(labels_a, labels_b, arity)
                report["agreement"][f"{arity.value}_way"] = {
                    "percent": round(100.0 * frac, 1), "n": n}
            except stats.EmptyAfterCollapseError:
                report["agreement"][f"{arity.value}_way"] = {
                    "percent": None, "n": 0}
        try:
            kappa, ci, n = stats.cohen_kappa(labels_a, labels_b,
                                             Arity.FOUR_WAY,
                                             replicates=1000, seed=0)
            report["kappa_4way"] = {"value": round(kappa, 3),
                                    "ci": [round(ci.lo, 3), round(ci.hi, 3)],
                                    "n": n}
        except (stats.DegenerateKappaError, stats.EmptyAfterCollapseError):
            report["kappa_4way"] = None
        return report

    app.include_router(router, prefix="/api/v1")
    app.include_router(router, prefix="/api")

    @app.get("/audio/{sha256}")
    def audio(sha256: str, request: Request):
        path = store.clip_by_hash(sha256)
        if path is None or not path.exists():
            return _error(404, "UNKNOWN_AUDIO", sha256)
        data = path.read_bytes()
        media_type = ("audio/flac" if path.suffix.lower() == ".flac"
                      else "audio/wav")
        range_header = request.headers.get("range")
        if range_header and range_header.startswith("bytes="):
            spec = range_header[len("bytes="):].split("-", 1)
            start = int(spec[0]) if spec[0] else 0
            end = int(spec[1]) if len(spec) > 1 and spec[1] else len(data) - 1
            end = min(end, len(data) - 1)
            if start > end or start >= len(data):
                return Response(status_code=416)
            chunk = data[start:end + 1]
            return Response(
                content=chunk, status_code=206, media_type=media_type,
                headers={"Content-Range": f"bytes {start}-{end}/{len(data)}",
                         "Accept-Ranges": "bytes"})
        return Response(content=data, media_type=media_type,
                        headers={"Accept-Ranges": "bytes"})

    if config.ui_dist is not None:
        app.mount("/", StaticFiles(directory=config.ui_dist, html=True),
                  name="ui")
    return app
