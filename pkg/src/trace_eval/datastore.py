"""Corpus and result persistence: a directory tree of JSONL segments plus
a clip index. Writes are append-only and keyed; re-writing identical
content is a no-op, differing content is a conflict. Audio is referenced
by content hash and relative path, never copied.
"""

from __future__ import annotations

import enum
import fcntl
import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .blueprint import serialize_blueprint, validate_blueprint
from .judge.runner import JudgeRun
from .labels import DimScores, Rating, is_winner
from .protocol import PassKind


class ConflictError(ValueError):
    """A keyed record was re-written with different content."""


class Dataset(enum.Enum):
    SPEAKBENCH = "speakbench"
    S2S_ARENA = "s2s_arena"
    CUSTOM = "custom"

    @classmethod
    def from_name(cls, name: str) -> "Dataset":
        for d in cls:
            if d.value == name:
                return d
        raise ValueError(f"unknown dataset {name!r}")


@dataclass(frozen=True)
class EvalExample:
    example_id: str
    prompt_audio: str  # clip ids
    response_a: str
    response_b: str
    dataset: Dataset
    original_label: str | None = None
    flags: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {"example_id": self.example_id,
                "prompt_audio": self.prompt_audio,
                "response_a": self.response_a,
                "response_b": self.response_b,
                "dataset": self.dataset.value,
                "original_label": self.original_label,
                "flags": list(self.flags)}

    @classmethod
    def from_record(cls, record: dict) -> "EvalExample":
        return cls(example_id=record["example_id"],
                   prompt_audio=record["prompt_audio"],
                   response_a=record["response_a"],
                   response_b=record["response_b"],
                   dataset=Dataset(record["dataset"]),
                   original_label=record.get("original_label"),
                   flags=tuple(record.get("flags", [])))


@dataclass(frozen=True)
class AnnotationRecord:
    example_id: str
    annotator_id: str
    pass_kind: PassKind
    overall: Rating
    dims: DimScores | None = None  # absent for blind passes
    step_trace: tuple = ()
    created_at: float = 0.0

    def __post_init__(self):
        if self.pass_kind is PassKind.BLIND_OVERALL_FIRST:
            if self.dims is not None:
                raise ValueError("blind passes carry the overall label only")
        elif self.dims is None:
            raise ValueError("HCoT passes must include all three dimensions")

    def to_record(self) -> dict:
        dims = None
        if self.dims is not None:
            dims = {"content": self.dims.content.value,
                    "vq": self.dims.voice_quality.value,
                    "para": self.dims.paralinguistics.value}
        return {"example_id": self.example_id,
                "annotator_id": self.annotator_id,
                "pass": self.pass_kind.value,
                "overall": self.overall.value,
                "dims": dims,
                "step_trace": list(self.step_trace),
                "created_at": self.created_at}

    @classmethod
    def from_record(cls, record: dict) -> "AnnotationRecord":
        dims = record.get("dims")
        scores = None
        if dims is not None:
            scores = DimScores(content=Rating(dims["content"]),
                               voice_quality=Rating(dims["vq"]),
                               paralinguistics=Rating(dims["para"]))
        return cls(example_id=record["example_id"],
                   annotator_id=record["annotator_id"],
                   pass_kind=PassKind(record["pass"]),
                   overall=Rating(record["overall"]),
                   dims=scores,
                   step_trace=tuple(record.get("step_trace", [])),
                   created_at=record.get("created_at", 0.0))


def _stable(record: dict, volatile: tuple[str, ...]) -> str:
    return json.dumps({k: v for k, v in record.items() if k not in volatile},
                      sort_keys=True)


class KeyedJsonlStore:
    """Append-only JSONL segment with key-level idempotency.

    Single writer per segment via an advisory file lock plus an in-process
    lock; any number of concurrent readers.
    """

    def __init__(self, path: Path, key_fields: tuple[str, ...],
                 volatile_fields: tuple[str, ...] = ()):
        self.path = path
        self.key_fields = key_fields
        self.volatile_fields = volatile_fields
        self._lock = threading.Lock()

    def _key(self, record: dict):
        return tuple(record[k] for k in self.key_fields)

    def load(self) -> dict:
        rows = {}
        if not self.path.exists():
            return rows
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                rows[self._key(record)] = record
        return rows

    def append(self, record: dict) -> bool:
        """Store one record; returns False for an idempotent duplicate."""
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a+") as fh:
                fcntl.flock(fh, fcntl.LOCK_EX)
                try:
                    fh.seek(0)
                    existing = None
                    key = self._key(record)
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        row = json.loads(line)
                        if self._key(row) == key:
                            existing = row
                    if existing is not None:
                        if (_stable(existing, self.volatile_fields)
                                == _stable(record, self.volatile_fields)):
                            return False
                        raise ConflictError(
                            f"{self.path.name}: key {key} already stored "
                            "with different content")
                    fh.seek(0, 2)
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
                    fh.flush()
                    return True
                finally:
                    fcntl.flock(fh, fcntl.LOCK_UN)


@dataclass
class IngestReport:
    registered: int = 0
    already_present: int = 0
    excluded: list = field(default_factory=list)  # expected skips
    errors: list = field(default_factory=list)  # malformed / missing audio

    @property
    def ok(self) -> bool:
        return not self.errors

    def as_dict(self) -> dict:
        return {"registered": self.registered,
                "already_present": self.already_present,
                "excluded": self.excluded, "errors": self.errors}


@dataclass(frozen=True)
class DatasetLayout:
    dataset: Dataset
    manifest: Path
    audio_dir: Path
    exclusion_file: Path | None = None  # extra example ids to flag few-shot


_ORIGINAL_LABELS = {
    Dataset.SPEAKBENCH: {"1", "2", "tie"},
    Dataset.S2S_ARENA: {"1", "2"},
    Dataset.CUSTOM: {"1", "2", "tie", "both_good", "both_bad"},
}
_ENGLISH = {"en", "english"}


class Datastore:
    """Root-directory handle over examples, clips, blueprints, runs, and
    annotations."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "blueprints").mkdir(exist_ok=True)
        (self.root / "runs").mkdir(exist_ok=True)
        (self.root / "annotations").mkdir(exist_ok=True)
        (self.root / "predictions").mkdir(exist_ok=True)
        self._examples = KeyedJsonlStore(self.root / "examples.jsonl",
                                         ("example_id",))
        self._lock = threading.Lock()

    # ---- clips ----------------------------------------------------------

    def _clips_path(self) -> Path:
        return self.root / "clips.json"

    def clips(self) -> dict[str, dict]:
        path = self._clips_path()
        if not path.exists():
            return {}
        return json.loads(path.read_text())

    @staticmethod
    def _register_into(clips: dict, clip_id: str, path: Path,
                       digest: str) -> bool:
        existing = clips.get(clip_id)
        if existing is not None:
            if existing["sha256"] != digest:
                raise ConflictError(
                    f"clip {clip_id!r} already registered with different "
                    "content")
            return False
        clips[clip_id] = {"path": str(path), "sha256": digest}
        return True

    def _write_clips(self, clips: dict) -> None:
        self._clips_path().write_text(
            json.dumps(clips, indent=2, sort_keys=True) + "\n")

    def register_clip(self, clip_id: str, path: Path) -> str:
        """Record a clip by content hash; returns the hash."""
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        with self._lock:
            clips = self.clips()
            if self._register_into(clips, clip_id, path, digest):
                self._write_clips(clips)
        return digest

    def clip_path(self, clip_id: str) -> Path:
        return Path(self.clips()[clip_id]["path"])

    def clip_by_hash(self, sha256: str) -> Path | None:
        for entry in self.clips().values():
            if entry["sha256"] == sha256:
                return Path(entry["path"])
        return None

    # ---- examples -------------------------------------------------------

    def ingest_dataset(self, layout: DatasetLayout) -> IngestReport:
        """Register a manifest, applying the dataset's exclusion rules.

        Row-level problems (malformed rows, missing audio) are collected in
        the report, not raised; re-ingesting unchanged content is a no-op.
        """
        report = IngestReport()
        excluded_ids: set[str] = set()
        if layout.exclusion_file is not None:
            excluded_ids = {
                line.strip()
                for line in Path(layout.exclusion_file).read_text().splitlines()
                if line.strip()}
        with self._lock:
            clips = self.clips()
            clips_dirty = False
            digests: dict[Path, str] = {}  # per-call memo; rows share files
            with open(layout.manifest) as fh:
                for line_no, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        row = json.loads(line)
                    except json.JSONDecodeError as exc:
                        report.errors.append(
                            {"line": line_no, "reason": "MALFORMED_MANIFEST",
                             "detail": str(exc)})
                        continue
                    clips_dirty |= self._ingest_row(
                        layout, row, line_no, excluded_ids, report, clips,
                        digests)
            if clips_dirty:
                self._write_clips(clips)
        return report

    def _ingest_row(self, layout: DatasetLayout, row: dict, line_no: int,
                    excluded_ids: set[str], report: IngestReport,
                    clips: dict, digests: dict) -> bool:
        required = ("example_id", "prompt_audio", "response_a", "response_b")
        missing = [k for k in required if not row.get(k)]
        if missing:
            report.errors.append(
                {"line": line_no, "reason": "MALFORMED_MANIFEST",
                 "detail": f"missing fields {missing}"})
            return False
        example_id = row["example_id"]
        flags = list(row.get("flags", []))
        if example_id in excluded_ids and "few_shot" not in flags:
            flags.append("few_shot")

        if layout.dataset is Dataset.SPEAKBENCH and "few_shot" in flags:
            report.excluded.append({"example_id": example_id,
                                    "reason": "few_shot"})
            return False
        if layout.dataset is Dataset.S2S_ARENA:
            language = str(row.get("language", "")).lower()
            if language not in _ENGLISH:
                report.excluded.append({"example_id": example_id,
                                        "reason": "non_english"})
                return False

        label = row.get("original_label")
        if label is not None and label not in _ORIGINAL_LABELS[layout.dataset]:
            report.errors.append(
                {"line": line_no, "reason": "MALFORMED_MANIFEST",
                 "detail": f"original_label {label!r} invalid for "
                           f"{layout.dataset.value}"})
            return False

        clip_ids = {}
        clips_dirty = False
        for role in ("prompt_audio", "response_a", "response_b"):
            audio_path = Path(layout.audio_dir) / row[role]
            if not audio_path.exists():
                report.errors.append(
                    {"line": line_no, "example_id": example_id,
                     "reason": "MISSING_AUDIO", "detail": str(audio_path)})
                return clips_dirty
            if audio_path not in digests:
                digests[audio_path] = hashlib.sha256(
                    audio_path.read_bytes()).hexdigest()
            clip_id = f"{example_id}__{role}"
            clips_dirty |= self._register_into(clips, clip_id, audio_path,
                                               digests[audio_path])
            clip_ids[role] = clip_id

        example = EvalExample(
            example_id=example_id,
            prompt_audio=clip_ids["prompt_audio"],
            response_a=clip_ids["response_a"],
            response_b=clip_ids["response_b"],
            dataset=layout.dataset,
            original_label=label,
            flags=tuple(flags))
        if self._examples.append(example.to_record()):
            report.registered += 1
        else:
            report.already_present += 1
        return clips_dirty

    def examples(self) -> list[EvalExample]:
        return [EvalExample.from_record(r)
                for r in self._examples.load().values()]

    def example(self, example_id: str) -> EvalExample:
        record = self._examples.load()[(example_id,)]
        return EvalExample.from_record(record)

    # ---- blueprints -----------------------------------------------------

    def store_blueprint(self, clip_id: str, doc: dict,
                        ablated: frozenset[str] = frozenset()) -> Path:
        violations = validate_blueprint(doc, ablated=ablated)
        if violations:
            raise ValueError("invalid blueprint for "
                             f"{clip_id}: {'; '.join(map(str, violations))}")
        text = serialize_blueprint(doc)
        path = self.root / "blueprints" / f"{clip_id}.blueprint.json"
        if path.exists():
            if path.read_text() == text:
                return path
            raise ConflictError(f"blueprint {clip_id} already stored with "
                                "different content")
        path.write_text(text)
        return path

    def load_blueprint_text(self, clip_id: str) -> str:
        path = self.root / "blueprints" / f"{clip_id}.blueprint.json"
        return path.read_text()

    def blueprint_ids(self) -> list[str]:
        return sorted(p.name.removesuffix(".blueprint.json")
                      for p in (self.root / "blueprints").glob(
                          "*.blueprint.json"))

    # ---- judge runs -----------------------------------------------------

    def runs_store(self, run_name: str) -> KeyedJsonlStore:
        return KeyedJsonlStore(
            self.root / "runs" / f"{run_name}.jsonl",
            key_fields=("example_id",),
            volatile_fields=("started_at", "finished_at"))

    def append_judge_run(self, run_name: str, run: JudgeRun) -> bool:
        example_ids = {e.example_id for e in self.examples()}
        if run.example_id not in example_ids:
            raise ValueError(
                f"judge run references unknown example {run.example_id!r}")
        return self.runs_store(run_name).append(run.to_record())

    def load_judge_runs(self, run_name: str) -> list[JudgeRun]:
        rows = self.runs_store(run_name).load()
        runs = [JudgeRun.from_record(r) for r in rows.values()]
        known = {e.example_id for e in self.examples()}
        orphans = sorted({r.example_id for r in runs} - known)
        if orphans:
            raise ValueError(
                f"run {run_name!r} references unknown examples: {orphans}")
        return runs

    def run_names(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "runs").glob("*.jsonl"))

    # ---- predictions ----------------------------------------------------

    def predictions_store(self, system: str) -> KeyedJsonlStore:
        return KeyedJsonlStore(self.root / "predictions" / f"{system}.jsonl",
                               key_fields=("example_id",))

    def store_prediction(self, system: str, example_id: str, overall: Rating,
                         dims: DimScores, policy: str) -> bool:
        return self.predictions_store(system).append({
            "example_id": example_id,
            "prediction": overall.value,
            "dims": {"content": dims.content.value,
                     "vq": dims.voice_quality.value,
                     "para": dims.paralinguistics.value},
            "policy": policy})

    def load_predictions(self, system: str) -> dict[str, dict]:
        return {k[0]: v
                for k, v in self.predictions_store(system).load().items()}

    def prediction_systems(self) -> list[str]:
        return sorted(p.stem
                      for p in (self.root / "predictions").glob("*.jsonl"))

    # ---- annotations ----------------------------------------------------

    def annotations_store(self, pass_kind: PassKind,
                          annotator_id: str) -> KeyedJsonlStore:
        return KeyedJsonlStore(
            self.root / "annotations" /
            f"{pass_kind.value}__{annotator_id}.jsonl",
            key_fields=("example_id", "annotator_id", "pass"),
            volatile_fields=("created_at",))

    def append_annotation(self, record: AnnotationRecord) -> bool:
        return self.annotations_store(
            record.pass_kind, record.annotator_id).append(record.to_record())

    def load_annotations(self, pass_kind: PassKind | None = None,
                         annotator_id: str | None = None
                         ) -> list[AnnotationRecord]:
        records = []
        for path in sorted((self.root / "annotations").glob("*.jsonl")):
            kind, _, annotator = path.stem.partition("__")
            if pass_kind is not None and kind != pass_kind.value:
                continue
            if annotator_id is not None and annotator != annotator_id:
                continue
            store = KeyedJsonlStore(path,
                                    ("example_id", "annotator_id", "pass"),
                                    volatile_fields=("created_at",))
            records.extend(AnnotationRecord.from_record(r)
                           for r in store.load().values())
        return records

    def annotation_counts(self, dataset: Dataset,
                          pass_kind: PassKind = PassKind.HCOT) -> dict:
        """Per-dimension (both_bad, winner, both_good) tallies; winners of
        either side are merged into one column."""
        example_datasets = {e.example_id: e.dataset for e in self.examples()}
        counts = {dim: {"both_bad": 0, "winner": 0, "both_good": 0}
                  for dim in ("content", "vq", "para", "overall")}

        def bucket(r: Rating) -> str:
            if is_winner(r):
                return "winner"
            return "both_bad" if r is Rating.BOTH_BAD else "both_good"

        for record in self.load_annotations(pass_kind=pass_kind):
            if example_datasets.get(record.example_id) != dataset:
                continue
            counts["overall"][bucket(record.overall)] += 1
            if record.dims is not None:
                counts["content"][bucket(record.dims.content)] += 1
                counts["vq"][bucket(record.dims.voice_quality)] += 1
                counts["para"][bucket(record.dims.paralinguistics)] += 1
        return counts
