"""Operator CLI: composable, idempotent pipeline stages.

Every stage validates its configuration up front, re-runs safely on
unchanged inputs, exits 0 only on full success (2 on partial failure with
a report), and stamps its outputs with the digest of the configuration
that produced them.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click

from . import stats
from .acoustics.audio_io import AudioReadError, UnsupportedFormatError, load_audio
from .acoustics.loudness import AllGatedError
from .acoustics.pitch import NoVoicedFramesError
from .acoustics.prosody import ProsodyFeatures, extract_prosody
from .blueprint import ABLATABLE, build_blueprint, mask_document
from .costing import PriceSheet, accumulate, format_cost_table
from .datastore import Dataset, DatasetLayout, Datastore
from .extractors import (
    AccentVector,
    Backend,
    ClipRef,
    EmotionVector,
    ExtractorSpec,
    Feature,
    FeatureCache,
    QualityScores,
    batch_fetch,
)
from .fusion import FusionPolicy, fuse
from .judge import (
    DecodeParams,
    HTTPChatBackend,
    JudgeMode,
    RateLimiter,
    ReplayBackend,
    render_prompt,
    run_judge,
)
from .labels import Arity, Rating, parse_rating
from .probes import ProbeRow, p1_counterfactual, p2_flip_rates, p3_attribution
from .protocol import PassKind

AUDIO_SUFFIXES = {".wav", ".flac"}


def config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _emit(report: dict, fmt: str, out: str | None, text_renderer=None) -> None:
    payload = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(payload)
    if fmt == "json":
        click.echo(payload, nl=False)
    elif text_renderer is not None:
        click.echo(text_renderer(report))
    else:
        click.echo(payload, nl=False)


def _exit(ok: bool) -> None:
    sys.exit(0 if ok else 2)


def _translate_config(raw: dict) -> dict:
    """Map config keys written as flag names onto click parameter names."""
    mapped = {}
    for cmd_name, table in raw.items():
        command = main.commands.get(cmd_name)
        if command is None or not isinstance(table, dict):
            mapped[cmd_name] = table
            continue
        key_map = {}
        for param in command.params:
            for opt in param.opts:
                key_map[opt.lstrip("-").replace("-", "_")] = param.name
        mapped[cmd_name] = {key_map.get(k, k): v for k, v in table.items()}
    return mapped


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="TOML file with per-subcommand defaults.")
@click.pass_context
def main(ctx, config_path):
    """Speech-to-speech evaluation pipeline."""
    if config_path:
        with open(config_path, "rb") as fh:
            ctx.default_map = _translate_config(tomllib.load(fh))


# ---- ingest ---------------------------------------------------------------

@main.command()
@click.option("--dataset", required=True,
              type=click.Choice([d.value for d in Dataset]))
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--audio-dir", required=True, type=click.Path(exists=True))
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--exclusions", type=click.Path(exists=True), default=None,
              help="File of example ids to flag as few-shot.")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="text")
def ingest(dataset, manifest, audio_dir, store_dir, exclusions, fmt):
    """Register a dataset manifest and its audio."""
    store = Datastore(store_dir)
    layout = DatasetLayout(
        dataset=Dataset.from_name(dataset), manifest=Path(manifest),
        audio_dir=Path(audio_dir),
        exclusion_file=Path(exclusions) if exclusions else None)
    report = store.ingest_dataset(layout)
    config = {"stage": "ingest", "dataset": dataset, "manifest": manifest,
              "audio_dir": audio_dir, "exclusions": exclusions}
    body = {"config": config, "config_digest": config_digest(config),
            **report.as_dict()}

    def text(r):
        lines = [f"registered {r['registered']} examples "
                 f"({r['already_present']} already present, "
                 f"{len(r['excluded'])} excluded, "
                 f"{len(r['errors'])} errors)"]
        lines += [f"  error: {e}" for e in r["errors"]]
        return "\n".join(lines)

    _emit(body, fmt, None, text)
    _exit(report.ok)


# ---- extract --------------------------------------------------------------

def _load_transcripts(path: str | None) -> dict[str, list[str]]:
    words: dict[str, list[str]] = {}
    if path is None:
        return words
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row.get("feature") == "asr":
                words[row["clip_id"]] = row["payload"]["text"].split()
    return words


@main.command()
@click.option("--audio", "audio_dir", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--transcripts", type=click.Path(exists=True), default=None,
              help="features.jsonl with asr rows (for speech rates).")
@click.option("--workers", type=int, default=4)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="text")
def extract(audio_dir, out_dir, transcripts, workers, fmt):
    """Compute prosody features for every WAV/FLAC clip in a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    transcript_words = _load_transcripts(transcripts)
    files = sorted(p for p in Path(audio_dir).iterdir()
                   if p.suffix.lower() in AUDIO_SUFFIXES)
    config = {"stage": "extract", "audio": str(audio_dir), "out": str(out_dir),
              "transcripts": transcripts}
    digest = config_digest(config)
    started = time.monotonic()

    def work(path: Path):
        clip_id = path.stem
        record = {"clip_id": clip_id, "config_digest": digest,
                  "prosody": None, "flag": None}
        try:
            clip = load_audio(path)
            features = extract_prosody(clip,
                                       transcript_words.get(clip_id, []))
            record["prosody"] = features.to_json_dict()
        except NoVoicedFramesError:
            record["flag"] = "no_voiced_frames"
        except AllGatedError:
            record["flag"] = "all_gated"
        except (UnsupportedFormatError, AudioReadError) as exc:
            record["flag"] = "decode_error"
            record["error"] = str(exc)
        (out / f"{clip_id}.prosody.json").write_text(
            json.dumps(record, indent=2, sort_keys=True) + "\n")
        return record

    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(work, files))
    wall = time.monotonic() - started
    # wall-clock meter consumed later by `cost` as the GPU-hours source
    (out / "extract_meter.json").write_text(json.dumps(
        {"config_digest": digest, "wall_seconds": wall,
         "gpu_hours": wall / 3600.0}, indent=2, sort_keys=True) + "\n")
    errors = [r for r in records if r["flag"] == "decode_error"]
    flagged = [r for r in records if r["flag"] in ("no_voiced_frames",
                                                   "all_gated")]
    body = {"config": config, "config_digest": digest,
            "clips": len(records), "null_prosody": len(flagged),
            "errors": errors}
    _emit(body, fmt, None, lambda r: (
        f"extracted {r['clips']} clips "
        f"({r['null_prosody']} null-prosody, {len(r['errors'])} errors)"))
    _exit(not errors)


# ---- fetch-features -------------------------------------------------------

RESPONSE_FEATURES = (Feature.ASR, Feature.EMOTION, Feature.ACCENT, Feature.MOS)


@main.command("fetch-features")
@click.option("--store", "store_dir", required=True,
              type=click.Path(exists=True))
@click.option("--manifest", type=click.Path(exists=True), default=None,
              help="Precomputed features.jsonl backend.")
@click.option("--endpoint", default=None,
              envvar="TRACE_EVAL_EXTRACTOR_ENDPOINT",
              help="HTTP extractor base URL (POST {base}/{feature}).")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--cache", "cache_dir", type=click.Path(), default=None)
@click.option("--concurrency", type=int, default=8)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="text")
def fetch_features(store_dir, manifest, endpoint, out_path, cache_dir,
                   concurrency, fmt):
    """Fetch ASR/emotion/accent/MOS payloads for every registered clip."""
    if (manifest is None) == (endpoint is None):
        raise click.UsageError("exactly one of --manifest / --endpoint")
    store = Datastore(store_dir)
    clips_index = store.clips()
    cache = FeatureCache(cache_dir) if cache_dir else None

    def spec_for(feature: Feature) -> ExtractorSpec:
        if manifest is not None:
            return ExtractorSpec(feature, Backend.PRECOMPUTED_FILE, manifest)
        return ExtractorSpec(feature, Backend.HTTP_SERVICE,
                             f"{endpoint.rstrip('/')}/{feature.value}")

    response_clips = []
    prompt_clips = []
    for example in store.examples():
        for role, bucket in (("prompt_audio", prompt_clips),
                             ("response_a", response_clips),
                             ("response_b", response_clips)):
            clip_id = getattr(example, role)
            entry = clips_index[clip_id]
            bucket.append(ClipRef(clip_id=clip_id, path=Path(entry["path"]),
                                  sha256=entry["sha256"]))

    report = batch_fetch([spec_for(f) for f in RESPONSE_FEATURES],
                         response_clips, cache=cache,
                         concurrency=concurrency)
    prompt_report = batch_fetch([spec_for(Feature.ASR)], prompt_clips,
                                cache=cache, concurrency=concurrency)

    def payload_of(value):
        if isinstance(value, str):
            return {"text": value}
        return value.to_payload()

    rows = []
    for (clip_id, feature), value in sorted(
            {**report.results, **prompt_report.results}.items()):
        rows.append({"clip_id": clip_id, "feature": feature,
                     "payload": payload_of(value)})
    Path(out_path).write_text(
        "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n")
    failures = report.failures + prompt_report.failures
    config = {"stage": "fetch-features", "store": store_dir,
              "manifest": manifest, "endpoint": endpoint}
    body = {"config": config, "config_digest": config_digest(config),
            "fetched": len(rows), "failures": failures}
    _emit(body, fmt, None, lambda r: (
        f"fetched {r['fetched']} payloads, {len(r['failures'])} failures"))
    _exit(not failures)


# ---- blueprint ------------------------------------------------------------

def _load_features(path: str) -> dict[tuple[str, str], dict]:
    table = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            table[(row["clip_id"], row["feature"])] = row["payload"]
    return table


def _load_prosody(prosody_dir: str, clip_id: str,
                  clip_path: Path) -> ProsodyFeatures | None:
    # extract keys prosody files by audio file stem; prefer the store clip
    # id when the corpus follows the <example>__<role> naming convention
    for stem in (clip_id, clip_path.stem):
        path = Path(prosody_dir) / f"{stem}.prosody.json"
        if path.exists():
            record = json.loads(path.read_text())
            if record.get("prosody") is None:
                return None
            return ProsodyFeatures.from_json_dict(record["prosody"])
    return None


@main.command("blueprint")
@click.option("--store", "store_dir", required=True,
              type=click.Path(exists=True))
@click.option("--features", "features_path", required=True,
              type=click.Path(exists=True))
@click.option("--prosody", "prosody_dir", required=True,
              type=click.Path(exists=True))
@click.option("--ablate", type=click.Choice(sorted(ABLATABLE)), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="text")
def blueprint_cmd(store_dir, features_path, prosody_dir, ablate, fmt):
    """Assemble and persist one blueprint per response clip."""
    store = Datastore(store_dir)
    clips = store.clips()
    features = _load_features(features_path)
    ablated = frozenset({ablate}) if ablate else frozenset()
    built = 0
    failures = []
    for example in sorted(store.examples(), key=lambda e: e.example_id):
        for clip_id in (example.response_a, example.response_b):
            try:
                asr = features.get((clip_id, "asr"))
                emotion_raw = features.get((clip_id, "emotion"))
                accent_raw = features.get((clip_id, "accent"))
                mos = features.get((clip_id, "mos"))
                bp = build_blueprint(
                    transcript=asr["text"] if asr else None,
                    emotion=(EmotionVector.validate(emotion_raw)
                             if emotion_raw else None),
                    accent=(AccentVector.validate(accent_raw)
                            if accent_raw else None),
                    quality=(QualityScores.validate(mos) if mos else None),
                    prosody=_load_prosody(prosody_dir, clip_id,
                                          Path(clips[clip_id]["path"])))
                doc = mask_document(bp.to_document(), ablated)
                store.store_blueprint(clip_id, doc, ablated=ablated)
                built += 1
            except Exception as exc:
                failures.append({"clip_id": clip_id,
                                 "error": f"{type(exc).__name__}: {exc}"})
    config = {"stage": "blueprint", "store": store_dir,
              "features": features_path, "prosody": prosody_dir,
              "ablate": ablate}
    body = {"config": config, "config_digest": config_digest(config),
            "built": built, "failures": failures}
    _emit(body, fmt, None, lambda r: (
        f"built {r['built']} blueprints, {len(r['failures'])} failures"))
    _exit(not failures)


# ---- judge ----------------------------------------------------------------

def _make_backend(backend_arg: str, model: str, record_misses: str | None):
    kind, _, location = backend_arg.partition(":")
    if kind == "replay":
        return ReplayBackend(location, record_misses=record_misses)
    if kind == "http":
        return HTTPChatBackend(endpoint=location, model=model,
                               supports_audio=True)
    raise click.UsageError("--backend must be replay:<fixture> or http:<url>")


@main.command("judge")
@click.option("--store", "store_dir", required=True,
              type=click.Path(exists=True))
@click.option("--mode", required=True,
              type=click.Choice([m.value for m in JudgeMode]))
@click.option("--backend", "backend_arg", required=True)
@click.option("--model", default="judge-model")
@click.option("--run-name", required=True)
@click.option("--features", "features_path", type=click.Path(exists=True),
              required=True, help="features.jsonl (asr + blueprint inputs).")
@click.option("--ablate", type=click.Choice(sorted(ABLATABLE)), default=None)
@click.option("--swap-ab", is_flag=True, default=False,
              help="Also judge with response positions swapped; stores a "
                   "second run <run-name>__swapped.")
@click.option("--temperature", type=float, default=0.0)
@click.option("--max-tokens", type=int, default=1024)
@click.option("--rpm", type=float, default=None,
              help="Requests-per-minute limit.")
@click.option("--workers", type=int, default=1,
              help="Concurrent judge calls (share the --rpm limiter).")
@click.option("--record-misses", type=click.Path(), default=None)
@click.option("--prompts-dir", type=click.Path(exists=True), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="text")
def judge_cmd(store_dir, mode, backend_arg, model, run_name, features_path,
              ablate, swap_ab, temperature, max_tokens, rpm, workers,
              record_misses, prompts_dir, fmt):
    """Run the judge over every ingested example and persist the runs."""
    store = Datastore(store_dir)
    judge_mode = JudgeMode.from_name(mode)
    backend = _make_backend(backend_arg, model, record_misses)
    features = _load_features(features_path)
    ablated = frozenset({ablate}) if ablate else frozenset()
    params = DecodeParams(temperature=temperature, max_tokens=max_tokens)
    limiter = RateLimiter(requests_per_minute=rpm) if rpm else None
    raw_dir = store.root / "runs" / "raw"
    clips = store.clips()

    jobs = []
    for example in sorted(store.examples(), key=lambda e: e.example_id):
        jobs.append((run_name, example, example.response_a,
                     example.response_b))
        if swap_ab:
            jobs.append((f"{run_name}__swapped", example,
                         example.response_b, example.response_a))

    def judge_one(job):
        name, example, clip_a, clip_b = job
        try:
            prompt_asr = features.get((example.prompt_audio, "asr")) or {}
            user_prompt = prompt_asr.get("text")
            if judge_mode is JudgeMode.TRACE_BLUEPRINT:
                bundle = render_prompt(
                    judge_mode, user_prompt=user_prompt,
                    blueprint_a=store.load_blueprint_text(clip_a),
                    blueprint_b=store.load_blueprint_text(clip_b),
                    ablated=ablated, template_dir=prompts_dir)
            elif judge_mode is JudgeMode.TRANSCRIPT_ONLY:
                asr_a = features.get((clip_a, "asr"))
                asr_b = features.get((clip_b, "asr"))
                bundle = render_prompt(
                    judge_mode, user_prompt=user_prompt,
                    transcript_a=asr_a["text"] if asr_a else None,
                    transcript_b=asr_b["text"] if asr_b else None,
                    template_dir=prompts_dir)
            else:
                bundle = render_prompt(
                    judge_mode,
                    audio_refs=(str(clips[example.prompt_audio]["path"]),
                                str(clips[clip_a]["path"]),
                                str(clips[clip_b]["path"])),
                    template_dir=prompts_dir)
            run = run_judge(bundle, backend, example.example_id,
                            params=params, raw_dir=raw_dir, limiter=limiter)
            store.append_judge_run(name, run)
            if run.parse_failure is not None:
                return {"example_id": example.example_id, "run": name,
                        "error": f"parse: {run.parse_failure}"}
            return None
        except Exception as exc:
            return {"example_id": example.example_id, "run": name,
                    "error": f"{type(exc).__name__}: {exc}"}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(judge_one, jobs))
    else:
        outcomes = [judge_one(job) for job in jobs]
    failures = [o for o in outcomes if o is not None]
    judged = len(jobs) - len(failures)
    config = {"stage": "judge", "store": store_dir, "mode": mode,
              "backend": backend_arg, "model": model, "run_name": run_name,
              "ablate": ablate, "swap_ab": swap_ab,
              "decode": params.as_dict()}
    body = {"config": config, "config_digest": config_digest(config),
            "judged": judged, "failures": failures}
    _emit(body, fmt, None, lambda r: (
        f"judged {r['judged']} bundles, {len(r['failures'])} failures"))
    _exit(not failures)


# ---- fuse -----------------------------------------------------------------

@main.command("fuse")
@click.option("--store", "store_dir", required=True,
              type=click.Path(exists=True))
@click.option("--runs", "run_name", required=True)
@click.option("--policy", required=True,
              type=click.Choice([p.value for p in FusionPolicy]))
@click.option("--cap", "cap_mode", type=click.Choice(["strict", "lenient"]),
              default="strict")
@click.option("--system", default=None,
              help="Prediction system name (defaults to the run name).")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="text")
def fuse_cmd(store_dir, run_name, policy, cap_mode, system, fmt):
    """Fuse stored dimension scores into overall predictions."""
    store = Datastore(store_dir)
    fusion_policy = FusionPolicy.from_name(policy)
    system = system or run_name
    fused = 0
    failures = []
    for run in sorted(store.load_judge_runs(run_name),
                      key=lambda r: r.example_id):
        if run.parsed is None:
            failures.append({"example_id": run.example_id,
                             "error": f"parse_failure: {run.parse_failure}"})
            continue
        overall = fuse(fusion_policy, run.parsed, cap_mode=cap_mode)
        store.store_prediction(system, run.example_id, overall, run.parsed,
                               policy)
        fused += 1
    config = {"stage": "fuse", "store": store_dir, "runs": run_name,
              "policy": policy, "cap": cap_mode, "system": system}
    body = {"config": config, "config_digest": config_digest(config),
            "fused": fused, "failures": failures}
    _emit(body, fmt, None,
          lambda r: f"fused {r['fused']} runs, {len(r['failures'])} failures")
    _exit(not failures)


# ---- eval -----------------------------------------------------------------

def _truth_labels(store: Datastore, truth_pass: str,
                  truth_file: str | None,
                  annotator: str | None) -> dict[str, Rating]:
    if truth_file is not None:
        labels = {}
        with open(truth_file) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                labels[row["example_id"]] = parse_rating(row["label"])
        return labels
    # Adjudication is an export-time choice: first annotator in sorted
    # order wins unless one is pinned explicitly.
    records = store.load_annotations(
        pass_kind=PassKind.from_name(truth_pass), annotator_id=annotator)
    labels = {}
    for record in sorted(records,
                         key=lambda r: (r.example_id, r.annotator_id)):
        labels.setdefault(record.example_id, record.overall)
    return labels


def _paired_rows(store: Datastore, systems: list[str],
                 truth: dict[str, Rating]) -> list[stats.PairedRow]:
    predictions = {s: store.load_predictions(s) for s in systems}
    rows = []
    for example_id in sorted(truth):
        if all(example_id in predictions[s] for s in systems):
            rows.append(stats.PairedRow(
                example_id=example_id, truth=truth[example_id],
                predictions={s: Rating(predictions[s][example_id]["prediction"])
                             for s in systems}))
    return rows


def _render_eval_text(report: dict) -> str:
    lines = [
        "bootstrap: percentile, "
        f"replicates={report['header']['replicates']}, "
        f"seed={report['header']['seed']}, "
        f"level={report['header']['level']}, "
        f"arity={report['header']['arity']}-way",
    ]
    dims = report.get("dimensions", {})
    if dims:
        lines.append(f"{'System':<24}{'Content':>9}{'VQ':>9}{'Para':>9}"
                     f"{'Overall':>9}{'CI lo':>8}{'CI hi':>8}{'N':>7}")
        for name, entry in report["systems"].items():
            cols = dims.get(name, {})
            def pct(key):
                value = cols.get(key, {}).get("accuracy")
                return f"{100 * value:>9.1f}" if value is not None else f"{'-':>9}"
            lines.append(
                f"{name:<24}{pct('content')}{pct('vq')}{pct('para')}"
                f"{100 * entry['accuracy']:>9.1f}"
                f"{100 * entry['ci'][0]:>8.1f}{100 * entry['ci'][1]:>8.1f}"
                f"{entry['n']:>7}")
    else:
        lines.append(f"{'System':<24}{'Acc %':>8}{'CI lo':>8}{'CI hi':>8}{'N':>7}")
        for name, entry in report["systems"].items():
            lines.append(
                f"{name:<24}{100 * entry['accuracy']:>8.1f}"
                f"{100 * entry['ci'][0]:>8.1f}{100 * entry['ci'][1]:>8.1f}"
                f"{entry['n']:>7}")
    for pair, result in report.get("mcnemar", {}).items():
        lines.append(f"mcnemar {pair}: p={result['p_value']:.4g} "
                     f"(b={result['b']}, c={result['c']})")
    return "\n".join(lines)


def _dimension_accuracies(store: Datastore, system_names: list[str],
                          truth_pass: str,
                          annotator: str | None) -> dict:
    """Per-dimension exact-match accuracy against the truth pass's
    dimension labels (present only for dimension-first passes)."""
    records = store.load_annotations(
        pass_kind=PassKind.from_name(truth_pass), annotator_id=annotator)
    truth_dims: dict[str, dict] = {}
    for record in sorted(records,
                         key=lambda r: (r.example_id, r.annotator_id)):
        if record.dims is not None:
            truth_dims.setdefault(record.example_id, {
                "content": record.dims.content.value,
                "vq": record.dims.voice_quality.value,
                "para": record.dims.paralinguistics.value})
    if not truth_dims:
        return {}
    out: dict = {}
    for name in system_names:
        predictions = store.load_predictions(name)
        shared = sorted(set(truth_dims) & set(predictions))
        if not shared:
            continue
        out[name] = {}
        for dim in ("content", "vq", "para"):
            hits = sum(predictions[e]["dims"][dim] == truth_dims[e][dim]
                       for e in shared)
            out[name][dim] = {"accuracy": hits / len(shared),
                              "n": len(shared)}
    return out


@main.command("eval")
@click.option("--store", "store_dir", required=True,
              type=click.Path(exists=True))
@click.option("--systems", required=True,
              help="Comma-separated prediction system names.")
@click.option("--truth-pass", default="hcot")
@click.option("--truth-annotator", default=None)
@click.option("--truth-file", type=click.Path(exists=True), default=None,
              help="JSONL {example_id, label} overriding annotations.")
@click.option("--arity", type=click.Choice(["2", "3", "4"]), default="4")
@click.option("--seed", type=int, default=0)
@click.option("--replicates", type=int, default=10000)
@click.option("--mcnemar/--no-mcnemar", "with_mcnemar", default=True)
@click.option("--confusion/--no-confusion", "with_confusion", default=False)
@click.option("--export-outcomes", type=click.Path(), default=None,
              help="Also write the merged PairedOutcomes JSONL.")
@click.option("--out", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="text")
def eval_cmd(store_dir, systems, truth_pass, truth_annotator, truth_file,
             arity, seed, replicates, with_mcnemar, with_confusion,
             export_outcomes, out, fmt):
    """Accuracy vs reference labels with paired-bootstrap intervals."""
    store = Datastore(store_dir)
    system_names = [s.strip() for s in systems.split(",") if s.strip()]
    truth = _truth_labels(store, truth_pass, truth_file, truth_annotator)
    rows = _paired_rows(store, system_names, truth)
    if not rows:
        raise click.ClickException("no paired rows (missing predictions "
                                   "or truth labels)")
    if export_outcomes:
        with open(export_outcomes, "w") as fh:
            for row in rows:
                fh.write(json.dumps(
                    {"example_id": row.example_id,
                     "truth": row.truth.value,
                     "predictions": {s: r.value
                                     for s, r in row.predictions.items()}},
                    sort_keys=True) + "\n")
    arity_value = Arity.from_int(int(arity))
    config = {"stage": "eval", "store": store_dir, "systems": system_names,
              "truth_pass": truth_pass, "truth_file": truth_file,
              "arity": int(arity), "seed": seed, "replicates": replicates}
    report: dict = {
        "header": {"config_digest": config_digest(config), "seed": seed,
                   "replicates": replicates, "level": 0.95,
                   "ci_method": "percentile bootstrap",
                   "arity": int(arity), "n_examples": len(rows)},
        "config": config,
        "systems": {},
    }
    correctness = {}
    for name in system_names:
        ci, n = stats.accuracy_with_ci(rows, name, arity_value,
                                       replicates=replicates, seed=seed)
        report["systems"][name] = {"accuracy": ci.point,
                                   "ci": [ci.lo, ci.hi], "n": n}
        correct, retained = stats.match_indicators(rows, name, arity_value)
        correctness[name] = (correct, retained)
    if with_mcnemar and len(system_names) > 1:
        report["mcnemar"] = {}
        for i, a in enumerate(system_names):
            for b in system_names[i + 1:]:
                both = correctness[a][1] & correctness[b][1]
                result = stats.mcnemar(correctness[a][0][both],
                                       correctness[b][0][both])
                report["mcnemar"][f"{a}_vs_{b}"] = {
                    "p_value": result.p_value, "b": result.b, "c": result.c,
                    "no_discordant": result.no_discordant}
    if with_confusion:
        report["confusion"] = {name: stats.confusion(rows, name).as_dict()
                               for name in system_names}
    if truth_file is None:
        dims = _dimension_accuracies(store, system_names, truth_pass,
                                     truth_annotator)
        if dims:
            report["dimensions"] = dims
    _emit(report, fmt, out, _render_eval_text)
    _exit(True)


# ---- probe ----------------------------------------------------------------

@main.command("probe")
@click.option("--store", "store_dir", required=True,
              type=click.Path(exists=True))
@click.option("--which", required=True, type=click.Choice(["p1", "p2", "p3"]))
@click.option("--runs", "run_name", required=True)
@click.option("--policy", required=True,
              type=click.Choice([p.value for p in FusionPolicy]))
@click.option("--cap", "cap_mode", type=click.Choice(["strict", "lenient"]),
              default="strict")
@click.option("--truth-pass", default="hcot")
@click.option("--truth-annotator", default=None)
@click.option("--out-json", type=click.Path(), default=None)
@click.option("--out-csv", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="json")
def probe_cmd(store_dir, which, run_name, policy, cap_mode, truth_pass,
              truth_annotator, out_json, out_csv, fmt):
    """Sensitivity probes over stored judge runs."""
    store = Datastore(store_dir)
    fusion_policy = FusionPolicy.from_name(policy)
    runs = [r for r in sorted(store.load_judge_runs(run_name),
                              key=lambda r: r.example_id)
            if r.parsed is not None]
    truth_records = {
        r.example_id: r for r in store.load_annotations(
            pass_kind=PassKind.from_name(truth_pass),
            annotator_id=truth_annotator)}

    if which in ("p1", "p2"):
        rows = [ProbeRow(example_id=r.example_id, scores=r.parsed,
                         truth_dims=(truth_records[r.example_id].dims
                                     if r.example_id in truth_records
                                     else None))
                for r in runs]
        probe_fn = p1_counterfactual if which == "p1" else p2_flip_rates
        result = probe_fn(rows, fusion_policy, cap_mode=cap_mode)
    else:
        paired = [(fuse(fusion_policy, r.parsed, cap_mode=cap_mode),
                   truth_records[r.example_id].overall)
                  for r in runs if r.example_id in truth_records]
        try:
            result = p3_attribution([p for p, _ in paired],
                                    [t for _, t in paired], fusion_policy)
        except stats.EmptySliceError as exc:
            raise click.ClickException(f"EMPTY_SLICE: {exc}") from exc

    config = {"stage": "probe", "store": store_dir, "which": which,
              "runs": run_name, "policy": policy, "cap": cap_mode}
    body = {"config": config, "config_digest": config_digest(config),
            **result.as_dict()}
    if out_csv:
        lines = ["metric,key,value"]
        for key, value in sorted(result.aggregates.items()):
            if isinstance(value, dict):
                lines += [f"{key},{k},{v}" for k, v in sorted(value.items())]
            else:
                lines.append(f"{key},,{value}")
        Path(out_csv).write_text("\n".join(lines) + "\n")
    _emit(body, fmt, out_json, None)
    _exit(True)


# ---- cost -----------------------------------------------------------------

@main.command("cost")
@click.option("--store", "store_dir", required=True,
              type=click.Path(exists=True))
@click.option("--prices", required=True, type=click.Path(exists=True),
              help="TOML with [rates] per-million and GPU rates.")
@click.option("--gpu-hours", type=float, default=None)
@click.option("--meter", type=click.Path(exists=True), default=None,
              help="extract_meter.json supplying measured GPU hours.")
@click.option("--runs", "run_names", default=None,
              help="Comma-separated run names (default: all).")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="text")
def cost_cmd(store_dir, prices, gpu_hours, meter, run_names, fmt):
    """Aggregate token usage into a cost report per run."""
    store = Datastore(store_dir)
    with open(prices, "rb") as fh:
        sheet = PriceSheet.from_dict(tomllib.load(fh)["rates"])
    if meter is not None and gpu_hours is None:
        gpu_hours = json.loads(Path(meter).read_text())["gpu_hours"]
    gpu_hours = gpu_hours or 0.0
    names = ([n.strip() for n in run_names.split(",")]
             if run_names else store.run_names())
    reports = {}
    for name in names:
        usages = [run.usage for run in store.load_judge_runs(name)]
        reports[name] = accumulate(usages, gpu_hours, sheet)
    config = {"stage": "cost", "store": store_dir, "prices": prices,
              "gpu_hours": gpu_hours, "runs": names}
    body = {"config": config, "config_digest": config_digest(config),
            "reports": {name: r.as_dict(decimals=3)
                        for name, r in reports.items()},
            "exact": {name: r.as_dict() for name, r in reports.items()}}
    _emit(body, fmt, None, lambda r: format_cost_table(reports))
    _exit(True)


# ---- agree ----------------------------------------------------------------

@main.command("agree")
@click.option("--store", "store_dir", required=True,
              type=click.Path(exists=True))
@click.option("--pass-a", default="blind")
@click.option("--pass-b", default="hcot")
@click.option("--annotator-a", default=None)
@click.option("--annotator-b", default=None)
@click.option("--seed", type=int, default=0)
@click.option("--replicates", type=int, default=10000)
@click.option("--out", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="text")
def agree_cmd(store_dir, pass_a, pass_b, annotator_a, annotator_b, seed,
              replicates, out, fmt):
    """Agreement and Cohen's kappa between two annotation passes."""
    store = Datastore(store_dir)
    side_a = {r.example_id: r.overall for r in store.load_annotations(
        pass_kind=PassKind.from_name(pass_a), annotator_id=annotator_a)}
    side_b = {r.example_id: r.overall for r in store.load_annotations(
        pass_kind=PassKind.from_name(pass_b), annotator_id=annotator_b)}
    shared = sorted(set(side_a) & set(side_b))
    if not shared:
        raise click.ClickException("no overlapping examples between passes")
    labels_a = [side_a[e] for e in shared]
    labels_b = [side_b[e] for e in shared]
    config = {"stage": "agree", "store": store_dir, "pass_a": pass_a,
              "pass_b": pass_b, "seed": seed, "replicates": replicates}
    report: dict = {
        "header": {"config_digest": config_digest(config), "seed": seed,
                   "replicates": replicates,
                   "ci_method": "percentile bootstrap"},
        "config": config, "overlap": len(shared), "agreement": {},
        "kappa": {},
    }
    for arity in (Arity.TWO_WAY, Arity.THREE_WAY, Arity.FOUR_WAY):
        key = f"{arity.value}_way"
        try:
            frac, n = stats.agreement(labels_a, labels_b, arity)
            report["agreement"][key] = {"percent": 100.0 * frac, "n": n}
        except stats.EmptyAfterCollapseError:
            report["agreement"][key] = {"percent": None, "n": 0}
        try:
            kappa, ci, n = stats.cohen_kappa(labels_a, labels_b, arity,
                                             replicates=replicates, seed=seed)
            report["kappa"][key] = {"value": kappa, "ci": [ci.lo, ci.hi],
                                    "n": n}
        except (stats.DegenerateKappaError,
                stats.EmptyAfterCollapseError) as exc:
            report["kappa"][key] = {"value": None,
                                    "error": type(exc).__name__}

    def text(r):
        lines = [f"overlap: {r['overlap']} examples"]
        for key in ("2_way", "3_way", "4_way"):
            agreement = r["agreement"][key]
            kappa = r["kappa"][key]
            pct = ("-" if agreement["percent"] is None
                   else f"{agreement['percent']:.1f}%")
            kv = ("-" if kappa.get("value") is None
                  else f"{kappa['value']:.3f} "
                       f"[{kappa['ci'][0]:.3f}, {kappa['ci'][1]:.3f}]")
            lines.append(f"{key}: agreement {pct} (N={agreement['n']}), "
                         f"kappa {kv}")
        return "\n".join(lines)

    _emit(report, fmt, out, text)
    _exit(True)


# ---- serve ----------------------------------------------------------------

@main.command("serve")
@click.option("--store", "store_dir", required=True,
              type=click.Path(exists=True))
@click.option("--tokens", "tokens_path", required=True,
              type=click.Path(exists=True),
              help="TOML with [annotators] token = annotator_id.")
@click.option("--ui-dist", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve_cmd(store_dir, tokens_path, ui_dist, host, port):
    """Start the annotation backend (and static UI, when built)."""
    import uvicorn

    from .server import ServerConfig, create_app

    with open(tokens_path, "rb") as fh:
        annotators = tomllib.load(fh)["annotators"]
    app = create_app(Datastore(store_dir), ServerConfig(
        annotators=annotators,
        ui_dist=Path(ui_dist) if ui_dist else None))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
