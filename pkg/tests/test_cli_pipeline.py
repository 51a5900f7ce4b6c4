"""End-to-end pipeline runs over the synthetic corpus via the CLI."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from trace_eval.cli import main
from tests.pipeline_helpers import build_corpus, build_replay_fixture, expected_accuracy

runner = CliRunner()


def invoke(args, cwd):
    import os
    old = os.getcwd()
    os.chdir(cwd)
    try:
        result = runner.invoke(main, args, catch_exceptions=False)
    finally:
        os.chdir(old)
    return result


def run_pipeline(root: Path, n_examples=8, replicates=300):
    paths = build_corpus(root, n_examples=n_examples)
    steps = [
        ["ingest", "--dataset", "speakbench", "--manifest", paths["manifest"],
         "--audio-dir", paths["audio"], "--store", "store"],
        ["fetch-features", "--store", "store", "--manifest",
         paths["raw_features"], "--out", "features.jsonl",
         "--cache", "feature_cache"],
        ["extract", "--audio", paths["audio"], "--out", "prosody",
         "--transcripts", "features.jsonl"],
        ["blueprint", "--store", "store", "--features", "features.jsonl",
         "--prosody", "prosody"],
    ]
    for step in steps:
        result = invoke(step, root)
        assert result.exit_code == 0, (step, result.output)
    build_replay_fixture(root)
    tail = [
        ["judge", "--store", "store", "--mode", "trace", "--backend",
         "replay:fixture.jsonl", "--features", "features.jsonl",
         "--run-name", "trace_main"],
        ["fuse", "--store", "store", "--runs", "trace_main", "--policy",
         "speakbench_tree"],
        ["eval", "--store", "store", "--systems", "trace_main",
         "--truth-file", "truth.jsonl", "--arity", "4", "--seed", "0",
         "--replicates", str(replicates), "--format", "json",
         "--out", "report.json"],
    ]
    for step in tail:
        result = invoke(step, root)
        assert result.exit_code == 0, (step, result.output)
    return json.loads((root / "report.json").read_text())


def test_full_pipeline_accuracy_matches_hand_count(tmp_path):
    report = run_pipeline(tmp_path / "run", n_examples=8)
    entry = report["systems"]["trace_main"]
    assert entry["n"] == 8
    assert entry["accuracy"] == pytest.approx(expected_accuracy(8))
    assert report["header"]["ci_method"] == "percentile bootstrap"


def test_pipeline_is_deterministic_across_roots(tmp_path):
    a = run_pipeline(tmp_path / "a", n_examples=6, replicates=200)
    b = run_pipeline(tmp_path / "b", n_examples=6, replicates=200)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_rerunning_stages_is_idempotent(tmp_path):
    root = tmp_path / "run"
    run_pipeline(root, n_examples=4, replicates=100)
    # re-run every stage in place; nothing should conflict or change
    for step in (
        ["ingest", "--dataset", "speakbench", "--manifest", "manifest.jsonl",
         "--audio-dir", "audio", "--store", "store"],
        ["blueprint", "--store", "store", "--features", "features.jsonl",
         "--prosody", "prosody"],
        ["judge", "--store", "store", "--mode", "trace", "--backend",
         "replay:fixture.jsonl", "--features", "features.jsonl",
         "--run-name", "trace_main"],
        ["fuse", "--store", "store", "--runs", "trace_main", "--policy",
         "speakbench_tree"],
    ):
        result = invoke(step, root)
        assert result.exit_code == 0, (step, result.output)


def test_judge_records_misses_for_unknown_bundles(tmp_path):
    root = tmp_path / "run"
    paths = build_corpus(root, n_examples=2)
    for step in (
        ["ingest", "--dataset", "speakbench", "--manifest", paths["manifest"],
         "--audio-dir", paths["audio"], "--store", "store"],
        ["fetch-features", "--store", "store", "--manifest",
         paths["raw_features"], "--out", "features.jsonl"],
        ["extract", "--audio", paths["audio"], "--out", "prosody",
         "--transcripts", "features.jsonl"],
        ["blueprint", "--store", "store", "--features", "features.jsonl",
         "--prosody", "prosody"],
    ):
        assert invoke(step, root).exit_code == 0
    (root / "empty.jsonl").write_text("")
    result = invoke(
        ["judge", "--store", "store", "--mode", "trace", "--backend",
         "replay:empty.jsonl", "--features", "features.jsonl",
         "--run-name", "r", "--record-misses", "misses.jsonl"], root)
    assert result.exit_code == 2
    misses = [json.loads(l) for l in
              (root / "misses.jsonl").read_text().splitlines()]
    assert len(misses) == 2


def test_transcript_mode_judge(tmp_path):
    root = tmp_path / "run"
    paths = build_corpus(root, n_examples=2)
    for step in (
        ["ingest", "--dataset", "speakbench", "--manifest", paths["manifest"],
         "--audio-dir", paths["audio"], "--store", "store"],
        ["fetch-features", "--store", "store", "--manifest",
         paths["raw_features"], "--out", "features.jsonl"],
    ):
        assert invoke(step, root).exit_code == 0
    # fixture keyed on transcript-mode digests
    from trace_eval.datastore import Datastore
    from trace_eval.judge import JudgeMode, render_prompt
    store = Datastore(root / "store")
    features = {}
    for line in (root / "features.jsonl").read_text().splitlines():
        row = json.loads(line)
        features[(row["clip_id"], row["feature"])] = row["payload"]
    rows = []
    for example in store.examples():
        bundle = render_prompt(
            JudgeMode.TRANSCRIPT_ONLY,
            user_prompt=features[(example.prompt_audio, "asr")]["text"],
            transcript_a=features[(example.response_a, "asr")]["text"],
            transcript_b=features[(example.response_b, "asr")]["text"])
        rows.append({"digest": bundle.digest(),
                     "response": '{"content": "1", "voice_quality": "1", '
                                 '"instruction_following_audio": "1"}'})
    (root / "tx.jsonl").write_text(
        "\n".join(json.dumps(r) for r in rows) + "\n")
    result = invoke(
        ["judge", "--store", "store", "--mode", "transcript", "--backend",
         "replay:tx.jsonl", "--features", "features.jsonl",
         "--run-name", "llm_judge"], root)
    assert result.exit_code == 0, result.output
    assert len(store.load_judge_runs("llm_judge")) == 2


def test_cost_command_reads_meter_and_prices(tmp_path):
    root = tmp_path / "run"
    run_pipeline(root, n_examples=4, replicates=100)
    (root / "prices.toml").write_text(
        "[rates]\ntext_in_per_million = 2.5\naudio_in_per_million = 100.0\n"
        "text_out_per_million = 10.0\ngpu_rate_per_hour = 0.404\n")
    result = invoke(
        ["cost", "--store", "store", "--prices", "prices.toml",
         "--meter", "prosody/extract_meter.json", "--format", "json"], root)
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert "trace_main" in body["reports"]
    report = body["exact"]["trace_main"]
    assert report["total"] == pytest.approx(
        report["gpu_cost"] + report["api_cost"], abs=1e-9)
    # usage: 4 runs x (1000+i text_in, 50 out) at the configured rates
    expected_text_in = sum(1000 + i for i in range(4)) / 1e6 * 2.5
    assert report["text_in_cost"] == pytest.approx(expected_text_in)


def test_probe_command_outputs(tmp_path):
    root = tmp_path / "run"
    run_pipeline(root, n_examples=8, replicates=100)
    # probes need HCoT-style truth; use annotations via the truth file path
    result = invoke(
        ["probe", "--store", "store", "--which", "p2", "--runs",
         "trace_main", "--policy", "speakbench_tree",
         "--out-csv", "p2.csv", "--format", "json"], root)
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert set(body["aggregates"]["flip_rates"]) == {"content", "vq", "para"}
    csv_text = (root / "p2.csv").read_text()
    assert csv_text.startswith("metric,key,value")


def test_eval_exports_outcomes_jsonl(tmp_path):
    root = tmp_path / "run"
    paths = build_corpus(root, n_examples=4)
    for step in (
        ["ingest", "--dataset", "speakbench", "--manifest", paths["manifest"],
         "--audio-dir", paths["audio"], "--store", "store"],
        ["fetch-features", "--store", "store", "--manifest",
         paths["raw_features"], "--out", "features.jsonl"],
        ["extract", "--audio", paths["audio"], "--out", "prosody",
         "--transcripts", "features.jsonl"],
        ["blueprint", "--store", "store", "--features", "features.jsonl",
         "--prosody", "prosody"],
    ):
        assert invoke(step, root).exit_code == 0
    build_replay_fixture(root)
    for step in (
        ["judge", "--store", "store", "--mode", "trace", "--backend",
         "replay:fixture.jsonl", "--features", "features.jsonl",
         "--run-name", "trace_main"],
        ["fuse", "--store", "store", "--runs", "trace_main", "--policy",
         "speakbench_tree"],
        ["eval", "--store", "store", "--systems", "trace_main",
         "--truth-file", "truth.jsonl", "--replicates", "100",
         "--export-outcomes", "outcomes.jsonl", "--format", "json"],
    ):
        assert invoke(step, root).exit_code == 0
    outcomes = [json.loads(l) for l in
                (root / "outcomes.jsonl").read_text().splitlines()]
    assert len(outcomes) == 4
    assert set(outcomes[0]) == {"example_id", "truth", "predictions"}


def test_unknown_policy_is_a_usage_error(tmp_path):
    root = tmp_path / "run"
    build_corpus(root, n_examples=1)
    (root / "store").mkdir()
    result = invoke(["fuse", "--store", "store", "--runs", "x",
                     "--policy", "bradley_terry"], root)
    assert result.exit_code == 2
    assert "policy" in result.output


def test_config_file_supplies_defaults(tmp_path):
    root = tmp_path / "run"
    paths = build_corpus(root, n_examples=1)
    (root / "conf.toml").write_text(
        '[ingest]\ndataset = "speakbench"\nmanifest = "manifest.jsonl"\n'
        'audio_dir = "audio"\nstore = "store"\n')
    result = invoke(["--config", "conf.toml", "ingest"], root)
    assert result.exit_code == 0, result.output


def test_swap_ab_stores_both_runs(tmp_path):
    root = tmp_path / "run"
    paths = build_corpus(root, n_examples=2)
    for step in (
        ["ingest", "--dataset", "speakbench", "--manifest", paths["manifest"],
         "--audio-dir", paths["audio"], "--store", "store"],
        ["fetch-features", "--store", "store", "--manifest",
         paths["raw_features"], "--out", "features.jsonl"],
        ["extract", "--audio", paths["audio"], "--out", "prosody",
         "--transcripts", "features.jsonl"],
        ["blueprint", "--store", "store", "--features", "features.jsonl",
         "--prosody", "prosody"],
    ):
        assert invoke(step, root).exit_code == 0
    # fixture covering both position orders
    from trace_eval.datastore import Datastore
    from trace_eval.judge import JudgeMode, render_prompt
    store = Datastore(root / "store")
    features = {}
    for line in (root / "features.jsonl").read_text().splitlines():
        row = json.loads(line)
        features[(row["clip_id"], row["feature"])] = row["payload"]
    rows = []
    for example in store.examples():
        for clip_a, clip_b in ((example.response_a, example.response_b),
                               (example.response_b, example.response_a)):
            bundle = render_prompt(
                JudgeMode.TRACE_BLUEPRINT,
                user_prompt=features[(example.prompt_audio, "asr")]["text"],
                blueprint_a=store.load_blueprint_text(clip_a),
                blueprint_b=store.load_blueprint_text(clip_b))
            rows.append({"digest": bundle.digest(),
                         "response": '{"content": "1", "voice_quality": "1", '
                                     '"instruction_following_audio": "1"}'})
    (root / "both.jsonl").write_text(
        "\n".join(json.dumps(r) for r in rows) + "\n")
    result = invoke(
        ["judge", "--store", "store", "--mode", "trace", "--backend",
         "replay:both.jsonl", "--features", "features.jsonl",
         "--run-name", "tr", "--swap-ab"], root)
    assert result.exit_code == 0, result.output
    assert len(store.load_judge_runs("tr")) == 2
    assert len(store.load_judge_runs("tr__swapped")) == 2


def test_agree_cli_on_stored_annotations(tmp_path):
    root = tmp_path / "run"
    paths = build_corpus(root, n_examples=5)
    assert invoke(
        ["ingest", "--dataset", "speakbench", "--manifest", paths["manifest"],
         "--audio-dir", paths["audio"], "--store", "store"],
        root).exit_code == 0
    from trace_eval.datastore import AnnotationRecord, Datastore
    from trace_eval.labels import DimScores, Rating
    from trace_eval.protocol import PassKind
    store = Datastore(root / "store")
    dims = DimScores(Rating.WIN_1, Rating.WIN_1, Rating.WIN_1)
    for i in range(5):
        overall = Rating.WIN_1 if i < 4 else Rating.WIN_2
        store.append_annotation(AnnotationRecord(
            example_id=f"ex{i:03d}", annotator_id="ann1",
            pass_kind=PassKind.HCOT, overall=overall, dims=dims))
        store.append_annotation(AnnotationRecord(
            example_id=f"ex{i:03d}", annotator_id="ann2",
            pass_kind=PassKind.BLIND_OVERALL_FIRST, overall=Rating.WIN_1))
    result = invoke(["agree", "--store", "store", "--replicates", "200",
                     "--format", "json"], root)
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert body["overlap"] == 5
    assert body["agreement"]["4_way"]["percent"] == 80.0
    assert body["agreement"]["2_way"]["n"] == 5


def test_ablation_pipeline_masks_blueprints_and_templates(tmp_path):
    root = tmp_path / "run"
    paths = build_corpus(root, n_examples=2)
    for step in (
        ["ingest", "--dataset", "speakbench", "--manifest", paths["manifest"],
         "--audio-dir", paths["audio"], "--store", "store"],
        ["fetch-features", "--store", "store", "--manifest",
         paths["raw_features"], "--out", "features.jsonl"],
        ["extract", "--audio", paths["audio"], "--out", "prosody",
         "--transcripts", "features.jsonl"],
        ["blueprint", "--store", "store", "--features", "features.jsonl",
         "--prosody", "prosody", "--ablate", "emotion"],
    ):
        assert invoke(step, root).exit_code == 0
    from trace_eval.datastore import Datastore
    from trace_eval.judge import JudgeMode, render_prompt
    store = Datastore(root / "store")
    # masked key removed (not nulled) from every stored blueprint
    for clip_id in store.blueprint_ids():
        doc = json.loads(store.load_blueprint_text(clip_id))
        assert "agent_emotion" not in doc
        assert None not in doc.values()
    # the judge stage renders with the matching template variant
    features = {}
    for line in (root / "features.jsonl").read_text().splitlines():
        row = json.loads(line)
        features[(row["clip_id"], row["feature"])] = row["payload"]
    rows = []
    for example in store.examples():
        bundle = render_prompt(
            JudgeMode.TRACE_BLUEPRINT,
            user_prompt=features[(example.prompt_audio, "asr")]["text"],
            blueprint_a=store.load_blueprint_text(example.response_a),
            blueprint_b=store.load_blueprint_text(example.response_b),
            ablated=frozenset({"emotion"}))
        assert '"agent_emotion"' not in bundle.user_text
        rows.append({"digest": bundle.digest(),
                     "response": '{"content": "1", "voice_quality": "1", '
                                 '"instruction_following_audio": "1"}'})
    (root / "ablated.jsonl").write_text(
        "\n".join(json.dumps(r) for r in rows) + "\n")
    result = invoke(
        ["judge", "--store", "store", "--mode", "trace", "--backend",
         "replay:ablated.jsonl", "--features", "features.jsonl",
         "--run-name", "no_emotion", "--ablate", "emotion"], root)
    assert result.exit_code == 0, result.output
    assert len(store.load_judge_runs("no_emotion")) == 2


def test_eval_reports_per_dimension_accuracy_from_annotations(tmp_path):
    root = tmp_path / "run"
    run_pipeline(root, n_examples=8, replicates=100)
    from trace_eval.datastore import AnnotationRecord, Datastore
    from trace_eval.labels import DimScores, Rating
    from trace_eval.protocol import PassKind
    from tests.pipeline_helpers import DIM_CYCLE
    store = Datastore(root / "store")
    # HCoT truth: content matches the judged cycle on even examples only
    for i in range(8):
        judged_content = Rating(DIM_CYCLE[i % 4][0])
        content = judged_content if i % 2 == 0 else (
            Rating.WIN_2 if judged_content is not Rating.WIN_2
            else Rating.WIN_1)
        dims = DimScores(content, Rating(DIM_CYCLE[i % 4][1]),
                         Rating(DIM_CYCLE[i % 4][2]))
        store.append_annotation(AnnotationRecord(
            example_id=f"ex{i:03d}", annotator_id="ann1",
            pass_kind=PassKind.HCOT, overall=Rating.WIN_1, dims=dims))
    result = invoke(
        ["eval", "--store", "store", "--systems", "trace_main",
         "--truth-pass", "hcot", "--replicates", "100", "--format", "json"],
        root)
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    dims = body["dimensions"]["trace_main"]
    assert dims["content"]["accuracy"] == pytest.approx(0.5)
    assert dims["vq"]["accuracy"] == 1.0
    assert dims["para"]["accuracy"] == 1.0
    # text rendering carries the per-dimension columns
    text = invoke(
        ["eval", "--store", "store", "--systems", "trace_main",
         "--truth-pass", "hcot", "--replicates", "100", "--format", "text"],
        root)
    assert "Content" in text.output and "Para" in text.output
