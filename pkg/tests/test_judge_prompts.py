import itertools
import json

import pytest

from trace_eval.judge import (
    JudgeMode,
    MissingInputError,
    render_prompt,
)
from trace_eval.judge.prompts import AUDIO_MARKERS, UnresolvedPlaceholderError, _fill

USER_PROMPT = "Say the alphabet slowly."

# Frozen digests: replay fixtures key on these, so any template or
# rendering change must be deliberate.
GOLDEN_DIGESTS = {
    "transcript": "9f19d01159eb4618117ed578800606a225b2181eedf2b6f420e47cbec354fd57",
    "trace": "7fa6ad39e9f0b2a5655cb0c0e4c4d0d8e638e1666a74adec4ea7704484cd59d0",
    "audio": "1ccc44a5fffd067dc8d63a50fd5b9c00aece80abe1a861690a8c1748bc17fbdc",
}


def transcript_bundle():
    return render_prompt(JudgeMode.TRANSCRIPT_ONLY, user_prompt=USER_PROMPT,
                         transcript_a="A B C", transcript_b="a b c then z")


def trace_bundle():
    return render_prompt(JudgeMode.TRACE_BLUEPRINT, user_prompt=USER_PROMPT,
                         blueprint_a='{"agent_response": "A B C"}',
                         blueprint_b='{"agent_response": "a b c"}')


def test_render_is_deterministic_and_matches_golden_digests():
    assert transcript_bundle().digest() == transcript_bundle().digest()
    assert transcript_bundle().digest() == GOLDEN_DIGESTS["transcript"]
    assert trace_bundle().digest() == GOLDEN_DIGESTS["trace"]
    audio = render_prompt(JudgeMode.AUDIO,
                          audio_refs=("p.wav", "a.wav", "b.wav"))
    assert audio.digest() == GOLDEN_DIGESTS["audio"]


def test_transcript_user_text_embeds_both_transcripts():
    bundle = transcript_bundle()
    assert "Here is Audio 1 text transcript:\n\nA B C" in bundle.user_text
    assert "Here is Audio 2 text transcript:\n\na b c then z" in bundle.user_text
    assert USER_PROMPT in bundle.user_text
    assert bundle.attachments == ()


def test_trace_user_text_embeds_both_blueprints():
    bundle = trace_bundle()
    assert "Here is Audio 1 response JSON:" in bundle.user_text
    assert '{"agent_response": "A B C"}' in bundle.user_text
    assert '{"agent_response": "a b c"}' in bundle.user_text
    # schema-description braces survive rendering untouched
    assert '"agent_audio_properties": {' in bundle.user_text


def test_system_prompt_shared_across_modes():
    assert transcript_bundle().system_text == trace_bundle().system_text
    assert "output valid JSON with exactly 4 keys" in transcript_bundle().system_text


def test_trace_missing_blueprint_is_named():
    with pytest.raises(MissingInputError) as err:
        render_prompt(JudgeMode.TRACE_BLUEPRINT, user_prompt=USER_PROMPT,
                      blueprint_a='{"agent_response": "x"}')
    assert err.value.missing == "blueprint_b"


def test_transcript_missing_input():
    with pytest.raises(MissingInputError):
        render_prompt(JudgeMode.TRANSCRIPT_ONLY, user_prompt=USER_PROMPT,
                      transcript_a="one side only")


def test_audio_mode_attachments_ordered():
    bundle = render_prompt(JudgeMode.AUDIO,
                           audio_refs=("prompt.wav", "a.wav", "b.wav"))
    assert bundle.attachments == ("prompt.wav", "a.wav", "b.wav")
    for marker in AUDIO_MARKERS.values():
        assert marker in bundle.user_text
    with pytest.raises(MissingInputError):
        render_prompt(JudgeMode.AUDIO)


def test_ablation_variants_drop_exactly_one_block():
    base = trace_bundle().user_text
    for name, key in (("emotion", "agent_emotion"),
                      ("accent", "agent_accent"),
                      ("quality", "agent_audio_quality"),
                      ("properties", "agent_audio_properties")):
        bundle = render_prompt(
            JudgeMode.TRACE_BLUEPRINT, user_prompt=USER_PROMPT,
            blueprint_a="{}", blueprint_b="{}", ablated=frozenset({name}))
        assert f'"{key}"' not in bundle.user_text
        others = {"agent_emotion", "agent_accent", "agent_audio_quality",
                  "agent_audio_properties"} - {key}
        for other in others:
            assert f'"{other}"' in bundle.user_text
    assert '"agent_emotion"' in base


def test_unknown_ablation_combination_rejected():
    with pytest.raises(ValueError, match="variant"):
        render_prompt(JudgeMode.TRACE_BLUEPRINT, user_prompt=USER_PROMPT,
                      blueprint_a="{}", blueprint_b="{}",
                      ablated=frozenset({"emotion", "accent"}))


def test_unresolved_placeholder_detected():
    with pytest.raises(UnresolvedPlaceholderError):
        _fill("before {user_prompt} after", {})


def test_custom_template_dir(tmp_path):
    (tmp_path / "system.txt").write_text("SYSTEM\n")
    (tmp_path / "user_transcript.txt").write_text(
        "{user_prompt}|{model_a_transcript}|{model_b_transcript}\n")
    bundle = render_prompt(JudgeMode.TRANSCRIPT_ONLY, user_prompt="u",
                           transcript_a="a", transcript_b="b",
                           template_dir=tmp_path)
    assert bundle.system_text == "SYSTEM\n"
    assert bundle.user_text == "u|a|b\n"


def test_digest_covers_attachments_and_mode():
    one = render_prompt(JudgeMode.AUDIO, audio_refs=("p", "a", "b"))
    two = render_prompt(JudgeMode.AUDIO, audio_refs=("p", "b", "a"))
    assert one.digest() != two.digest()
