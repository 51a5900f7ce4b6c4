"""Prompt assembly for the three judge modes.

Templates are loaded from versioned text files (``prompts/`` inside the
package by default) and filled by exact token replacement, so literal
braces in the schema-description prose are untouched. A bundle is fully
deterministic and addressed by the digest of its rendered content.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


class JudgeMode(enum.Enum):
    TRACE_BLUEPRINT = "trace"
    TRANSCRIPT_ONLY = "transcript"
    AUDIO = "audio"

    @classmethod
    def from_name(cls, name: str) -> "JudgeMode":
        for mode in cls:
            if mode.value == name:
                return mode
        raise ValueError(f"unknown judge mode {name!r}")


class MissingInputError(ValueError):
    """A prompt input required by the mode is absent."""

    def __init__(self, name: str):
        self.missing = name
        super().__init__(f"prompt input missing: {name}")


class UnresolvedPlaceholderError(ValueError):
    """A known placeholder token survived rendering."""


PLACEHOLDERS = ("{user_prompt}", "{model_a_transcript}", "{model_b_transcript}",
                "{audio_a.json}", "{audio_b.json}", "{instruction.wav}",
                "{audio_a.wav}", "{audio_b.wav}")

# Marker text standing in for an attachment slot in AUDIO mode; the actual
# audio travels in PromptBundle.attachments, in this order.
AUDIO_MARKERS = {"{instruction.wav}": "<audio:instruction>",
                 "{audio_a.wav}": "<audio:response_a>",
                 "{audio_b.wav}": "<audio:response_b>"}

_TRACE_TEMPLATES = {
    frozenset(): "user_trace.txt",
    frozenset({"emotion"}): "user_trace_no_emotion.txt",
    frozenset({"accent"}): "user_trace_no_accent.txt",
    frozenset({"quality"}): "user_trace_no_quality.txt",
    frozenset({"properties"}): "user_trace_no_properties.txt",
}


@dataclass(frozen=True)
class PromptBundle:
    mode: JudgeMode
    system_text: str
    user_text: str
    attachments: tuple[str, ...] = field(default_factory=tuple)

    def digest(self) -> str:
        payload = json.dumps(
            {"mode": self.mode.value, "system": self.system_text,
             "user": self.user_text, "attachments": list(self.attachments)},
            sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_template(name: str, template_dir: str | Path | None = None) -> str:
    if template_dir is not None:
        return (Path(template_dir) / name).read_text(encoding="utf-8")
    return (resources.files("trace_eval") / "prompts" / name).read_text(
        encoding="utf-8")


def _fill(template: str, replacements: dict[str, str]) -> str:
    text = template
    for token, value in replacements.items():
        text = text.replace(token, value)
    leftover = [tok for tok in PLACEHOLDERS if tok in text]
    if leftover:
        raise UnresolvedPlaceholderError(
            f"unresolved placeholder tokens: {leftover}")
    return text


def render_prompt(mode: JudgeMode, user_prompt: str | None = None,
                  blueprint_a: str | None = None,
                  blueprint_b: str | None = None,
                  transcript_a: str | None = None,
                  transcript_b: str | None = None,
                  audio_refs: tuple[str, str, str] | None = None,
                  ablated: frozenset[str] = frozenset(),
                  template_dir: str | Path | None = None) -> PromptBundle:
    """Build the bundle for one example under the requested mode.

    ``audio_refs`` is (instruction, response_a, response_b) and is only
    consulted in AUDIO mode; ``ablated`` selects the matching blueprint
    template variant in TRACE mode.
    """
    system_text = load_template("system.txt", template_dir)

    if mode is JudgeMode.TRACE_BLUEPRINT:
        for name, value in (("user_prompt", user_prompt),
                            ("blueprint_a", blueprint_a),
                            ("blueprint_b", blueprint_b)):
            if value is None:
                raise MissingInputError(name)
        try:
            template_name = _TRACE_TEMPLATES[frozenset(ablated)]
        except KeyError:
            raise ValueError(
                f"no blueprint template variant for ablation {set(ablated)}"
            ) from None
        template = load_template(template_name, template_dir)
        user_text = _fill(template, {
            "{user_prompt}": user_prompt,
            "{audio_a.json}": blueprint_a,
            "{audio_b.json}": blueprint_b,
        })
        return PromptBundle(mode, system_text, user_text)

    if mode is JudgeMode.TRANSCRIPT_ONLY:
        for name, value in (("user_prompt", user_prompt),
                            ("transcript_a", transcript_a),
                            ("transcript_b", transcript_b)):
            if value is None:
                raise MissingInputError(name)
        template = load_template("user_transcript.txt", template_dir)
        user_text = _fill(template, {
            "{user_prompt}": user_prompt,
            "{model_a_transcript}": transcript_a,
            "{model_b_transcript}": transcript_b,
        })
        return PromptBundle(mode, system_text, user_text)

    if audio_refs is None or len(audio_refs) != 3:
        raise MissingInputError("audio_refs")
    template = load_template("user_audio.txt", template_dir)
    user_text = _fill(template, AUDIO_MARKERS)
    return PromptBundle(mode, system_text, user_text,
                        attachments=tuple(audio_refs))
