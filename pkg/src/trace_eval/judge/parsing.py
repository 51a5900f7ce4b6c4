"""Parsing of structured judge responses into dimension scores.

Two key dialects are accepted: the prompt-facing keys (content,
voice_quality, instruction_following_audio) and the compact prediction_*
keys (prediction_content, prediction_vq, prediction_para); the third key
of either dialect maps to the paralinguistics dimension. One repair pass
only (fence stripping plus first-balanced-object extraction) keeps runs
deterministic; there is no re-prompting.
"""

from __future__ import annotations

import json
import re

from ..labels import BadLabelError, DimScores, Rating, parse_rating

PROMPT_KEYS = ("content", "voice_quality", "instruction_following_audio")
LISTING_KEYS = ("prediction_content", "prediction_vq", "prediction_para")

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)\n\s*```", re.DOTALL)


class ParseFailure(ValueError):
    """Judge response could not be turned into dimension scores."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)

    def as_record(self) -> dict:
        return {"code": self.code, "message": str(self)}


def _first_balanced_object(text: str) -> str | None:
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


def _load_object(raw_text: str) -> dict:
    try:
        data = json.loads(raw_text)
        if isinstance(data, dict):
            return data
    except json.JSONDecodeError:
        pass
    # single repair pass: drop fences, then take the first balanced object
    candidate = raw_text
    fence = _FENCE_RE.search(candidate)
    if fence:
        candidate = fence.group(1)
    balanced = _first_balanced_object(candidate)
    if balanced is not None:
        try:
            data = json.loads(balanced)
            if isinstance(data, dict):
                return data
        except json.JSONDecodeError:
            pass
    raise ParseFailure("NOT_JSON", "no JSON object found in judge response")


def _reasoning_dict(raw) -> dict[str, str]:
    if isinstance(raw, dict):
        return {"content": str(raw.get("content", "")),
                "vq": str(raw.get("vq", "")),
                "para": str(raw.get("para", ""))}
    if isinstance(raw, str):
        return {"content": raw, "vq": raw, "para": raw}
    return {"content": "", "vq": "", "para": ""}


def parse_decisions(raw_text: str) -> DimScores:
    """Parse a judge response under either key dialect.

    Raises ParseFailure with code NOT_JSON, MISSING_KEY, or BAD_LABEL.
    Extra keys are tolerated.
    """
    data = _load_object(raw_text)
    if any(key in data for key in LISTING_KEYS):
        keys = LISTING_KEYS
    else:
        keys = PROMPT_KEYS
    missing = [key for key in keys if key not in data]
    if missing:
        raise ParseFailure("MISSING_KEY",
                           f"response lacks keys: {missing}")
    ratings = []
    for key in keys:
        value = data[key]
        if not isinstance(value, str):
            raise ParseFailure("BAD_LABEL",
                               f"{key} must be a label string, got {value!r}")
        try:
            ratings.append(parse_rating(value))
        except BadLabelError as exc:
            raise ParseFailure("BAD_LABEL", f"{key}: {exc}") from None
    return DimScores(content=ratings[0], voice_quality=ratings[1],
                     paralinguistics=ratings[2],
                     reasoning=_reasoning_dict(data.get("reasoning")))


def serialize_decisions(scores: DimScores, dialect: str = "listing") -> str:
    """Canonical JSON for dimension scores under either key dialect."""
    if dialect == "listing":
        payload = {
            "prediction_content": scores.content.value,
            "prediction_vq": scores.voice_quality.value,
            "prediction_para": scores.paralinguistics.value,
            "reasoning": dict(scores.reasoning),
        }
    elif dialect == "prompt":
        payload = {
            "reasoning": dict(scores.reasoning),
            "content": scores.content.value,
            "voice_quality": scores.voice_quality.value,
            "instruction_following_audio": scores.paralinguistics.value,
        }
    else:
        raise ValueError(f"dialect must be listing or prompt, got {dialect!r}")
    return json.dumps(payload, ensure_ascii=False)


def scores_to_record(scores: DimScores) -> dict:
    return {"content": scores.content.value,
            "vq": scores.voice_quality.value,
            "para": scores.paralinguistics.value,
            "reasoning": dict(scores.reasoning)}


def scores_from_record(record: dict) -> DimScores:
    return DimScores(content=Rating(record["content"]),
                     voice_quality=Rating(record["vq"]),
                     paralinguistics=Rating(record["para"]),
                     reasoning=dict(record.get("reasoning", {})))
