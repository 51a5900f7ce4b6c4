"""The per-response feature document handed to the text judge.

One blueprint bundles the transcript, emotion vector, accent vector,
formatted quality scores, and prosody block. Serialization is canonical:
frozen key order, two-space indent, shortest-repr numbers; quality values
are strings of the form "X.XX / 5.00". Documents either assemble fully or
not at all; a missing input is an error, never a partial file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .acoustics.prosody import ProsodyFeatures
from .extractors import (
    ACCENT_KEYS,
    EMOTION_KEYS,
    AccentVector,
    EmotionVector,
    MalformedPayloadError,
    QualityScores,
)

TOP_LEVEL_KEYS = ("agent_response", "agent_emotion", "agent_accent",
                  "agent_audio_quality", "agent_audio_properties")
QUALITY_FIELDS = ("DNSMOS_Personalized_Signal_Quality",
                  "DNSMOS_Personalized_Background_Quality",
                  "DNSMOS_Personalized_Overall_Quality",
                  "P808_Overall_Quality")
PROSODY_FIELDS = ("Mean_Pitch_Hz", "Std_Dev_Pitch_Hz", "Full_Pitch_Contour_Hz",
                  "Integrated_Loudness_LUFS", "Std_Dev_Loudness_LUFS",
                  "Full_Loudness_Contour_LUFS", "Speech_Rate_WPM",
                  "Articulation_Rate_WPM")
CONTOUR_FIELDS = ("Full_Pitch_Contour_Hz", "Full_Loudness_Contour_LUFS")
CONTOUR_POINTS = 20

# Field groups removable by the ablation mask (the key is removed from the
# document entirely, never nulled).
ABLATABLE = {"emotion": "agent_emotion", "accent": "agent_accent",
             "quality": "agent_audio_quality",
             "properties": "agent_audio_properties"}

_QUALITY_RE = re.compile(r"^(\d+\.\d{2}) / 5\.00$")


class MissingFeatureError(ValueError):
    """A required blueprint input is absent; names the missing piece."""

    def __init__(self, feature: str):
        self.feature = feature
        super().__init__(f"blueprint input missing: {feature}")


class BlueprintParseError(ValueError):
    """Document text is not a valid blueprint."""


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def format_quality(value: float) -> str:
    return f"{value:.2f} / 5.00"


@dataclass(frozen=True)
class Blueprint:
    transcript: str
    emotion: EmotionVector
    accent: AccentVector
    quality: QualityScores
    prosody: ProsodyFeatures

    def to_document(self) -> dict:
        return {
            "agent_response": self.transcript,
            "agent_emotion": {k: self.emotion.scores[k] for k in EMOTION_KEYS},
            "agent_accent": {k: self.accent.similarities[k]
                             for k in ACCENT_KEYS},
            "agent_audio_quality": {
                "DNSMOS_Personalized_Signal_Quality": format_quality(self.quality.sig),
                "DNSMOS_Personalized_Background_Quality": format_quality(self.quality.bak),
                "DNSMOS_Personalized_Overall_Quality": format_quality(self.quality.ovrl),
                "P808_Overall_Quality": format_quality(self.quality.p808),
            },
            "agent_audio_properties": self.prosody.to_json_dict(),
        }


def build_blueprint(transcript: str | None, emotion: EmotionVector | None,
                    accent: AccentVector | None,
                    quality: QualityScores | None,
                    prosody: ProsodyFeatures | None) -> Blueprint:
    """Assemble a complete blueprint; quality floats are quantized to the
    2 decimals their display strings carry so round-trips are lossless."""
    for name, value in (("transcript", transcript), ("emotion", emotion),
                        ("accent", accent), ("quality", quality),
                        ("prosody", prosody)):
        if value is None:
            raise MissingFeatureError(name)
    quality = QualityScores(sig=round(quality.sig, 2),
                            bak=round(quality.bak, 2),
                            ovrl=round(quality.ovrl, 2),
                            p808=round(quality.p808, 2))
    return Blueprint(transcript=transcript, emotion=emotion, accent=accent,
                     quality=quality, prosody=prosody)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_blueprint(doc, ablated: frozenset[str] = frozenset()
                       ) -> list[Violation]:
    """Check every structural invariant; returns all violations, not the
    first. ``ablated`` names field groups allowed to be absent."""
    violations: list[Violation] = []
    if not isinstance(doc, dict):
        return [Violation("bad_type", "document must be a JSON object")]
    removed = {ABLATABLE[name] for name in ablated}
    expected = [k for k in TOP_LEVEL_KEYS if k not in removed]
    missing = set(expected) - set(doc)
    extra = set(doc) - set(expected) - {"schema_version"}
    for key in sorted(missing):
        violations.append(Violation("missing_key", f"top-level key {key!r}"))
    for key in sorted(extra):
        violations.append(Violation("extra_key", f"top-level key {key!r}"))

    if "agent_response" in doc and not isinstance(doc["agent_response"], str):
        violations.append(Violation("bad_type", "agent_response must be text"))

    if "agent_emotion" in doc:
        try:
            EmotionVector.validate(doc["agent_emotion"])
        except MalformedPayloadError as exc:
            violations.append(Violation("emotion", str(exc)))
    if "agent_accent" in doc:
        try:
            AccentVector.validate(doc["agent_accent"])
        except MalformedPayloadError as exc:
            violations.append(Violation("accent", str(exc)))

    quality = doc.get("agent_audio_quality")
    if quality is not None:
        if not isinstance(quality, dict):
            violations.append(Violation("bad_type",
                                        "agent_audio_quality must be an object"))
        else:
            for key in QUALITY_FIELDS:
                if key not in quality:
                    violations.append(Violation("missing_key",
                                                f"quality key {key!r}"))
                    continue
                value = quality[key]
                if not isinstance(value, str) or not _QUALITY_RE.match(value):
                    violations.append(Violation(
                        "quality_format",
                        f"{key} must be a string 'X.XX / 5.00', got {value!r}"))
            for key in set(quality) - set(QUALITY_FIELDS):
                violations.append(Violation("extra_key",
                                            f"quality key {key!r}"))

    props = doc.get("agent_audio_properties")
    if props is not None:
        if not isinstance(props, dict):
            violations.append(Violation(
                "bad_type", "agent_audio_properties must be an object"))
        else:
            for key in PROSODY_FIELDS:
                if key not in props:
                    violations.append(Violation("missing_key",
                                                f"prosody key {key!r}"))
            for key in set(props) - set(PROSODY_FIELDS):
                violations.append(Violation("extra_key",
                                            f"prosody key {key!r}"))
            for key in CONTOUR_FIELDS:
                contour = props.get(key)
                if contour is None:
                    continue
                if (not isinstance(contour, list)
                        or not all(_is_number(v) for v in contour)):
                    violations.append(Violation(
                        "bad_type", f"{key} must be a list of numbers"))
                elif len(contour) != CONTOUR_POINTS:
                    violations.append(Violation(
                        "contour_length",
                        f"{key} has {len(contour)} points, "
                        f"expected {CONTOUR_POINTS}"))
            for key in ("Mean_Pitch_Hz", "Std_Dev_Pitch_Hz",
                        "Integrated_Loudness_LUFS", "Std_Dev_Loudness_LUFS",
                        "Speech_Rate_WPM", "Articulation_Rate_WPM"):
                if key in props and not _is_number(props[key]):
                    violations.append(Violation(
                        "bad_type", f"{key} must be a number"))
            if _is_number(props.get("Mean_Pitch_Hz")) and props["Mean_Pitch_Hz"] <= 0:
                violations.append(Violation("range",
                                            "Mean_Pitch_Hz must be positive"))
            for key in ("Speech_Rate_WPM", "Articulation_Rate_WPM"):
                if _is_number(props.get(key)) and props[key] < 0:
                    violations.append(Violation("range",
                                                f"{key} must be >= 0"))
    return violations


def serialize_blueprint(doc: dict) -> str:
    """Canonical text: frozen key order, 2-space indent, trailing newline."""
    ordered = {key: doc[key] for key in TOP_LEVEL_KEYS if key in doc}
    if "agent_emotion" in ordered:
        ordered["agent_emotion"] = {
            k: ordered["agent_emotion"][k] for k in EMOTION_KEYS}
    if "agent_accent" in ordered:
        ordered["agent_accent"] = {
            k: ordered["agent_accent"][k] for k in ACCENT_KEYS}
    if "agent_audio_quality" in ordered:
        ordered["agent_audio_quality"] = {
            k: ordered["agent_audio_quality"][k] for k in QUALITY_FIELDS}
    if "agent_audio_properties" in ordered:
        ordered["agent_audio_properties"] = {
            k: ordered["agent_audio_properties"][k] for k in PROSODY_FIELDS
            if k in ordered["agent_audio_properties"]}
    return json.dumps(ordered, indent=2, ensure_ascii=False) + "\n"


def deserialize_blueprint(text: str, ablated: frozenset[str] = frozenset()
                          ) -> dict:
    """Parse and validate canonical text back to a document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BlueprintParseError(
            f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    violations = validate_blueprint(doc, ablated=ablated)
    if violations:
        raise BlueprintParseError(
            "; ".join(str(v) for v in violations))
    return doc


def blueprint_from_document(doc: dict) -> Blueprint:
    """Reconstruct the typed value from a validated full document."""
    violations = validate_blueprint(doc)
    if violations:
        raise BlueprintParseError("; ".join(str(v) for v in violations))
    quality = doc["agent_audio_quality"]

    def q(key: str) -> float:
        return float(_QUALITY_RE.match(quality[key]).group(1))

    return Blueprint(
        transcript=doc["agent_response"],
        emotion=EmotionVector.validate(doc["agent_emotion"]),
        accent=AccentVector.validate(doc["agent_accent"]),
        quality=QualityScores(
            sig=q("DNSMOS_Personalized_Signal_Quality"),
            bak=q("DNSMOS_Personalized_Background_Quality"),
            ovrl=q("DNSMOS_Personalized_Overall_Quality"),
            p808=q("P808_Overall_Quality")),
        prosody=ProsodyFeatures.from_json_dict(doc["agent_audio_properties"]),
    )


def mask_document(doc: dict, ablated: frozenset[str]) -> dict:
    """Remove ablated field groups from a document copy."""
    removed = {ABLATABLE[name] for name in ablated}
    return {k: v for k, v in doc.items() if k not in removed}
