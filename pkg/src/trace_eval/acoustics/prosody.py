"""Prosody feature bundle and the shared contour resampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONTOUR_POINTS = 20


def resample_contour(values, points: int = CONTOUR_POINTS) -> list[float]:
    """Uniform linear resampling to a fixed length, 2-decimal rounded.

    Endpoints map onto the first and last input values exactly.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot resample an empty contour")
    if values.size == 1:
        return [round(float(values[0]), 2)] * points
    positions = np.linspace(0.0, values.size - 1, points)
    resampled = np.interp(positions, np.arange(values.size), values)
    return [round(float(v), 2) for v in resampled]


@dataclass(frozen=True)
class ProsodyFeatures:
    """Signal-level properties of one response, ready for the blueprint."""

    mean_pitch_hz: float
    std_dev_pitch_hz: float
    pitch_contour_hz: list[float]
    integrated_loudness_lufs: float
    std_dev_loudness_lufs: float
    loudness_contour_lufs: list[float]
    speech_rate_wpm: float
    articulation_rate_wpm: float

    def __post_init__(self):
        if len(self.pitch_contour_hz) != len(self.loudness_contour_lufs):
            raise ValueError("contours must share one configured length")
        if self.speech_rate_wpm < 0 or self.articulation_rate_wpm < 0:
            raise ValueError("rates must be non-negative")

    def to_json_dict(self) -> dict:
        return {
            "Mean_Pitch_Hz": self.mean_pitch_hz,
            "Std_Dev_Pitch_Hz": self.std_dev_pitch_hz,
            "Full_Pitch_Contour_Hz": list(self.pitch_contour_hz),
            "Integrated_Loudness_LUFS": self.integrated_loudness_lufs,
            "Std_Dev_Loudness_LUFS": self.std_dev_loudness_lufs,
            "Full_Loudness_Contour_LUFS": list(self.loudness_contour_lufs),
            "Speech_Rate_WPM": self.speech_rate_wpm,
            "Articulation_Rate_WPM": self.articulation_rate_wpm,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ProsodyFeatures":
        return cls(
            mean_pitch_hz=data["Mean_Pitch_Hz"],
            std_dev_pitch_hz=data["Std_Dev_Pitch_Hz"],
            pitch_contour_hz=list(data["Full_Pitch_Contour_Hz"]),
            integrated_loudness_lufs=data["Integrated_Loudness_LUFS"],
            std_dev_loudness_lufs=data["Std_Dev_Loudness_LUFS"],
            loudness_contour_lufs=list(data["Full_Loudness_Contour_LUFS"]),
            speech_rate_wpm=data["Speech_Rate_WPM"],
            articulation_rate_wpm=data["Articulation_Rate_WPM"],
        )


def extract_prosody(clip, transcript_words: list[str]) -> ProsodyFeatures:
    """Full prosody bundle for one clip.

    Propagates NoVoicedFramesError / AllGatedError so callers can record
    a null-prosody flag instead of a partial feature set.
    """
    from .loudness import measure_loudness
    from .pitch import estimate_pitch
    from .rates import speech_rates

    pitch = estimate_pitch(clip)
    loud = measure_loudness(clip)
    speech, articulation = speech_rates(clip, transcript_words)
    return ProsodyFeatures(
        mean_pitch_hz=pitch.mean_hz,
        std_dev_pitch_hz=pitch.std_hz,
        pitch_contour_hz=pitch.contour_hz,
        integrated_loudness_lufs=loud.integrated_lufs,
        std_dev_loudness_lufs=loud.std_lufs,
        loudness_contour_lufs=loud.contour_lufs,
        speech_rate_wpm=speech,
        articulation_rate_wpm=articulation,
    )
