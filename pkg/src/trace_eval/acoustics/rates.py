"""Speech and articulation rate from a transcript and an energy-based
speech-activity profile.

Speech rate divides by the full clip duration; articulation rate divides
by speech-active time only, where activity comes from 10 ms non-overlapping
frame RMS against a -40 dB-of-peak threshold and only silent runs of at
least 200 ms count as pauses (shorter dropouts stay "speech").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .audio_io import AudioClip


class ZeroDurationError(ValueError):
    """The clip has no samples to measure."""


@dataclass(frozen=True)
class RateConfig:
    frame_seconds: float = 0.010
    threshold_db: float = -40.0
    min_pause_seconds: float = 0.200


def active_seconds(clip: AudioClip, config: RateConfig = RateConfig()) -> float:
    """Clip duration minus detected pauses."""
    frame_len = max(1, int(round(config.frame_seconds * clip.sample_rate)))
    rms = kernels.frame_rms(clip.samples, frame_len)
    duration = clip.duration
    if rms.size == 0:
        return duration
    peak = float(np.max(np.abs(clip.samples)))
    if peak <= 0.0:
        return 0.0
    threshold = peak * 10.0 ** (config.threshold_db / 20.0)
    inactive = rms <= threshold
    min_pause_frames = int(round(config.min_pause_seconds / config.frame_seconds))
    frame_dur = frame_len / clip.sample_rate

    pause_frames = 0
    run = 0
    for flag in inactive:
        if flag:
            run += 1
        else:
            if run >= min_pause_frames:
                pause_frames += run
            run = 0
    if run >= min_pause_frames:
        pause_frames += run
    return duration - pause_frames * frame_dur


def speech_rates(clip: AudioClip, transcript_words: list[str],
                 config: RateConfig = RateConfig()) -> tuple[float, float]:
    """(speech_rate_wpm, articulation_rate_wpm), 2-decimal rounded.

    With no detectable speech activity the articulation rate degrades to
    the speech rate rather than dividing by zero.
    """
    if len(clip.samples) == 0:
        raise ZeroDurationError("cannot compute rates on an empty clip")
    words = len(transcript_words)
    duration = clip.duration
    speech = words / (duration / 60.0)
    active = active_seconds(clip, config)
    articulation = words / (active / 60.0) if active > 0 else speech
    return round(speech, 2), round(articulation, 2)
