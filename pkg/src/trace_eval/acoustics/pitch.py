"""Fundamental-frequency estimation via frame-wise autocorrelation.

40 ms frames with a 10 ms hop; the biased frame autocorrelation comes from
the kernel backend and the taper is removed with the N/(N-lag) correction.
Within the 60-500 Hz search band the estimate is the first local maximum
whose normalized value clears the voicing threshold (first-peak selection
avoids octave drops on signals that also correlate at period multiples),
refined by parabolic interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .audio_io import AudioClip
from .prosody import resample_contour


class NoVoicedFramesError(ValueError):
    """No frame passed the voicing test (silence or aperiodic signal)."""


@dataclass(frozen=True)
class PitchConfig:
    frame_seconds: float = 0.040
    hop_seconds: float = 0.010
    fmin_hz: float = 60.0
    fmax_hz: float = 500.0
    voicing_threshold: float = 0.45
    contour_points: int = 20


@dataclass(frozen=True)
class PitchResult:
    mean_hz: float
    std_hz: float
    contour_hz: list[float]


def _first_peak(row: np.ndarray, min_lag: int, max_lag: int,
                threshold: float) -> int | None:
    for lag in range(min_lag, max_lag + 1):
        if (row[lag] > threshold and row[lag] > row[lag - 1]
                and row[lag] >= row[lag + 1]):
            return lag
    return None


def voiced_f0_track(clip: AudioClip, config: PitchConfig = PitchConfig()
                    ) -> np.ndarray:
    """Per-voiced-frame f0 estimates in temporal order."""
    sr = clip.sample_rate
    frame_len = int(round(config.frame_seconds * sr))
    hop = int(round(config.hop_seconds * sr))
    min_lag = max(1, int(sr / config.fmax_hz))
    max_lag = min(int(np.ceil(sr / config.fmin_hz)), frame_len - 2)
    if max_lag <= min_lag:
        return np.zeros(0)
    acf = kernels.frame_autocorr(clip.samples, frame_len, hop, max_lag + 2)
    if acf.shape[0] == 0:
        return np.zeros(0)

    # Undo the (1 - lag/N) taper of the biased estimate so thresholds and
    # interpolation see the true correlation height.
    lags = np.arange(acf.shape[1])
    unbiased = acf * (frame_len / (frame_len - lags))

    track = []
    for f in range(acf.shape[0]):
        r0 = acf[f, 0]
        if r0 <= 0.0:
            continue
        row = unbiased[f] / r0
        best = _first_peak(row, min_lag, max_lag, config.voicing_threshold)
        if best is None:
            continue
        prev_v, peak, next_v = row[best - 1], row[best], row[best + 1]
        denom = prev_v - 2.0 * peak + next_v
        delta = 0.5 * (prev_v - next_v) / denom if denom < 0 else 0.0
        delta = float(np.clip(delta, -1.0, 1.0))
        f0 = sr / (best + delta)
        if config.fmin_hz <= f0 <= config.fmax_hz:
            track.append(f0)
    return np.array(track)


def estimate_pitch(clip: AudioClip, config: PitchConfig = PitchConfig()
                   ) -> PitchResult:
    """Mean/std over voiced frames and a fixed-length contour, 2-decimal
    rounded.

    Raises NoVoicedFramesError when nothing in the clip is periodic enough.
    """
    if len(clip.samples) == 0:
        raise NoVoicedFramesError("empty clip")
    track = voiced_f0_track(clip, config)
    if track.size == 0:
        raise NoVoicedFramesError("no voiced frames detected")
    return PitchResult(
        mean_hz=round(float(track.mean()), 2),
        std_hz=round(float(track.std()), 2),
        contour_hz=resample_contour(track, config.contour_points),
    )
