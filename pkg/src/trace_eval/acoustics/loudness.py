"""Gated loudness measurement (ITU-R BS.1770-4 for mono program material).

K-weighting (spherical-head pre-filter plus RLB high-pass) is designed for
the clip's sample rate with the bilinear parametrization that reproduces
the published 48 kHz coefficients. Loudness is gated twice: an absolute
-70 LUFS gate, then a relative gate 10 LU under the absolute-gated mean.
Block statistics use 400 ms blocks with 75% overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import sosfilt

from . import kernels
from .audio_io import AudioClip
from .prosody import resample_contour

BLOCK_SECONDS = 0.400
BLOCK_OVERLAP = 0.75
ABSOLUTE_GATE_LUFS = -70.0
RELATIVE_GATE_LU = 10.0
_OFFSET = -0.691  # calibration so a 0 dBFS 997 Hz sine reads -3.01 LUFS


class AllGatedError(ValueError):
    """Every block fell below the absolute gate (near-silence)."""


@dataclass(frozen=True)
class LoudnessResult:
    integrated_lufs: float
    std_lufs: float
    contour_lufs: list[float]


def k_weighting_sos(sample_rate: int) -> np.ndarray:
    """Second-order sections for the two K-weighting stages."""
    # Stage 1: +4 dB high-shelf centred near 1.68 kHz.
    f0 = 1681.9744509555319
    gain_db = 3.99984385397
    q = 0.7071752369554193
    k = np.tan(np.pi * f0 / sample_rate)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh ** 0.499666774155
    a0 = 1.0 + k / q + k * k
    shelf = [
        (vh + vb * k / q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / q + k * k) / a0,
        1.0,
        2.0 * (k * k - 1.0) / a0,
        (1.0 - k / q + k * k) / a0,
    ]
    # Stage 2: RLB high-pass at 38 Hz.
    f0 = 38.13547087613982
    q = 0.5003270373253953
    k = np.tan(np.pi * f0 / sample_rate)
    a0 = 1.0 + k / q + k * k
    highpass = [
        1.0,
        -2.0,
        1.0,
        1.0,
        2.0 * (k * k - 1.0) / a0,
        (1.0 - k / q + k * k) / a0,
    ]
    return np.array([shelf, highpass])


def _block_loudness(clip: AudioClip) -> np.ndarray:
    weighted = sosfilt(k_weighting_sos(clip.sample_rate), clip.samples)
    block = int(round(BLOCK_SECONDS * clip.sample_rate))
    hop = int(round(block * (1.0 - BLOCK_OVERLAP)))
    power = kernels.block_mean_square(weighted, block, hop)
    if power.size == 0:
        # clip shorter than one block: measure it as a single block
        power = np.array([float(np.mean(weighted ** 2))])
    with np.errstate(divide="ignore"):
        return _OFFSET + 10.0 * np.log10(power)


def measure_loudness(clip: AudioClip) -> LoudnessResult:
    """Integrated gated loudness plus block-level std and contour.

    Std and contour are taken over the absolute-gated 400 ms block values;
    the relative gate applies to the integrated figure only. Raises
    AllGatedError when no block clears the absolute gate.
    """
    if len(clip.samples) == 0:
        raise AllGatedError("empty clip")
    if clip.sample_rate < 8000:
        raise ValueError("loudness measurement requires >= 8 kHz audio")
    block_lufs = _block_loudness(clip)
    above_abs = block_lufs > ABSOLUTE_GATE_LUFS
    if not above_abs.any():
        raise AllGatedError("all blocks below the absolute gate")
    gated = block_lufs[above_abs]

    power = 10.0 ** ((gated - _OFFSET) / 10.0)
    relative_gate = _OFFSET + 10.0 * np.log10(power.mean()) - RELATIVE_GATE_LU
    final = power[gated > relative_gate]
    integrated = _OFFSET + 10.0 * np.log10(final.mean())

    return LoudnessResult(
        integrated_lufs=round(float(integrated), 2),
        std_lufs=round(float(gated.std()), 2),
        contour_lufs=resample_contour(gated, 20),
    )
