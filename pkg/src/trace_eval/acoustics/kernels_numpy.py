"""NumPy implementations of the prosody number-crunching kernels.

This is the import-time fallback when the compiled extension is absent;
outputs match ``_kernels`` to floating-point tolerance.
"""

from __future__ import annotations

import numpy as np


def frame_autocorr(x: np.ndarray, frame_len: int, hop: int,
                   n_lags: int) -> np.ndarray:
    """Per-frame demeaned autocorrelation, lags 0..n_lags-1 (biased sums).

    Uses FFT cross-power per frame; identical to the direct sum up to
    rounding because the transform length covers frame_len + n_lags.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    n_frames = 1 + (n - frame_len) // hop if n >= frame_len and frame_len > 0 else 0
    n_lags = min(n_lags, frame_len)
    if n_frames == 0:
        return np.zeros((0, n_lags), dtype=np.float64)
    idx = np.arange(n_frames)[:, None] * hop + np.arange(frame_len)[None, :]
    frames = x[idx]
    frames -= frames.mean(axis=1, keepdims=True)
    nfft = 1
    while nfft < frame_len + n_lags:
        nfft <<= 1
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    acf = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, n=nfft, axis=1)
    return np.ascontiguousarray(acf[:, :n_lags])


def block_mean_square(x: np.ndarray, block_len: int, hop: int) -> np.ndarray:
    """Mean square per overlapping block."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    n_blocks = 1 + (n - block_len) // hop if n >= block_len and block_len > 0 else 0
    if n_blocks == 0:
        return np.zeros(0, dtype=np.float64)
    csum = np.concatenate(([0.0], np.cumsum(x * x)))
    starts = np.arange(n_blocks) * hop
    return (csum[starts + block_len] - csum[starts]) / block_len


def frame_rms(x: np.ndarray, frame_len: int) -> np.ndarray:
    """RMS over adjacent non-overlapping full frames."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n_frames = x.shape[0] // frame_len if frame_len > 0 else 0
    if n_frames == 0:
        return np.zeros(0, dtype=np.float64)
    frames = x[: n_frames * frame_len].reshape(n_frames, frame_len)
    return np.sqrt(np.mean(frames * frames, axis=1))
